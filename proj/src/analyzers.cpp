#include "dymapia/analyzers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "dymapia/fft.hpp"
#include "dymapia/imgcore.hpp"

namespace dymapia {

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(var / static_cast<double>(v.size()));
    return s;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

GrayFrame gaussian_blur(const GrayFrame& f, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + r];
    }
    for (double& w : k) w /= sum;

    GrayFrame tmp(f.height, f.width, 0.0, f.t);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * f.at(y, clampi(x + i, 0, f.width - 1));
            tmp.at(y, x) = acc;
        }
    GrayFrame out(f.height, f.width, 0.0, f.t);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(clampi(y + i, 0, f.height - 1), x);
            out.at(y, x) = acc;
        }
    return out;
}

namespace {

// 3x3 Sobel pair, replicate border.
void sobel(const GrayFrame& f, std::vector<double>& gx, std::vector<double>& gy) {
    const int h = f.height, w = f.width;
    gx.assign(static_cast<size_t>(h) * w, 0.0);
    gy.assign(static_cast<size_t>(h) * w, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto px = [&](int dy, int dx) {
                return f.at(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
            };
            gx[static_cast<size_t>(y) * w + x] =
                (px(-1, 1) + 2.0 * px(0, 1) + px(1, 1)) - (px(-1, -1) + 2.0 * px(0, -1) + px(1, -1));
            gy[static_cast<size_t>(y) * w + x] =
                (px(1, -1) + 2.0 * px(1, 0) + px(1, 1)) - (px(-1, -1) + 2.0 * px(-1, 0) + px(-1, 1));
        }
    }
}

// Tiling over the frame; partial tiles at the right/bottom borders included.
struct Tile {
    int y0, x0, y1, x1;
};

std::vector<Tile> tiles_for(int h, int w, int block) {
    std::vector<Tile> out;
    for (int y = 0; y < h; y += block)
        for (int x = 0; x < w; x += block)
            out.push_back({y, x, std::min(h, y + block), std::min(w, x + block)});
    return out;
}

void check_analyzer_input(const GrayFrame& f) {
    if (f.height < 16 || f.width < 16)
        throw invalid_input("analyzer input must be at least 16x16");
}

double median_of(std::vector<double>& buf) {
    // lower median keeps clipped border windows deterministic
    const size_t k = (buf.size() - 1) / 2;
    std::nth_element(buf.begin(), buf.begin() + static_cast<long>(k), buf.end());
    return buf[k];
}

}  // namespace

BinaryMask freq_mask(const GrayFrame& frame, const AnalyzerConfig& cfg) {
    check_analyzer_input(frame);
    const GrayFrame residual = ifft2d(highpass(fft2d(frame), cfg.t_freq));
    std::vector<double> r(residual.size());
    for (size_t i = 0; i < r.size(); ++i) r[i] = std::abs(residual.data[i]);
    const MeanStd s = mean_std(r);
    BinaryMask mask(frame.height, frame.width, 0);
    if (s.std < 1e-12) return mask;  // constant residual
    const double thr = s.mean + cfg.k_sigma_freq * s.std;
    for (size_t i = 0; i < r.size(); ++i) mask.bits[i] = r[i] > thr ? 1 : 0;
    return mask;
}

CodeMap lbp_codes(const GrayFrame& frame) {
    if (frame.height < 3 || frame.width < 3) throw invalid_input("lbp_codes: frame must be >= 3x3");
    // clockwise from top-left
    static const int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
    static const int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
    CodeMap out;
    out.height = frame.height;
    out.width = frame.width;
    out.codes.assign(frame.size(), 0);
#pragma omp parallel for schedule(static)
    for (int y = 1; y < frame.height - 1; ++y) {
        for (int x = 1; x < frame.width - 1; ++x) {
            const double c = frame.at(y, x);
            uint8_t code = 0;
            for (int k = 0; k < 8; ++k)
                if (frame.at(y + dy[k], x + dx[k]) >= c) code |= static_cast<uint8_t>(1u << k);
            out.codes[static_cast<size_t>(y) * frame.width + x] = code;
        }
    }
    return out;
}

BinaryMask texture_mask(const GrayFrame& frame, const AnalyzerConfig& cfg,
                        std::vector<Diagnostic>* diags) {
    check_analyzer_input(frame);
    const CodeMap codes = lbp_codes(frame);
    const int h = frame.height, w = frame.width;
    const auto tiles = tiles_for(h, w, cfg.block);

    BinaryMask mask(h, w, 0);
    if (tiles.size() < 4) {
        if (diags)
            diags->push_back({frame.t, "texture", "fewer than 4 tiles; statistics unreliable, mask zeroed"});
        return mask;
    }

    auto interior = [&](int y, int x) { return y >= 1 && y < h - 1 && x >= 1 && x < w - 1; };

    std::array<double, 256> global{};
    size_t global_n = 0;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            ++global[codes.at(y, x)];
            ++global_n;
        }
    for (double& g : global) g /= static_cast<double>(global_n);

    constexpr double kEps = 1e-10;
    std::vector<double> dist(tiles.size(), -1.0);  // -1 marks excluded tiles
    std::vector<double> valid;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(tiles.size()); ++i) {
        const Tile& tl = tiles[i];
        std::array<double, 256> hist{};
        size_t n = 0;
        for (int y = tl.y0; y < tl.y1; ++y)
            for (int x = tl.x0; x < tl.x1; ++x)
                if (interior(y, x)) {
                    ++hist[codes.at(y, x)];
                    ++n;
                }
        if (n == 0) continue;  // border sliver with no defined codes
        double d = 0.0;
        for (int b = 0; b < 256; ++b) {
            const double hb = hist[b] / static_cast<double>(n);
            const double diff = hb - global[b];
            d += diff * diff / (hb + global[b] + kEps);
        }
        dist[i] = d;
    }
    for (double d : dist)
        if (d >= 0.0) valid.push_back(d);
    if (valid.size() < 4) {
        if (diags)
            diags->push_back({frame.t, "texture", "fewer than 4 usable tiles; mask zeroed"});
        return mask;
    }

    const MeanStd s = mean_std(valid);
    const double thr = s.mean + cfg.k_sigma_tex * s.std;
    for (size_t i = 0; i < tiles.size(); ++i) {
        if (dist[i] < 0.0 || !(dist[i] > thr)) continue;
        for (int y = tiles[i].y0; y < tiles[i].y1; ++y)
            for (int x = tiles[i].x0; x < tiles[i].x1; ++x)
                mask.at(y, x) = 1;
    }
    return mask;
}

BinaryMask canny(const GrayFrame& frame, const AnalyzerConfig& cfg) {
    check_analyzer_input(frame);
    const int h = frame.height, w = frame.width;
    const GrayFrame blurred = gaussian_blur(frame, cfg.canny_sigma);
    std::vector<double> gx, gy;
    sobel(blurred, gx, gy);

    std::vector<double> mag(static_cast<size_t>(h) * w, 0.0);
    double max_mag = 0.0;
    for (size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::hypot(gx[i], gy[i]);
        max_mag = std::max(max_mag, mag[i]);
    }
    BinaryMask edges(h, w, 0);
    if (max_mag <= 0.0) return edges;

    // Non-maximum suppression over 4 quantized directions. Ties along the
    // positive direction are kept, ties along the negative suppressed, so a
    // symmetric two-pixel ridge thins to one pixel.
    std::vector<double> nms(mag.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (mag[i] == 0.0) continue;
            double ang = std::atan2(gy[i], gx[i]) * 180.0 / 3.14159265358979323846;
            if (ang < 0) ang += 180.0;
            int dy_ = 0, dx_ = 0;
            if (ang < 22.5 || ang >= 157.5) { dy_ = 0; dx_ = 1; }
            else if (ang < 67.5) { dy_ = 1; dx_ = 1; }
            else if (ang < 112.5) { dy_ = 1; dx_ = 0; }
            else { dy_ = 1; dx_ = -1; }
            auto mag_at = [&](int yy, int xx) -> double {
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
                return mag[static_cast<size_t>(yy) * w + xx];
            };
            const double plus = mag_at(y + dy_, x + dx_);
            const double minus = mag_at(y - dy_, x - dx_);
            if (mag[i] >= plus && mag[i] > minus) nms[i] = mag[i];
        }
    }

    // Hysteresis: seed at strong pixels, grow through weak ones, 8-connected.
    const double hi = cfg.canny_hi * max_mag;
    const double lo = cfg.canny_lo * max_mag;
    std::vector<size_t> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (nms[i] >= hi && !edges.bits[i]) {
                edges.bits[i] = 1;
                stack.push_back(i);
                while (!stack.empty()) {
                    const size_t j = stack.back();
                    stack.pop_back();
                    const int jy = static_cast<int>(j) / w, jx = static_cast<int>(j) % w;
                    for (int ddy = -1; ddy <= 1; ++ddy)
                        for (int ddx = -1; ddx <= 1; ++ddx) {
                            const int ny = jy + ddy, nx = jx + ddx;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                            const size_t k = static_cast<size_t>(ny) * w + nx;
                            if (!edges.bits[k] && nms[k] >= lo) {
                                edges.bits[k] = 1;
                                stack.push_back(k);
                            }
                        }
                }
            }
        }
    return edges;
}

BinaryMask edge_mask(const GrayFrame& frame, const AnalyzerConfig& cfg,
                     std::vector<Diagnostic>* diags) {
    check_analyzer_input(frame);
    const BinaryMask edges = canny(frame, cfg);
    const int h = frame.height, w = frame.width;
    const auto tiles = tiles_for(h, w, cfg.block);

    BinaryMask mask(h, w, 0);
    if (tiles.size() < 4) {
        if (diags)
            diags->push_back({frame.t, "edge", "fewer than 4 tiles; statistics unreliable, mask zeroed"});
        return mask;
    }

    std::vector<double> density(tiles.size(), 0.0);
    for (size_t i = 0; i < tiles.size(); ++i) {
        const Tile& tl = tiles[i];
        size_t cnt = 0;
        for (int y = tl.y0; y < tl.y1; ++y)
            for (int x = tl.x0; x < tl.x1; ++x) cnt += edges.at(y, x);
        density[i] = static_cast<double>(cnt) /
                     (static_cast<double>(tl.y1 - tl.y0) * (tl.x1 - tl.x0));
    }
    const MeanStd s = mean_std(density);
    if (s.std < 1e-15) return mask;
    for (size_t i = 0; i < tiles.size(); ++i) {
        if (!(std::abs(density[i] - s.mean) > cfg.k_sigma_edge * s.std)) continue;
        for (int y = tiles[i].y0; y < tiles[i].y1; ++y)
            for (int x = tiles[i].x0; x < tiles[i].x1; ++x)
                mask.at(y, x) = 1;
    }
    return mask;
}

FlowField dense_flow(const GrayFrame& f_t, const GrayFrame& f_t1, const AnalyzerConfig& cfg) {
    if (!f_t.same_shape(f_t1)) throw invalid_input("dense_flow: frame dimensions differ");
    const int h = f_t.height, w = f_t.width;

    // Spatial gradients from the temporal mean (symmetric in the two frames),
    // central differences with replicate borders; I_t = next - prev.
    std::vector<double> ix(static_cast<size_t>(h) * w), iy(ix.size()), it(ix.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            auto mean_at = [&](int yy, int xx) {
                yy = clampi(yy, 0, h - 1);
                xx = clampi(xx, 0, w - 1);
                return 0.5 * (f_t.at(yy, xx) + f_t1.at(yy, xx));
            };
            const size_t i = static_cast<size_t>(y) * w + x;
            ix[i] = 0.5 * (mean_at(y, x + 1) - mean_at(y, x - 1));
            iy[i] = 0.5 * (mean_at(y + 1, x) - mean_at(y - 1, x));
            it[i] = f_t1.at(y, x) - f_t.at(y, x);
        }
    }

    FlowField flow(h, w);
    FlowField next(h, w);
    const double alpha2 = cfg.flow_alpha * cfg.flow_alpha;

    for (int iter = 0; iter < cfg.flow_iters; ++iter) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                // classic Horn-Schunck 8-neighbor weighted average
                auto avg = [&](const std::vector<double>& f) {
                    auto at = [&](int yy, int xx) {
                        return f[static_cast<size_t>(clampi(yy, 0, h - 1)) * w + clampi(xx, 0, w - 1)];
                    };
                    return (at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1)) / 6.0 +
                           (at(y - 1, x - 1) + at(y - 1, x + 1) + at(y + 1, x - 1) + at(y + 1, x + 1)) / 12.0;
                };
                const size_t i = static_cast<size_t>(y) * w + x;
                const double ubar = avg(flow.u);
                const double vbar = avg(flow.v);
                const double coef = (ix[i] * ubar + iy[i] * vbar + it[i]) /
                                    (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
                next.u[i] = ubar - ix[i] * coef;
                next.v[i] = vbar - iy[i] * coef;
            }
        }
        std::swap(flow.u, next.u);
        std::swap(flow.v, next.v);
    }
    return flow;
}

BinaryMask temporal_mask(const FlowField& flow, const AnalyzerConfig& cfg) {
    const int h = flow.height, w = flow.width;
    std::vector<double> dev(static_cast<size_t>(h) * w, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        std::vector<double> wu, wv;
        wu.reserve(9);
        wv.reserve(9);
        for (int x = 0; x < w; ++x) {
            wu.clear();
            wv.clear();
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    wu.push_back(flow.u_at(yy, xx));
                    wv.push_back(flow.v_at(yy, xx));
                }
            const double mu = median_of(wu);
            const double mv = median_of(wv);
            dev[static_cast<size_t>(y) * w + x] =
                std::hypot(flow.u_at(y, x) - mu, flow.v_at(y, x) - mv);
        }
    }
    const MeanStd s = mean_std(dev);
    BinaryMask mask(h, w, 0);
    const double thr = s.mean + cfg.k_sigma_temp * s.std;
    for (size_t i = 0; i < dev.size(); ++i) mask.bits[i] = dev[i] > thr ? 1 : 0;
    return mask;
}

namespace {

BinaryMask run_or_zero(const char* stage, int t, std::vector<Diagnostic>& diags,
                       const GrayFrame& shape, const std::function<BinaryMask()>& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        diags.push_back({t, stage, e.what()});
        return BinaryMask(shape.height, shape.width, 0);
    }
}

}  // namespace

BundleResult build_bundle(const FrameSequence& seq, const AnalyzerConfig& cfg) {
    cfg.validate();
    if (seq.empty()) throw invalid_input("build_bundle: empty sequence");
    seq.validate();
    for (const auto& f : seq.frames) check_analyzer_input(f);

    const int T = static_cast<int>(seq.size());
    BundleResult result;
    result.bundles.resize(T);

    // Flow pairs (t, t+1) are independent of each other.
    std::vector<FlowField> flows;
    if (T >= 2) {
        flows.resize(T - 1);
        for (int t = 0; t + 1 < T; ++t)
            flows[t] = dense_flow(seq.frames[t], seq.frames[t + 1], cfg);
    }

    const StructuringElement se(cfg.morph_side);
    for (int t = 0; t < T; ++t) {
        const GrayFrame& f = seq.frames[t];
        MaskBundle& b = result.bundles[t];
        b.t = t;
        b.freq = run_or_zero("freq", t, result.diagnostics, f, [&] { return freq_mask(f, cfg); });
        b.tex = run_or_zero("texture", t, result.diagnostics, f,
                            [&] { return texture_mask(f, cfg, &result.diagnostics); });
        b.edge = run_or_zero("edge", t, result.diagnostics, f,
                             [&] { return edge_mask(f, cfg, &result.diagnostics); });
        if (T == 1) {
            b.temp = BinaryMask(f.height, f.width, 0);
        } else {
            const FlowField& flow = flows[std::min(t, T - 2)];  // last frame reuses flow(t-1, t)
            b.temp = run_or_zero("temporal", t, result.diagnostics, f,
                                 [&] { return temporal_mask(flow, cfg); });
        }
        b.combined = mask_or({b.freq, b.tex, b.edge, b.temp});
        b.refined = refine(b.combined, se);
    }
    return result;
}

BundleResult build_bundle(const GrayFrame& frame, const AnalyzerConfig& cfg) {
    FrameSequence seq;
    GrayFrame f = frame;
    f.t = 0;
    seq.frames.push_back(std::move(f));
    return build_bundle(seq, cfg);
}

}  // namespace dymapia
