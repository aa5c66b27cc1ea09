#include "reference.hpp"

#include <cmath>

namespace dymapia::ref {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace

std::vector<std::complex<double>> naive_dft2d(const std::vector<double>& f, int h, int w) {
    std::vector<std::complex<double>> F(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
            std::complex<double> acc(0.0, 0.0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double ang = -kTwoPi * (static_cast<double>(u) * y / h +
                                                  static_cast<double>(v) * x / w);
                    acc += f[static_cast<size_t>(y) * w + x] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            F[static_cast<size_t>(u) * w + v] = acc;
        }
    }
    return F;
}

std::vector<double> naive_idft2d(const std::vector<std::complex<double>>& F, int h, int w) {
    std::vector<double> f(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::complex<double> acc(0.0, 0.0);
            for (int u = 0; u < h; ++u) {
                for (int v = 0; v < w; ++v) {
                    const double ang = kTwoPi * (static_cast<double>(u) * y / h +
                                                 static_cast<double>(v) * x / w);
                    acc += F[static_cast<size_t>(u) * w + v] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            }
            f[static_cast<size_t>(y) * w + x] = acc.real() / (static_cast<double>(h) * w);
        }
    }
    return f;
}

uint8_t lbp_code_at(const GrayFrame& f, int y, int x) {
    static const int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
    static const int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
    const double c = f.at(y, x);
    uint8_t code = 0;
    for (int k = 0; k < 8; ++k)
        if (f.at(y + dy[k], x + dx[k]) >= c) code |= static_cast<uint8_t>(1u << k);
    return code;
}

BinaryMask erode_brute(const BinaryMask& m, int se_side) {
    const int r = se_side / 2;
    BinaryMask out(m.height, m.width, 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            bool all = true;
            for (int dy = -r; dy <= r && all; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    const bool bit = ny >= 0 && ny < m.height && nx >= 0 && nx < m.width &&
                                     m.at(ny, nx) != 0;
                    if (!bit) { all = false; break; }
                }
            out.at(y, x) = all ? 1 : 0;
        }
    return out;
}

BinaryMask dilate_brute(const BinaryMask& m, int se_side) {
    const int r = se_side / 2;
    BinaryMask out(m.height, m.width, 0);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            bool any = false;
            for (int dy = -r; dy <= r && !any; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny >= 0 && ny < m.height && nx >= 0 && nx < m.width && m.at(ny, nx)) {
                        any = true;
                        break;
                    }
                }
            out.at(y, x) = any ? 1 : 0;
        }
    return out;
}

std::vector<BlockFlow> block_match(const GrayFrame& f_t, const GrayFrame& f_t1, int block, int radius) {
    std::vector<BlockFlow> out;
    for (int by = 0; by + block <= f_t.height; by += block) {
        for (int bx = 0; bx + block <= f_t.width; bx += block) {
            BlockFlow best{by, bx, 0, 0, 1e300};
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (by + dy < 0 || by + block + dy > f_t.height || bx + dx < 0 ||
                        bx + block + dx > f_t.width)
                        continue;
                    double sad = 0.0;
                    for (int y = 0; y < block; ++y)
                        for (int x = 0; x < block; ++x)
                            sad += std::abs(f_t.at(by + y, bx + x) -
                                            f_t1.at(by + y + dy, bx + x + dx));
                    if (sad < best.sad) best = {by, bx, dy, dx, sad};
                }
            }
            out.push_back(best);
        }
    }
    return out;
}

std::vector<double> conv2d_naive(const std::vector<double>& in, int in_c, int h, int w,
                                 const std::vector<double>& weight, int out_c, int k, int pad,
                                 const std::vector<double>& bias) {
    std::vector<double> out(static_cast<size_t>(out_c) * h * w, 0.0);
    for (int oc = 0; oc < out_c; ++oc)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = bias.empty() ? 0.0 : bias[oc];
                for (int ic = 0; ic < in_c; ++ic)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int sy = y + ky - pad, sx = x + kx - pad;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                            acc += weight[((static_cast<size_t>(oc) * in_c + ic) * k + ky) * k + kx] *
                                   in[(static_cast<size_t>(ic) * h + sy) * w + sx];
                        }
                out[(static_cast<size_t>(oc) * h + y) * w + x] = acc;
            }
    return out;
}

std::vector<double> depthwise_naive(const std::vector<double>& in, int c, int h, int w,
                                    const std::vector<double>& kernels) {
    std::vector<double> out(static_cast<size_t>(c) * h * w, 0.0);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sy = y + ky - 1, sx = x + kx - 1;
                        if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                        acc += kernels[(static_cast<size_t>(ch) * 3 + ky) * 3 + kx] *
                               in[(static_cast<size_t>(ch) * h + sy) * w + sx];
                    }
                out[(static_cast<size_t>(ch) * h + y) * w + x] = acc;
            }
    return out;
}

std::vector<double> pointwise_naive(const std::vector<double>& in, int in_c, int h, int w,
                                    const std::vector<double>& mix, int out_c,
                                    const std::vector<double>& bias) {
    std::vector<double> out(static_cast<size_t>(out_c) * h * w, 0.0);
    for (int oc = 0; oc < out_c; ++oc)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = bias.empty() ? 0.0 : bias[oc];
                for (int ic = 0; ic < in_c; ++ic)
                    acc += mix[static_cast<size_t>(oc) * in_c + ic] *
                           in[(static_cast<size_t>(ic) * h + y) * w + x];
                out[(static_cast<size_t>(oc) * h + y) * w + x] = acc;
            }
    return out;
}

void sobel_serial(const GrayFrame& f, std::vector<double>& gx, std::vector<double>& gy) {
    const int h = f.height, w = f.width;
    gx.assign(static_cast<size_t>(h) * w, 0.0);
    gy.assign(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
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

FlowField dense_flow_serial(const GrayFrame& f_t, const GrayFrame& f_t1, double alpha, int iters) {
    const int h = f_t.height, w = f_t.width;
    std::vector<double> ix(static_cast<size_t>(h) * w), iy(ix.size()), it(ix.size());
    for (int y = 0; y < h; ++y)
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

    FlowField flow(h, w), next(h, w);
    const double alpha2 = alpha * alpha;
    for (int iter = 0; iter < iters; ++iter) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
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
        std::swap(flow.u, next.u);
        std::swap(flow.v, next.v);
    }
    return flow;
}

}  // namespace dymapia::ref
