#include "dymapia/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dymapia/imgcore.hpp"
#include "dymapia/preprocess.hpp"

namespace dymapia {

namespace {

constexpr double kBnEps = 1e-8;

void visit_vec(std::vector<double>& v, const std::function<void(double&)>& fn) {
    for (double& x : v) fn(x);
}

// ------------------------------------------------------------- conv kernels

// 3x3 conv, stride 1, pad 1, single input channel (the stem).
Tensor4 conv3x3_1in(const Tensor4& x, const std::vector<double>& weight,
                    const std::vector<double>& bias, int out_c) {
    Tensor4 out(x.b, out_c, x.h, x.w);
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < x.b; ++bi) {
        for (int oc = 0; oc < out_c; ++oc) {
            const double* k = &weight[static_cast<size_t>(oc) * 9];
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    double acc = bias[oc];
                    for (int ky = 0; ky < 3; ++ky) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= x.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sx = xx + kx - 1;
                            if (sx < 0 || sx >= x.w) continue;
                            acc += k[ky * 3 + kx] * x.at(bi, 0, sy, sx);
                        }
                    }
                    out.at(bi, oc, y, xx) = acc;
                }
            }
        }
    }
    return out;
}

// Depthwise 3x3, pad 1: one kernel per channel.
Tensor4 depthwise3x3(const Tensor4& x, const std::vector<double>& kernels) {
    Tensor4 out(x.b, x.c, x.h, x.w);
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < x.b; ++bi) {
        for (int ci = 0; ci < x.c; ++ci) {
            const double* k = &kernels[static_cast<size_t>(ci) * 9];
            for (int y = 0; y < x.h; ++y) {
                for (int xx = 0; xx < x.w; ++xx) {
                    double acc = 0.0;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= x.h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sx = xx + kx - 1;
                            if (sx < 0 || sx >= x.w) continue;
                            acc += k[ky * 3 + kx] * x.at(bi, ci, sy, sx);
                        }
                    }
                    out.at(bi, ci, y, xx) = acc;
                }
            }
        }
    }
    return out;
}

// 1x1 channel mix plus bias.
Tensor4 pointwise1x1(const Tensor4& x, const std::vector<double>& mix,
                     const std::vector<double>& bias, int out_c) {
    Tensor4 out(x.b, out_c, x.h, x.w);
    const int hw = x.h * x.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < x.b; ++bi) {
        for (int oc = 0; oc < out_c; ++oc) {
            double* o = out.plane(bi, oc);
            for (int i = 0; i < hw; ++i) o[i] = bias[oc];
            for (int ic = 0; ic < x.c; ++ic) {
                const double wgt = mix[static_cast<size_t>(oc) * x.c + ic];
                const double* src = x.plane(bi, ic);
                for (int i = 0; i < hw; ++i) o[i] += wgt * src[i];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- BN / pool

// Per-channel normalization. Train mode uses population statistics over
// (B,H,W); each channel's reduction is serial, so results do not depend on
// the thread count.
Tensor4 bn_forward(const Tensor4& x, const BatchNorm& bn, Mode mode, StageCache* cache,
                   BatchNorm* update_running, double bn_momentum) {
    Tensor4 out(x.b, x.c, x.h, x.w);
    Tensor4 xhat(x.b, x.c, x.h, x.w);
    std::vector<double> inv_std(x.c, 0.0);
    const int hw = x.h * x.w;
    const double n = static_cast<double>(x.b) * hw;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < x.c; ++ci) {
        double mean, var;
        if (mode == Mode::Train) {
            double s = 0.0;
            for (int bi = 0; bi < x.b; ++bi) {
                const double* src = x.plane(bi, ci);
                for (int i = 0; i < hw; ++i) s += src[i];
            }
            mean = s / n;
            double v = 0.0;
            for (int bi = 0; bi < x.b; ++bi) {
                const double* src = x.plane(bi, ci);
                for (int i = 0; i < hw; ++i) v += (src[i] - mean) * (src[i] - mean);
            }
            var = v / n;
            if (update_running) {
                update_running->run_mean[ci] = (1.0 - bn_momentum) * update_running->run_mean[ci] +
                                               bn_momentum * mean;
                update_running->run_var[ci] = (1.0 - bn_momentum) * update_running->run_var[ci] +
                                              bn_momentum * var;
            }
        } else {
            mean = bn.run_mean[ci];
            var = bn.run_var[ci];
        }
        const double istd = 1.0 / std::sqrt(var + kBnEps);
        inv_std[ci] = istd;
        const double g = bn.gamma[ci], b = bn.beta[ci];
        for (int bi = 0; bi < x.b; ++bi) {
            const double* src = x.plane(bi, ci);
            double* xh = xhat.plane(bi, ci);
            double* o = out.plane(bi, ci);
            for (int i = 0; i < hw; ++i) {
                xh[i] = (src[i] - mean) * istd;
                o[i] = g * xh[i] + b;
            }
        }
    }
    if (cache) {
        cache->bn_xhat = std::move(xhat);
        cache->bn_inv_std = std::move(inv_std);
    }
    return out;
}

Tensor4 relu(const Tensor4& x) {
    Tensor4 out = x;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(out.size()); ++i)
        if (out.data[i] < 0.0) out.data[i] = 0.0;
    return out;
}

// 2x2 max pool, stride 2; ties go to the first index in row-major scan order.
Tensor4 maxpool2x2(const Tensor4& x, std::vector<int>* argmax) {
    Tensor4 out(x.b, x.c, x.h / 2, x.w / 2);
    if (argmax) argmax->assign(out.size(), 0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < x.b; ++bi) {
        for (int ci = 0; ci < x.c; ++ci) {
            for (int y = 0; y < out.h; ++y) {
                for (int xx = 0; xx < out.w; ++xx) {
                    double best = -1e300;
                    int best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const int sy = 2 * y + dy, sx = 2 * xx + dx;
                            const double v = x.at(bi, ci, sy, sx);
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<int>(
                                    ((static_cast<size_t>(bi) * x.c + ci) * x.h + sy) * x.w + sx);
                            }
                        }
                    }
                    out.at(bi, ci, y, xx) = best;
                    if (argmax)
                        (*argmax)[((static_cast<size_t>(bi) * out.c + ci) * out.h + y) * out.w + xx] =
                            best_idx;
                }
            }
        }
    }
    return out;
}

struct BnGrad {
    std::vector<double> dgamma, dbeta;
    Tensor4 dx;
};

// Train-mode batch-norm backward, through the batch statistics.
BnGrad bn_backward(const Tensor4& dy, const StageCache& cache, const BatchNorm& bn) {
    const Tensor4& xhat = cache.bn_xhat;
    BnGrad g;
    g.dgamma.assign(dy.c, 0.0);
    g.dbeta.assign(dy.c, 0.0);
    g.dx = Tensor4(dy.b, dy.c, dy.h, dy.w);
    const int hw = dy.h * dy.w;
    const double n = static_cast<double>(dy.b) * hw;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < dy.c; ++ci) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int bi = 0; bi < dy.b; ++bi) {
            const double* d = dy.plane(bi, ci);
            const double* xh = xhat.plane(bi, ci);
            for (int i = 0; i < hw; ++i) {
                sum_dy += d[i];
                sum_dy_xhat += d[i] * xh[i];
            }
        }
        g.dbeta[ci] = sum_dy;
        g.dgamma[ci] = sum_dy_xhat;
        const double coef = bn.gamma[ci] * cache.bn_inv_std[ci] / n;
        for (int bi = 0; bi < dy.b; ++bi) {
            const double* d = dy.plane(bi, ci);
            const double* xh = xhat.plane(bi, ci);
            double* dx = g.dx.plane(bi, ci);
            for (int i = 0; i < hw; ++i)
                dx[i] = coef * (n * d[i] - sum_dy - xh[i] * sum_dy_xhat);
        }
    }
    return g;
}

Tensor4 relu_backward(const Tensor4& dy, const Tensor4& relu_out) {
    Tensor4 dx = dy;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(dx.size()); ++i)
        if (relu_out.data[i] <= 0.0) dx.data[i] = 0.0;
    return dx;
}

Tensor4 maxpool_backward(const Tensor4& dy, const std::vector<int>& argmax,
                         int in_c, int in_h, int in_w) {
    Tensor4 dx(dy.b, in_c, in_h, in_w);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(dy.size()); ++i)
        dx.data[argmax[i]] += dy.data[i];  // disjoint windows, no collisions
    return dx;
}

}  // namespace

// ----------------------------------------------------------------- NetParams

NetParams NetParams::init(const NetConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto fill_normal = [&](std::vector<double>& v, size_t n, double std) {
        v.resize(n);
        for (double& x : v) x = rng.normal() * std;
    };
    NetParams p;
    p.cfg = cfg;
    fill_normal(p.stem.weight, static_cast<size_t>(cfg.stem_channels) * 9, std::sqrt(2.0 / 9.0));
    p.stem.bias.assign(cfg.stem_channels, 0.0);
    p.stem.bn.resize(cfg.stem_channels);
    int in_c = cfg.stem_channels;
    for (int l = 0; l < 3; ++l) {
        const int out_c = cfg.block_channels[l];
        fill_normal(p.blocks[l].depthwise, static_cast<size_t>(in_c) * 9, std::sqrt(2.0 / 9.0));
        fill_normal(p.blocks[l].pointwise, static_cast<size_t>(out_c) * in_c,
                    std::sqrt(2.0 / in_c));
        p.blocks[l].bias.assign(out_c, 0.0);
        p.blocks[l].bn.resize(out_c);
        in_c = out_c;
    }
    const int c3 = cfg.block_channels[2];
    if (cfg.hidden > 0) {
        fill_normal(p.head.w1, static_cast<size_t>(cfg.hidden) * c3, std::sqrt(2.0 / c3));
        p.head.b1.assign(cfg.hidden, 0.0);
        fill_normal(p.head.w2, cfg.hidden, std::sqrt(2.0 / cfg.hidden));
    } else {
        fill_normal(p.head.w2, c3, std::sqrt(2.0 / c3));
    }
    p.head.b2 = 0.0;
    return p;
}

NetParams NetParams::zeros_like(const NetParams& other) {
    NetParams z = other;
    z.for_each_param([](double& x) { x = 0.0; });
    for (auto zero_stats = [&](BatchNorm& bn) {
             std::fill(bn.run_mean.begin(), bn.run_mean.end(), 0.0);
             std::fill(bn.run_var.begin(), bn.run_var.end(), 0.0);
         };
         auto* bn : {&z.stem.bn, &z.blocks[0].bn, &z.blocks[1].bn, &z.blocks[2].bn})
        zero_stats(*bn);
    return z;
}

void NetParams::for_each_param(const std::function<void(double&)>& fn) {
    visit_vec(stem.weight, fn);
    visit_vec(stem.bias, fn);
    visit_vec(stem.bn.gamma, fn);
    visit_vec(stem.bn.beta, fn);
    for (auto& blk : blocks) {
        visit_vec(blk.depthwise, fn);
        visit_vec(blk.pointwise, fn);
        visit_vec(blk.bias, fn);
        visit_vec(blk.bn.gamma, fn);
        visit_vec(blk.bn.beta, fn);
    }
    visit_vec(head.w1, fn);
    visit_vec(head.b1, fn);
    visit_vec(head.w2, fn);
    fn(head.b2);
}

void NetParams::for_each_param(const std::function<void(double)>& fn) const {
    const_cast<NetParams*>(this)->for_each_param(
        std::function<void(double&)>([&](double& x) { fn(x); }));
}

void NetParams::for_each_state(const std::function<void(double&)>& fn) {
    visit_vec(stem.weight, fn);
    visit_vec(stem.bias, fn);
    visit_vec(stem.bn.gamma, fn);
    visit_vec(stem.bn.beta, fn);
    visit_vec(stem.bn.run_mean, fn);
    visit_vec(stem.bn.run_var, fn);
    for (auto& blk : blocks) {
        visit_vec(blk.depthwise, fn);
        visit_vec(blk.pointwise, fn);
        visit_vec(blk.bias, fn);
        visit_vec(blk.bn.gamma, fn);
        visit_vec(blk.bn.beta, fn);
        visit_vec(blk.bn.run_mean, fn);
        visit_vec(blk.bn.run_var, fn);
    }
    visit_vec(head.w1, fn);
    visit_vec(head.b1, fn);
    visit_vec(head.w2, fn);
    fn(head.b2);
}

size_t NetParams::trainable_count() const {
    size_t n = 0;
    for_each_param([&](double) { ++n; });
    return n;
}

size_t param_count(const NetConfig& cfg) {
    cfg.validate();
    return NetParams::init(cfg, 0).trainable_count();
}

// ------------------------------------------------------------------ forward

Tensor4 stem_forward(const Tensor4& x, const NetParams& p, Mode mode, StageCache* cache) {
    if (x.c != 1) throw config_error("stem_forward: input must have 1 channel");
    Tensor4 conv = conv3x3_1in(x, p.stem.weight, p.stem.bias, p.cfg.stem_channels);
    if (cache) {
        cache->input = x;
        cache->conv_out = conv;
    }
    Tensor4 bn = bn_forward(conv, p.stem.bn, mode, cache, nullptr, 0.0);
    Tensor4 act = relu(bn);
    if (cache) cache->relu_out = act;
    Tensor4 out = p.cfg.stem_pool ? maxpool2x2(act, cache ? &cache->pool_argmax : nullptr)
                                  : act;
    if (cache) cache->out = out;
    return out;
}

Tensor4 sep_block_forward(const Tensor4& x, const NetParams& p, int block_index, Mode mode,
                          StageCache* cache) {
    const SepBlock& blk = p.blocks[block_index];
    const int in_c = block_index == 0 ? p.cfg.stem_channels : p.cfg.block_channels[block_index - 1];
    if (x.c != in_c) throw config_error("sep_block_forward: channel count mismatch");
    Tensor4 dw = depthwise3x3(x, blk.depthwise);
    Tensor4 pw = pointwise1x1(dw, blk.pointwise, blk.bias, p.cfg.block_channels[block_index]);
    if (cache) {
        cache->input = x;
        cache->depthwise_out = dw;
        cache->conv_out = pw;
    }
    Tensor4 bn = bn_forward(pw, blk.bn, mode, cache, nullptr, 0.0);
    Tensor4 act = relu(bn);
    if (cache) cache->relu_out = act;
    Tensor4 out = maxpool2x2(act, cache ? &cache->pool_argmax : nullptr);
    if (cache) cache->out = out;
    return out;
}

std::vector<double> gap(const Tensor4& z) {
    std::vector<double> f(static_cast<size_t>(z.b) * z.c, 0.0);
    const int hw = z.h * z.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < z.b; ++bi)
        for (int ci = 0; ci < z.c; ++ci) {
            const double* src = z.plane(bi, ci);
            double s = 0.0;
            for (int i = 0; i < hw; ++i) s += src[i];
            f[static_cast<size_t>(bi) * z.c + ci] = s / hw;
        }
    return f;
}

std::vector<double> head_forward(const std::vector<double>& features, const NetParams& p,
                                 Mode mode, ForwardCache* cache, double dropout_rate,
                                 Rng* dropout_rng) {
    const int c3 = p.cfg.block_channels[2];
    const int batch = static_cast<int>(features.size()) / c3;
    const int hidden = p.cfg.hidden;
    std::vector<double> logits(batch, 0.0);

    if (hidden > 0) {
        std::vector<double> h_pre(static_cast<size_t>(batch) * hidden, 0.0);
        std::vector<double> h_post(h_pre.size(), 0.0);
        std::vector<uint8_t> keep_mask(h_pre.size(), 1);
        const bool drop = mode == Mode::Train && dropout_rate > 0.0 && dropout_rng;
        if (drop)
            for (auto& k : keep_mask) k = dropout_rng->uniform() >= dropout_rate ? 1 : 0;
        const double keep = drop ? 1.0 - dropout_rate : 1.0;
#pragma omp parallel for collapse(2) schedule(static)
        for (int bi = 0; bi < batch; ++bi) {
            for (int j = 0; j < hidden; ++j) {
                double acc = p.head.b1[j];
                const double* row = &p.head.w1[static_cast<size_t>(j) * c3];
                const double* f = &features[static_cast<size_t>(bi) * c3];
                for (int k = 0; k < c3; ++k) acc += row[k] * f[k];
                const size_t idx = static_cast<size_t>(bi) * hidden + j;
                h_pre[idx] = acc;
                double a = acc > 0.0 ? acc : 0.0;
                if (drop) a = keep_mask[idx] ? a / keep : 0.0;
                h_post[idx] = a;
            }
        }
        for (int bi = 0; bi < batch; ++bi) {
            double acc = p.head.b2;
            for (int j = 0; j < hidden; ++j)
                acc += p.head.w2[j] * h_post[static_cast<size_t>(bi) * hidden + j];
            logits[bi] = acc;
        }
        if (cache) {
            cache->hidden_pre = std::move(h_pre);
            cache->hidden_post = std::move(h_post);
            cache->dropout_mask = std::move(keep_mask);
            cache->dropout_keep = keep;
        }
    } else {
        for (int bi = 0; bi < batch; ++bi) {
            double acc = p.head.b2;
            const double* f = &features[static_cast<size_t>(bi) * c3];
            for (int k = 0; k < c3; ++k) acc += p.head.w2[k] * f[k];
            logits[bi] = acc;
        }
    }
    if (cache) cache->logits = logits;
    return logits;
}

std::vector<double> forward(NetParams& p, const Tensor4& x, Mode mode, ForwardCache* cache,
                            bool update_running, double dropout_rate, Rng* dropout_rng) {
    if (x.h != p.cfg.input_side || x.w != p.cfg.input_side || x.c != 1)
        throw config_error("forward: input must be B x 1 x S x S with S = input_side");

    // Stage pipeline with optional running-stat updates (train only).
    StageCache local_stem, local_blocks[3];
    StageCache* cs = cache ? &cache->stem : &local_stem;

    Tensor4 conv = conv3x3_1in(x, p.stem.weight, p.stem.bias, p.cfg.stem_channels);
    cs->input = x;
    cs->conv_out = conv;
    Tensor4 bn = bn_forward(conv, p.stem.bn, mode, cs,
                            update_running && mode == Mode::Train ? &p.stem.bn : nullptr, 0.1);
    Tensor4 act = relu(bn);
    cs->relu_out = act;
    Tensor4 z = p.cfg.stem_pool ? maxpool2x2(act, &cs->pool_argmax) : act;
    cs->out = z;

    for (int l = 0; l < 3; ++l) {
        StageCache* cb = cache ? &cache->blocks[l] : &local_blocks[l];
        const SepBlock& blk = p.blocks[l];
        Tensor4 dw = depthwise3x3(z, blk.depthwise);
        Tensor4 pw = pointwise1x1(dw, blk.pointwise, blk.bias, p.cfg.block_channels[l]);
        cb->input = std::move(z);
        cb->depthwise_out = std::move(dw);
        cb->conv_out = pw;
        Tensor4 bnb = bn_forward(pw, blk.bn, mode, cb,
                                 update_running && mode == Mode::Train ? &p.blocks[l].bn : nullptr,
                                 0.1);
        Tensor4 actb = relu(bnb);
        cb->relu_out = actb;
        z = maxpool2x2(actb, &cb->pool_argmax);
        cb->out = z;
    }

    std::vector<double> features = gap(z);
    if (cache) cache->gap = features;
    std::vector<double> logits = head_forward(features, p, mode, cache, dropout_rate, dropout_rng);

    std::vector<double> probs(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    if (cache) cache->probs = probs;
    return probs;
}

double bce_loss(const std::vector<double>& probs, const std::vector<int>& labels) {
    if (probs.size() != labels.size() || probs.empty())
        throw invalid_input("bce_loss: probs and labels must be non-empty and equal-sized");
    constexpr double eps = 1e-12;
    double loss = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], eps, 1.0 - eps);
        loss += labels[i] ? std::log(p) : std::log(1.0 - p);
    }
    return -loss / static_cast<double>(probs.size());
}

// ----------------------------------------------------------------- backward

NetParams backward(const NetParams& p, const ForwardCache& cache, const std::vector<int>& labels) {
    const int batch = static_cast<int>(labels.size());
    const int c3 = p.cfg.block_channels[2];
    NetParams g = NetParams::zeros_like(p);

    // d(mean BCE)/d(logit) for the fused sigmoid+BCE form.
    std::vector<double> dlogit(batch);
    for (int bi = 0; bi < batch; ++bi)
        dlogit[bi] = (cache.probs[bi] - labels[bi]) / batch;

    // Head.
    std::vector<double> dfeat(static_cast<size_t>(batch) * c3, 0.0);
    if (p.cfg.hidden > 0) {
        const int hidden = p.cfg.hidden;
        std::vector<double> dh_pre(static_cast<size_t>(batch) * hidden, 0.0);
        for (int bi = 0; bi < batch; ++bi) {
            g.head.b2 += dlogit[bi];
            for (int j = 0; j < hidden; ++j) {
                const size_t idx = static_cast<size_t>(bi) * hidden + j;
                g.head.w2[j] += dlogit[bi] * cache.hidden_post[idx];
                double d = dlogit[bi] * p.head.w2[j];
                if (!cache.dropout_mask.empty())
                    d = cache.dropout_mask[idx] ? d / cache.dropout_keep : 0.0;
                if (cache.hidden_pre[idx] <= 0.0) d = 0.0;
                dh_pre[idx] = d;
            }
        }
#pragma omp parallel for schedule(static)
        for (int j = 0; j < hidden; ++j) {
            double db1 = 0.0;
            double* wrow = &g.head.w1[static_cast<size_t>(j) * c3];
            for (int bi = 0; bi < batch; ++bi) {
                const double d = dh_pre[static_cast<size_t>(bi) * hidden + j];
                db1 += d;
                const double* f = &cache.gap[static_cast<size_t>(bi) * c3];
                for (int k = 0; k < c3; ++k) wrow[k] += d * f[k];
            }
            g.head.b1[j] = db1;
        }
#pragma omp parallel for collapse(2) schedule(static)
        for (int bi = 0; bi < batch; ++bi)
            for (int k = 0; k < c3; ++k) {
                double acc = 0.0;
                for (int j = 0; j < hidden; ++j)
                    acc += p.head.w1[static_cast<size_t>(j) * c3 + k] *
                           dh_pre[static_cast<size_t>(bi) * hidden + j];
                dfeat[static_cast<size_t>(bi) * c3 + k] = acc;
            }
    } else {
        for (int bi = 0; bi < batch; ++bi) {
            g.head.b2 += dlogit[bi];
            const double* f = &cache.gap[static_cast<size_t>(bi) * c3];
            for (int k = 0; k < c3; ++k) {
                g.head.w2[k] += dlogit[bi] * f[k];
                dfeat[static_cast<size_t>(bi) * c3 + k] = dlogit[bi] * p.head.w2[k];
            }
        }
    }

    // GAP: gradient spreads evenly over the spatial positions.
    const Tensor4& z3 = cache.blocks[2].out;
    Tensor4 dz(z3.b, z3.c, z3.h, z3.w);
    const int hw3 = z3.h * z3.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < batch; ++bi)
        for (int ci = 0; ci < z3.c; ++ci) {
            const double d = dfeat[static_cast<size_t>(bi) * c3 + ci] / hw3;
            double* dst = dz.plane(bi, ci);
            for (int i = 0; i < hw3; ++i) dst[i] = d;
        }

    // Blocks, last to first.
    for (int l = 2; l >= 0; --l) {
        const StageCache& sc = cache.blocks[l];
        const SepBlock& blk = p.blocks[l];
        SepBlock& gblk = g.blocks[l];
        const Tensor4& relu_out = sc.relu_out;

        Tensor4 d_act = maxpool_backward(dz, sc.pool_argmax, relu_out.c, relu_out.h, relu_out.w);
        d_act = relu_backward(d_act, relu_out);
        BnGrad bng = bn_backward(d_act, sc, blk.bn);
        gblk.bn.gamma = bng.dgamma;
        gblk.bn.beta = bng.dbeta;
        const Tensor4& d_pw = bng.dx;

        const Tensor4& dw_out = sc.depthwise_out;
        const int in_c = dw_out.c, out_c = d_pw.c;
        const int hw = d_pw.h * d_pw.w;

        // pointwise weights and bias
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < out_c; ++oc) {
            double db = 0.0;
            double* prow = &gblk.pointwise[static_cast<size_t>(oc) * in_c];
            for (int bi = 0; bi < batch; ++bi) {
                const double* d = d_pw.plane(bi, oc);
                for (int i = 0; i < hw; ++i) db += d[i];
                for (int ic = 0; ic < in_c; ++ic) {
                    const double* src = dw_out.plane(bi, ic);
                    double acc = 0.0;
                    for (int i = 0; i < hw; ++i) acc += d[i] * src[i];
                    prow[ic] += acc;
                }
            }
            gblk.bias[oc] = db;
        }

        // gradient into the depthwise output
        Tensor4 d_dw(batch, in_c, d_pw.h, d_pw.w);
#pragma omp parallel for collapse(2) schedule(static)
        for (int bi = 0; bi < batch; ++bi)
            for (int ic = 0; ic < in_c; ++ic) {
                double* dst = d_dw.plane(bi, ic);
                for (int oc = 0; oc < out_c; ++oc) {
                    const double wgt = blk.pointwise[static_cast<size_t>(oc) * in_c + ic];
                    const double* d = d_pw.plane(bi, oc);
                    for (int i = 0; i < hw; ++i) dst[i] += wgt * d[i];
                }
            }

        // depthwise kernels
        const Tensor4& x_in = sc.input;
#pragma omp parallel for schedule(static)
        for (int ic = 0; ic < in_c; ++ic) {
            double* k = &gblk.depthwise[static_cast<size_t>(ic) * 9];
            for (int bi = 0; bi < batch; ++bi)
                for (int y = 0; y < d_dw.h; ++y)
                    for (int xx = 0; xx < d_dw.w; ++xx) {
                        const double d = d_dw.at(bi, ic, y, xx);
                        if (d == 0.0) continue;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = y + ky - 1;
                            if (sy < 0 || sy >= x_in.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sx = xx + kx - 1;
                                if (sx < 0 || sx >= x_in.w) continue;
                                k[ky * 3 + kx] += d * x_in.at(bi, ic, sy, sx);
                            }
                        }
                    }
        }

        // gradient into the block input (needed for the next stage down)
        Tensor4 dx(batch, in_c, x_in.h, x_in.w);
#pragma omp parallel for collapse(2) schedule(static)
        for (int bi = 0; bi < batch; ++bi)
            for (int ic = 0; ic < in_c; ++ic) {
                const double* k = &blk.depthwise[static_cast<size_t>(ic) * 9];
                for (int sy = 0; sy < x_in.h; ++sy)
                    for (int sx = 0; sx < x_in.w; ++sx) {
                        double acc = 0.0;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int y = sy - ky + 1;
                            if (y < 0 || y >= d_dw.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int xx = sx - kx + 1;
                                if (xx < 0 || xx >= d_dw.w) continue;
                                acc += k[ky * 3 + kx] * d_dw.at(bi, ic, y, xx);
                            }
                        }
                        dx.at(bi, ic, sy, sx) = acc;
                    }
            }
        dz = std::move(dx);
    }

    // Stem.
    {
        const StageCache& sc = cache.stem;
        const Tensor4& relu_out = sc.relu_out;
        Tensor4 d_act = p.cfg.stem_pool
                            ? maxpool_backward(dz, sc.pool_argmax, relu_out.c, relu_out.h, relu_out.w)
                            : std::move(dz);
        d_act = relu_backward(d_act, relu_out);
        BnGrad bng = bn_backward(d_act, sc, p.stem.bn);
        g.stem.bn.gamma = bng.dgamma;
        g.stem.bn.beta = bng.dbeta;
        const Tensor4& d_conv = bng.dx;
        const Tensor4& x_in = sc.input;
        const int hw = d_conv.h * d_conv.w;
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < d_conv.c; ++oc) {
            double db = 0.0;
            double* k = &g.stem.weight[static_cast<size_t>(oc) * 9];
            for (int bi = 0; bi < batch; ++bi) {
                const double* d = d_conv.plane(bi, oc);
                for (int i = 0; i < hw; ++i) db += d[i];
                for (int y = 0; y < d_conv.h; ++y)
                    for (int xx = 0; xx < d_conv.w; ++xx) {
                        const double dv = d_conv.at(bi, oc, y, xx);
                        if (dv == 0.0) continue;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int sy = y + ky - 1;
                            if (sy < 0 || sy >= x_in.h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sx = xx + kx - 1;
                                if (sx < 0 || sx >= x_in.w) continue;
                                k[ky * 3 + kx] += dv * x_in.at(bi, 0, sy, sx);
                            }
                        }
                    }
            }
            g.stem.bias[oc] = db;
        }
    }

    // Guard against numerical blowups before they reach the optimizer.
    bool finite = true;
    g.for_each_param([&](double v) {
        if (!std::isfinite(v)) finite = false;
    });
    if (!finite) throw invalid_input("backward: non-finite gradient encountered");
    return g;
}

// ----------------------------------------------------------------- training

void sgd_step(NetParams& params, const NetParams& grads, SgdState& state, const TrainConfig& cfg) {
    std::vector<double*> pp, vp;
    std::vector<double> gv;
    params.for_each_param([&](double& x) { pp.push_back(&x); });
    state.velocity.for_each_param([&](double& x) { vp.push_back(&x); });
    grads.for_each_param([&](double x) { gv.push_back(x); });
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(pp.size()); ++i) {
        double& v = *vp[i];
        double& p = *pp[i];
        v = cfg.momentum * v - cfg.lr * (gv[i] + cfg.weight_decay * p);
        p += v;
    }
}

namespace {

Tensor4 assemble_batch(const std::vector<const GrayFrame*>& frames, int side) {
    Tensor4 x(static_cast<int>(frames.size()), 1, side, side);
    for (size_t bi = 0; bi < frames.size(); ++bi) {
        const GrayFrame* f = frames[bi];
        for (int y = 0; y < side; ++y)
            for (int xx = 0; xx < side; ++xx)
                x.at(static_cast<int>(bi), 0, y, xx) = f->at(y, xx);
    }
    return x;
}

struct EvalOutcome {
    double loss = 0.0;
    double acc = 0.0;
};

EvalOutcome evaluate(NetParams& params, const std::vector<GrayFrame>& inputs,
                     const std::vector<int>& labels, int batch_size) {
    const int side = params.cfg.input_side;
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t start = 0; start < inputs.size(); start += batch_size) {
        const size_t end = std::min(inputs.size(), start + batch_size);
        std::vector<const GrayFrame*> frames;
        std::vector<int> y;
        for (size_t i = start; i < end; ++i) {
            frames.push_back(&inputs[i]);
            y.push_back(labels[i]);
        }
        Tensor4 x = assemble_batch(frames, side);
        std::vector<double> probs = forward(params, x, Mode::Eval);
        loss_sum += bce_loss(probs, y) * static_cast<double>(y.size());
        for (size_t i = 0; i < probs.size(); ++i)
            if ((probs[i] > 0.5 ? 1 : 0) == y[i]) ++correct;
    }
    EvalOutcome out;
    out.loss = loss_sum / static_cast<double>(inputs.size());
    out.acc = static_cast<double>(correct) / static_cast<double>(inputs.size());
    return out;
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set,
                  const NetConfig& net_cfg, const TrainConfig& train_cfg) {
    net_cfg.validate();
    train_cfg.validate();
    auto has_both = [](const std::vector<TrainSample>& s) {
        bool pos = false, neg = false;
        for (const auto& x : s) (x.label ? pos : neg) = true;
        return pos && neg;
    };
    if (train_set.empty() || val_set.empty() || !has_both(train_set) || !has_both(val_set))
        throw invalid_input("train: train and validation sets must both contain both classes");

    const int side = net_cfg.input_side;
    auto prepare = [&](const std::vector<TrainSample>& src, std::vector<GrayFrame>& frames,
                       std::vector<int>& labels) {
        frames.reserve(src.size());
        labels.reserve(src.size());
        for (const auto& s : src) {
            frames.push_back(s.input->height == side && s.input->width == side
                                 ? *s.input
                                 : resize_bilinear(*s.input, side, side));
            labels.push_back(s.label);
        }
    };
    std::vector<GrayFrame> train_inputs, val_inputs;
    std::vector<int> train_labels, val_labels;
    prepare(train_set, train_inputs, train_labels);
    prepare(val_set, val_inputs, val_labels);

    NetParams params = NetParams::init(net_cfg, train_cfg.seed);
    SgdState state{NetParams::zeros_like(params)};
    Rng shuffle_rng(train_cfg.seed ^ 0x51c0ffeeu);
    Rng dropout_rng(train_cfg.seed ^ 0xd509c3a5u);

    TrainResult result;
    result.best = params;
    result.best_val_acc = -1.0;

    std::vector<size_t> order(train_inputs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainConfig epoch_cfg = train_cfg;
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        if (epoch > 1) epoch_cfg.lr *= train_cfg.lr_decay;
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += train_cfg.batch) {
            const size_t end = std::min(order.size(), start + train_cfg.batch);
            std::vector<const GrayFrame*> frames;
            std::vector<int> y;
            for (size_t i = start; i < end; ++i) {
                frames.push_back(&train_inputs[order[i]]);
                y.push_back(train_labels[order[i]]);
            }
            Tensor4 x = assemble_batch(frames, side);
            ForwardCache cache;
            std::vector<double> probs =
                forward(params, x, Mode::Train, &cache, true, train_cfg.dropout, &dropout_rng);
            loss_sum += bce_loss(probs, y) * static_cast<double>(y.size());
            NetParams grads = backward(params, cache, y);
            sgd_step(params, grads, state, epoch_cfg);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(train_inputs.size());
        EvalOutcome val = evaluate(params, val_inputs, val_labels, train_cfg.batch);
        stats.val_loss = val.loss;
        stats.val_acc = val.acc;
        result.history.push_back(stats);
        if (val.acc > result.best_val_acc) {
            result.best_val_acc = val.acc;
            result.best = params;
            result.best_epoch = epoch;
        }
    }
    return result;
}

Prediction predict(const GrayFrame& frame, const BinaryMask& refined_mask, NetParams& params) {
    if (!refined_mask.same_shape(frame))
        throw invalid_input("predict: mask dimensions do not match frame");
    Prediction pred;
    pred.low_evidence = !refined_mask.any();
    GrayFrame masked = mask_apply(frame, refined_mask);
    const int side = params.cfg.input_side;
    if (masked.height != side || masked.width != side)
        masked = resize_bilinear(masked, side, side);
    Tensor4 x(1, 1, side, side);
    for (int y = 0; y < side; ++y)
        for (int xx = 0; xx < side; ++xx) x.at(0, 0, y, xx) = masked.at(y, xx);
    pred.probability = forward(params, x, Mode::Eval)[0];
    pred.fake = pred.probability > 0.5;
    return pred;
}

// -------------------------------------------------------------- checkpoints

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
    for (int i = 0; i < 4; ++i) v.push_back(static_cast<uint8_t>(x >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& v, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) v.push_back(static_cast<uint8_t>(bits >> (8 * i)));
}

uint32_t get_u32(const std::vector<uint8_t>& v, size_t& pos) {
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(v.at(pos++)) << (8 * i);
    return x;
}

double get_f64(const std::vector<uint8_t>& v, size_t& pos) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(v.at(pos++)) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

constexpr char kMagic[4] = {'D', 'Y', 'X', 'C'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const NetParams& params) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<uint32_t>(params.cfg.input_side));
    put_u32(buf, static_cast<uint32_t>(params.cfg.stem_channels));
    for (int c : params.cfg.block_channels) put_u32(buf, static_cast<uint32_t>(c));
    put_u32(buf, static_cast<uint32_t>(params.cfg.hidden));
    buf.push_back(params.cfg.stem_pool ? 1 : 0);
    buf.push_back(params.cfg.preset == "paper" ? 0 : params.cfg.preset == "lite" ? 1 : 2);
    NetParams& mut = const_cast<NetParams&>(params);
    mut.for_each_state([&](double& x) { put_f64(buf, x); });
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw io_error("checkpoint write failed: " + path);
}

NetParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw io_error("bad checkpoint magic: " + path);
    size_t pos = 4;
    const uint32_t version = get_u32(buf, pos);
    if (version != kVersion) throw io_error("unsupported checkpoint version in " + path);
    NetConfig cfg;
    cfg.input_side = static_cast<int>(get_u32(buf, pos));
    cfg.stem_channels = static_cast<int>(get_u32(buf, pos));
    for (int i = 0; i < 3; ++i) cfg.block_channels[i] = static_cast<int>(get_u32(buf, pos));
    cfg.hidden = static_cast<int>(get_u32(buf, pos));
    cfg.stem_pool = buf.at(pos++) != 0;
    const uint8_t preset_id = buf.at(pos++);
    cfg.preset = preset_id == 0 ? "paper" : preset_id == 1 ? "lite" : "custom";
    NetParams params = NetParams::init(cfg, 0);
    try {
        params.for_each_state([&](double& x) { x = get_f64(buf, pos); });
    } catch (const std::out_of_range&) {
        throw io_error("truncated checkpoint: " + path);
    }
    if (pos != buf.size()) throw io_error("trailing bytes in checkpoint: " + path);
    return params;
}

}  // namespace dymapia
