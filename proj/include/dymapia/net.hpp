#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dymapia/rng.hpp"
#include "dymapia/types.hpp"

namespace dymapia {

// B x C x H x W tensor of doubles, row-major.
struct Tensor4 {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int b_, int c_, int h_, int w_, double fill = 0.0)
        : b(b_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(b_) * c_ * h_ * w_, fill) {}

    double& at(int bi, int ci, int yi, int xi) {
        return data[((static_cast<size_t>(bi) * c + ci) * h + yi) * w + xi];
    }
    double at(int bi, int ci, int yi, int xi) const {
        return data[((static_cast<size_t>(bi) * c + ci) * h + yi) * w + xi];
    }
    // Start of the (bi, ci) spatial plane.
    double* plane(int bi, int ci) {
        return &data[(static_cast<size_t>(bi) * c + ci) * h * w];
    }
    const double* plane(int bi, int ci) const {
        return &data[(static_cast<size_t>(bi) * c + ci) * h * w];
    }
    size_t size() const { return data.size(); }
};

// Architecture preset. The paper preset follows the published layout
// (stem 32, blocks 64/128/256, hidden 1024); lite shrinks channels and feeds
// GAP straight into the logit so the whole net stays under 14K parameters.
struct NetConfig {
    int input_side = 256;
    int stem_channels = 32;
    std::array<int, 3> block_channels = {64, 128, 256};
    int hidden = 1024;      // 0 = no hidden layer, GAP direct to logit
    bool stem_pool = true;  // extra 2x2 pool after the stem (256 -> 16x16 feature map)
    std::string preset = "paper";

    static NetConfig paper_preset() { return NetConfig{}; }
    static NetConfig lite_preset() {
        NetConfig c;
        c.stem_channels = 8;
        c.block_channels = {16, 24, 32};
        c.hidden = 0;
        c.preset = "lite";
        return c;
    }

    int pool_stages() const { return 3 + (stem_pool ? 1 : 0); }
    int feature_side() const { return input_side >> pool_stages(); }

    void validate() const {
        if (input_side % (1 << pool_stages()) != 0)
            throw config_error("input_side must be divisible by 2^" + std::to_string(pool_stages()));
        if (stem_channels < 1 || block_channels[0] < 1 || block_channels[1] < 1 || block_channels[2] < 1)
            throw config_error("channel counts must be >= 1");
        if (hidden < 0) throw config_error("hidden must be >= 0");
        if (feature_side() < 1) throw config_error("input_side too small for the pooling chain");
    }
};

struct BatchNorm {
    std::vector<double> gamma, beta, run_mean, run_var;

    void resize(int channels) {
        gamma.assign(channels, 1.0);
        beta.assign(channels, 0.0);
        run_mean.assign(channels, 0.0);
        run_var.assign(channels, 1.0);
    }
};

struct ConvStem {
    std::vector<double> weight;  // out_c x 1 x 3 x 3
    std::vector<double> bias;    // out_c
    BatchNorm bn;
};

struct SepBlock {
    std::vector<double> depthwise;  // in_c x 3 x 3
    std::vector<double> pointwise;  // out_c x in_c
    std::vector<double> bias;       // out_c
    BatchNorm bn;
};

struct Head {
    std::vector<double> w1;  // hidden x c3, empty when hidden == 0
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden (or c3 when hidden == 0)
    double b2 = 0.0;
};

struct NetParams {
    NetConfig cfg;
    ConvStem stem;
    std::array<SepBlock, 3> blocks;
    Head head;

    static NetParams init(const NetConfig& cfg, uint64_t seed);
    static NetParams zeros_like(const NetParams& other);

    // Trainable scalars in declaration order (BN running stats excluded).
    void for_each_param(const std::function<void(double&)>& fn);
    void for_each_param(const std::function<void(double)>& fn) const;
    // All state in declaration order, running stats included (checkpoints).
    void for_each_state(const std::function<void(double&)>& fn);

    size_t trainable_count() const;
};

// Exact trainable-parameter count for a config.
size_t param_count(const NetConfig& cfg);

enum class Mode { Train, Eval };

struct StageCache {
    Tensor4 input;          // stage input
    Tensor4 depthwise_out;  // blocks only
    Tensor4 conv_out;       // pre-BN (conv/pointwise + bias)
    Tensor4 bn_xhat;        // normalized activations
    std::vector<double> bn_inv_std;  // per channel, batch statistics
    Tensor4 relu_out;       // post-ReLU (pre-pool)
    Tensor4 out;            // stage output (post-pool where pooled)
    std::vector<int> pool_argmax;    // flat index into relu_out per pooled element
};

struct ForwardCache {
    StageCache stem;
    std::array<StageCache, 3> blocks;
    std::vector<double> gap;           // B x C3
    std::vector<double> hidden_pre;    // B x hidden
    std::vector<double> hidden_post;   // after ReLU and dropout
    std::vector<uint8_t> dropout_mask; // 1 = kept
    double dropout_keep = 1.0;
    std::vector<double> logits;        // B
    std::vector<double> probs;         // B
};

// Individual stages. Mode::Train normalizes with batch statistics; only the
// full forward() can fold them into the running estimates.
Tensor4 stem_forward(const Tensor4& x, const NetParams& p, Mode mode,
                     StageCache* cache = nullptr);
Tensor4 sep_block_forward(const Tensor4& x, const NetParams& p, int block_index, Mode mode,
                          StageCache* cache = nullptr);
std::vector<double> gap(const Tensor4& z);
std::vector<double> head_forward(const std::vector<double>& features, const NetParams& p,
                                 Mode mode, ForwardCache* cache = nullptr,
                                 double dropout_rate = 0.0, Rng* dropout_rng = nullptr);

// Full forward; returns per-sample probabilities.
std::vector<double> forward(NetParams& p, const Tensor4& x, Mode mode,
                            ForwardCache* cache = nullptr, bool update_running = false,
                            double dropout_rate = 0.0, Rng* dropout_rng = nullptr);

// L = -(1/B) sum_b [y log p + (1-y) log(1-p)], probabilities clamped to
// [1e-12, 1 - 1e-12] before the logs.
double bce_loss(const std::vector<double>& probs, const std::vector<int>& labels);

// Analytic gradients of the mean BCE w.r.t. every trainable parameter,
// differentiated through the batch statistics and the max-pool argmax
// routing (ties resolved to the first index in scan order).
NetParams backward(const NetParams& p, const ForwardCache& cache, const std::vector<int>& labels);

struct TrainConfig {
    double lr = 0.01;
    double lr_decay = 1.0;  // multiplicative per-epoch factor
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch = 32;
    int epochs = 20;
    uint64_t seed = 0;
    double bn_momentum = 0.1;
    double dropout = 0.2;

    void validate() const {
        if (lr < 0) throw config_error("lr must be >= 0");
        if (lr_decay <= 0 || lr_decay > 1.0) throw config_error("lr_decay must be in (0, 1]");
        if (batch < 1) throw config_error("batch must be >= 1");
        if (epochs < 1) throw config_error("epochs must be >= 1");
    }
};

struct SgdState {
    NetParams velocity;
};

void sgd_step(NetParams& params, const NetParams& grads, SgdState& state, const TrainConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    NetParams best;
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_acc = 0.0;
};

// A training view: masked inputs with labels; frames are resized to
// cfg.input_side if they do not already match.
struct TrainSample {
    const GrayFrame* input = nullptr;
    int label = 0;
};

// SGD with momentum over seeded shuffled mini-batches. Rejects single-class
// train or validation sets. Returns the best-validation-accuracy snapshot.
TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set,
                  const NetConfig& net_cfg, const TrainConfig& train_cfg);

struct Prediction {
    double probability = 0.0;
    bool fake = false;
    bool low_evidence = false;  // refined mask was empty
};

// Masked-input formation followed by the eval-mode forward pass; label fake
// iff probability > 0.5.
Prediction predict(const GrayFrame& frame, const BinaryMask& refined_mask, NetParams& params);

// Versioned binary checkpoint: header {magic, version, NetConfig}, then all
// state in declaration order as 64-bit little-endian floats.
void save_checkpoint(const std::string& path, const NetParams& params);
NetParams load_checkpoint(const std::string& path);

}  // namespace dymapia
