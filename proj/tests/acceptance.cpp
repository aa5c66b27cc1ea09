// Acceptance suite: runs every shipped criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code 0 iff all pass.
//
// Usage: acceptance [path-to-dymapia-cli]
// The CLI path is needed for the determinism criterion; it defaults to
// "dymapia" on PATH.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "dymapia/analyzers.hpp"
#include "dymapia/eval.hpp"
#include "dymapia/fft.hpp"
#include "dymapia/imgcore.hpp"
#include "dymapia/net.hpp"
#include "dymapia/parallel.hpp"
#include "dymapia/preprocess.hpp"
#include "dymapia/rng.hpp"
#include "dymapia/synth.hpp"
#include "ref/reference.hpp"

using namespace dymapia;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

std::string g_cli = "dymapia";
int g_failures = 0;

struct Check {
    bool ok = true;
    std::string detail;
    std::string info;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
    void note(const std::string& what) {
        if (!info.empty()) info += ", ";
        info += what;
    }
};

void criterion(int index, const std::string& name, double budget_s,
               const std::function<void(Check&)>& body) {
    Check check;
    const auto t0 = clock_type::now();
    try {
        body(check);
    } catch (const std::exception& e) {
        check.expect(false, std::string("exception: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(clock_type::now() - t0).count();
    if (budget_s > 0.0)
        check.expect(elapsed < budget_s,
                     "runtime " + std::to_string(elapsed) + " s over budget " +
                         std::to_string(budget_s) + " s");
    if (!check.ok) ++g_failures;
    const std::string extra = check.ok ? check.info : check.detail;
    std::printf("%s  %2d  %-58s (%.1f s)%s%s\n", check.ok ? "PASS" : "FAIL", index, name.c_str(),
                elapsed, extra.empty() ? "" : "  -- ", extra.c_str());
    std::fflush(stdout);
}

GrayFrame random_frame(uint64_t seed, int h, int w) {
    Rng rng(seed);
    GrayFrame f(h, w);
    for (double& v : f.data) v = rng.uniform();
    return f;
}

BinaryMask random_mask(uint64_t seed, int h, int w, double density) {
    Rng rng(seed);
    BinaryMask m(h, w, 0);
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    return m;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
    for (size_t i = 0; i < a.size(); ++i)
        if (a.bits[i] && !b.bits[i]) return false;
    return true;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing:" + p.string() + ">";
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// --------------------------------------------------------------- criteria

void fft_oracle(Check& c) {
    for (int n : {8, 16}) {
        GrayFrame f = random_frame(100 + n, n, n);
        Spectrum s = fft2d(f);
        auto oracle = ref::naive_dft2d(f.data, n, n);
        double max_diff = 0.0;
        for (int u = 0; u < n; ++u)
            for (int v = 0; v < n; ++v) {
                const auto got = s.at((u + n / 2) % n, (v + n / 2) % n);
                max_diff = std::max(max_diff,
                                    std::abs(got - oracle[static_cast<size_t>(u) * n + v]));
            }
        c.expect(max_diff < 1e-9, "fft vs naive dft diff " + std::to_string(max_diff));

        double spatial = 0.0, spectral = 0.0;
        for (double v : f.data) spatial += v * v;
        for (const auto& v : s.values) spectral += std::norm(v);
        c.expect(std::abs(spectral - n * n * spatial) / (n * n * spatial) < 1e-9, "parseval");

        GrayFrame back = ifft2d(s);
        double rt = 0.0;
        for (size_t i = 0; i < f.size(); ++i) rt = std::max(rt, std::abs(back.data[i] - f.data[i]));
        c.expect(rt < 1e-9, "round trip diff " + std::to_string(rt));
    }
}

void lbp_oracle(Check& c) {
    for (int i = 0; i < 100; ++i) {
        GrayFrame f = random_frame(200 + i, 32, 32);
        CodeMap codes = lbp_codes(f);
        for (int y = 1; y < 31 && c.ok; ++y)
            for (int x = 1; x < 31; ++x)
                if (codes.at(y, x) != ref::lbp_code_at(f, y, x)) {
                    c.expect(false, "lbp mismatch vs 8-comparison oracle");
                    break;
                }
    }
    GrayFrame f = random_frame(300, 32, 32);
    GrayFrame g = f;
    for (double& v : g.data) v = std::exp(3.0 * v);  // strictly increasing
    c.expect(lbp_codes(f).codes == lbp_codes(g).codes, "monotone-transform invariance");
}

void canny_criterion(Check& c) {
    AnalyzerConfig cfg;
    c.expect(canny(GrayFrame(32, 32, 0.5), cfg).count() == 0, "constant frame has edges");

    const int n = 64;
    GrayFrame step(n, n, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = n / 2; x < n; ++x) step.at(y, x) = 1.0;
    BinaryMask e = canny(step, cfg);
    for (int y = 0; y < n; ++y) {
        int count = 0, col = -1;
        for (int x = 0; x < n; ++x)
            if (e.at(y, x)) {
                ++count;
                col = x;
            }
        c.expect(count == 1, "step edge not 1 px wide after NMS");
        c.expect(std::abs(col - (n / 2 - 1)) <= 1, "step edge farther than 1 px from boundary");
    }
}

void flow_criterion(Check& c) {
    AnalyzerConfig cfg;
    const int n = 64;
    GrayFrame base = random_frame(400, n, n);
    GrayFrame smooth = gaussian_blur(base, 1.0);
    GrayFrame f0(n, n, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            f0.at(y, x) = 0.5 + 0.35 * std::sin(2 * M_PI * x / 8.0) * std::sin(2 * M_PI * y / 8.0) +
                          0.1 * (smooth.at(y, x) - 0.5);
    GrayFrame f1(n, n, 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) f1.at(y, x) = f0.at(y, ((x - 1) % n + n) % n);

    // block-matching oracle confirms the ground truth displacement (1, 0)
    for (const auto& b : ref::block_match(f0, f1, 16, 2)) {
        if (b.by == 0 || b.bx == 0 || b.by + 16 >= n || b.bx + 16 >= n) continue;
        c.expect(b.dx == 1 && b.dy == 0, "block matching disagrees with ground truth");
    }

    FlowField flow = dense_flow(f0, f1, cfg);
    double su = 0.0, sav = 0.0;
    int cnt = 0;
    for (int y = 8; y < n - 8; ++y)
        for (int x = 8; x < n - 8; ++x) {
            su += flow.u_at(y, x);
            sav += std::abs(flow.v_at(y, x));
            ++cnt;
        }
    const double mean_u = su / cnt;
    c.expect(mean_u >= 0.7 && mean_u <= 1.3, "mean u " + std::to_string(mean_u));
    c.expect(sav / cnt < 0.3, "mean |v| " + std::to_string(sav / cnt));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "mean u = %.3f", mean_u);
    c.note(buf);

    FlowField zero = dense_flow(f0, f0, cfg);
    for (double u : zero.u) c.expect(u == 0.0, "identical frames flow not exactly zero");
    for (double v : zero.v) c.expect(v == 0.0, "identical frames flow not exactly zero");
}

void mask_algebra_fuzz(Check& c) {
    Rng rng(500);
    for (int i = 0; i < 1000 && c.ok; ++i) {
        const int h = 8 + static_cast<int>(rng.below(12));
        const int w = 8 + static_cast<int>(rng.below(12));
        const int sides[3] = {1, 3, 5};
        const StructuringElement se(sides[rng.below(3)]);
        BinaryMask a = random_mask(rng.next_u64(), h, w, 0.2 + 0.5 * rng.uniform());
        BinaryMask b = random_mask(rng.next_u64(), h, w, 0.2 + 0.5 * rng.uniform());

        BinaryMask u = mask_or({a, b});
        c.expect(subset(a, u) && subset(b, u), "OR superset");
        c.expect(mask_or({a, a}) == a, "OR idempotent");

        BinaryMask er = erode(a, se), di = dilate(a, se);
        c.expect(subset(er, a) && subset(a, di), "erode/dilate ordering");

        BinaryMask op = open(a, se), cl = close(a, se);
        c.expect(subset(op, a), "opening anti-extensive");
        c.expect(subset(a, cl), "closing extensive");
        c.expect(open(op, se) == op, "opening idempotent");
        c.expect(close(cl, se) == cl, "closing idempotent");
    }
}

double train_loss_of(NetParams& p, const Tensor4& x, const std::vector<int>& labels) {
    ForwardCache cache;
    return bce_loss(forward(p, x, Mode::Train, &cache, false, 0.0, nullptr), labels);
}

double worst_gradient_error(NetParams& p, const Tensor4& x, const std::vector<int>& labels) {
    ForwardCache cache;
    forward(p, x, Mode::Train, &cache, false, 0.0, nullptr);
    NetParams grads = backward(p, cache, labels);
    std::vector<double*> params;
    p.for_each_param([&](double& v) { params.push_back(&v); });
    std::vector<double> analytic;
    grads.for_each_param([&](double v) { analytic.push_back(v); });
    constexpr double eps = 1e-5;
    double worst = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + eps;
        const double lp = train_loss_of(p, x, labels);
        *params[i] = saved - eps;
        const double lm = train_loss_of(p, x, labels);
        *params[i] = saved;
        const double fd = (lp - lm) / (2.0 * eps);
        worst = std::max(worst, std::abs(fd - analytic[i]) /
                                    std::max(std::abs(fd) + std::abs(analytic[i]), 1e-6));
    }
    return worst;
}

void gradient_suite(Check& c) {
    {
        // end-to-end lite preset on 32x32, every parameter
        NetConfig cfg = NetConfig::lite_preset();
        cfg.input_side = 32;
        NetParams p = NetParams::init(cfg, 600);
        Rng rng(601);
        Tensor4 x(2, 1, 32, 32);
        for (double& v : x.data) v = rng.uniform();
        const double err = worst_gradient_error(p, x, {1, 0});
        c.expect(err < 1e-4, "lite e2e gradient error " + std::to_string(err));
    }
    {
        // unpooled stem layer variant
        NetConfig cfg;
        cfg.input_side = 16;
        cfg.stem_channels = 3;
        cfg.block_channels = {4, 5, 6};
        cfg.hidden = 0;
        cfg.stem_pool = false;
        cfg.preset = "custom";
        NetParams p = NetParams::init(cfg, 602);
        Rng rng(603);
        Tensor4 x(2, 1, 16, 16);
        for (double& v : x.data) v = rng.uniform();
        const double err = worst_gradient_error(p, x, {0, 1});
        c.expect(err < 1e-4, "unpooled-stem gradient error " + std::to_string(err));
    }
    {
        // MLP-head layer variant
        NetConfig cfg;
        cfg.input_side = 16;
        cfg.stem_channels = 2;
        cfg.block_channels = {3, 3, 4};
        cfg.hidden = 5;
        cfg.preset = "custom";
        NetParams p = NetParams::init(cfg, 604);
        Rng rng(605);
        Tensor4 x(3, 1, 16, 16);
        for (double& v : x.data) v = rng.uniform();
        const double err = worst_gradient_error(p, x, {1, 0, 1});
        c.expect(err < 1e-4, "mlp-head gradient error " + std::to_string(err));
    }
}

void shape_contract(Check& c) {
    NetConfig cfg = NetConfig::paper_preset();
    NetParams p = NetParams::init(cfg, 700);
    Rng rng(701);
    Tensor4 x(1, 1, 256, 256);
    for (double& v : x.data) v = rng.uniform();
    ForwardCache cache;
    forward(p, x, Mode::Eval, &cache);
    c.expect(cache.stem.out.c == 32 && cache.stem.out.h == 128 && cache.stem.out.w == 128,
             "stem stage shape");
    c.expect(cache.blocks[0].out.c == 64 && cache.blocks[0].out.h == 64, "block 1 shape");
    c.expect(cache.blocks[1].out.c == 128 && cache.blocks[1].out.h == 32, "block 2 shape");
    c.expect(cache.blocks[2].out.c == 256 && cache.blocks[2].out.h == 16 &&
                 cache.blocks[2].out.w == 16,
             "block 3 shape (16x16)");
    c.expect(cache.gap.size() == 256, "gap width 256");
    c.expect(cache.hidden_post.size() == 1024, "hidden width 1024");
    c.expect(cache.logits.size() == 1, "scalar logit");
}

void loss_criterion(Check& c) {
    const double half = bce_loss({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
    c.expect(std::abs(half - std::log(2.0)) < 1e-9, "p=0.5 batch loss vs ln 2");
    c.expect(bce_loss({1.0, 0.0, 1.0}, {1, 0, 1}) <= 1e-11, "perfect batch loss");
}

void desk_end_to_end(Check& c) {
    const auto t0 = clock_type::now();
    const uint64_t seed = 20260808;

    CorpusConfig ccfg;
    ccfg.per_class = 200;
    ccfg.frame_side = 128;
    ccfg.seed = seed;
    std::vector<FrameSequence> sources;
    for (int i = 0; i < 6; ++i)
        sources.push_back(generate_source_sequence(seed * 1000003ULL + i, 8, 128));
    LabeledDataset ds = make_dataset(sources, ccfg);
    c.expect(ds.samples.size() == 400, "corpus size");

    // refined-mask recall of gt regions on fakes (mean), union property per fake
    double recall_sum = 0.0;
    size_t fakes = 0;
    for (const auto& s : ds.samples) {
        if (!s.label) continue;
        ++fakes;
        recall_sum += localization(s.bundle.refined, s.gt).pixel_recall;
        const double combined = localization(s.bundle.combined, s.gt).pixel_recall;
        for (const BinaryMask* m : {&s.bundle.freq, &s.bundle.tex, &s.bundle.edge, &s.bundle.temp})
            c.expect(combined >= localization(*m, s.gt).pixel_recall - 1e-12,
                     "combined recall below a single modality");
    }
    const double mean_recall = recall_sum / static_cast<double>(fakes);
    c.expect(mean_recall >= 0.3, "mean refined recall " + std::to_string(mean_recall));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "mean refined recall = %.3f", mean_recall);
    c.note(buf);

    NetConfig ncfg = NetConfig::lite_preset();
    ncfg.input_side = 128;
    TrainConfig tcfg;
    tcfg.lr = 0.05;
    tcfg.lr_decay = 0.92;
    tcfg.batch = 8;
    tcfg.epochs = 20;
    tcfg.seed = seed;
    TrainResult r = train_classifier(ds, ncfg, tcfg);
    c.expect(r.best_val_acc >= 0.90,
             "val accuracy " + std::to_string(r.best_val_acc) + " at epoch " +
                 std::to_string(r.best_epoch));
    std::snprintf(buf, sizeof(buf), "val acc = %.3f @ epoch %d", r.best_val_acc, r.best_epoch);
    c.note(buf);

    const double wall = std::chrono::duration<double>(clock_type::now() - t0).count();
    c.expect(wall < 600.0, "wall time " + std::to_string(wall) + " s");
}

void report_arithmetic(Check& c) {
    std::map<std::string, double> ours = {{"FF++", 99.95}, {"CBDF", 99.96}, {"VDFD", 99.76}};
    std::map<std::string, std::vector<BaselineScore>> baselines = {
        {"FF++", {{"Face X-ray", 99.79}}},
        {"CBDF", {{"Capsule", 98.86}}},
        {"VDFD", {{"F3Net", 99.64}}},
    };
    std::map<std::string, std::string> pairs = {
        {"FF++", "Face X-ray"}, {"CBDF", "Capsule"}, {"VDFD", "F3Net"}};
    auto rows = compare_report(ours, baselines, &pairs);
    c.expect(rows.size() == 3, "row count");
    for (const auto& r : rows) {
        const std::string want = r.dataset == "FF++" ? "+0.16"
                                 : r.dataset == "CBDF" ? "+1.10"
                                                       : "+0.12";
        c.expect(format_delta(r.delta) == want,
                 r.dataset + " delta " + format_delta(r.delta) + " != " + want);
    }
}

void profiling_property(Check& c) {
    AnalyzerConfig cfg;
    FrameSequence seq = generate_source_sequence(4242, 32, 768);
    ProfileResult r = profile(seq, cfg, 256, 2);
    c.expect(r.fused_total_ms < r.independent_total_ms,
             "fused " + std::to_string(r.fused_total_ms) + " ms !< independent " +
                 std::to_string(r.independent_total_ms) + " ms");
    // pinned regression baseline: ratio 0.85 measured on the desk sequence,
    // +-30% band (the published 22% reduction is hardware-bound reference)
    c.expect(r.ratio >= 0.85 * 0.7 && r.ratio <= 0.85 * 1.3,
             "ratio " + std::to_string(r.ratio) + " outside pinned band");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "fused/independent = %.3f (published reference: 0.78)", r.ratio);
    c.note(buf);
}

void determinism(Check& c) {
    const fs::path root = fs::temp_directory_path() / "dymapia_acceptance_det";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream cfg(root / "run.cfg");
    cfg << "per_class = 6\nframe_side = 64\nregion_min = 16\nregion_max = 24\n"
        << "input_side = 64\nepochs = 2\nbatch = 4\nflow_iters = 40\n";
    cfg.close();

    auto run = [&](const std::string& tag) {
        const std::string base = (root / tag).string();
        auto sh = [&](const std::string& args) {
            const std::string cmd = g_cli + " " + args + " >> " + (root / "log").string() + " 2>&1";
            return std::system(cmd.c_str()) == 0;
        };
        bool ok = sh("--config " + (root / "run.cfg").string() + " --seed 77 --out " + base +
                     "/synth synth");
        ok = ok && sh("--config " + (root / "run.cfg").string() + " --seed 77 --preset lite --out " +
                      base + "/train train " + base + "/synth/corpus");
        ok = ok && sh("--config " + (root / "run.cfg").string() + " --seed 77 --out " + base +
                      "/eval eval " + base + "/synth/corpus --checkpoint " + base +
                      "/train/checkpoint.bin");
        return ok;
    };
    c.expect(run("a"), "first seeded run failed");
    c.expect(run("b"), "second seeded run failed");
    if (!c.ok) return;

    for (const char* rel : {"synth/corpus/manifest.json", "train/checkpoint.bin",
                            "train/checkpoint.json", "train/history.csv", "eval/metrics.csv",
                            "eval/metrics.json"}) {
        const std::string a = slurp(root / "a" / rel);
        const std::string b = slurp(root / "b" / rel);
        c.expect(!a.empty() && a == b, std::string("artifact differs: ") + rel);
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli = argv[1];
    set_jobs(1);  // acceptance runs are the single-threaded reproducibility baseline

    std::printf("acceptance suite (single-threaded)\n");
    criterion(1, "fft matches naive dft; parseval; round trip", 1.0, fft_oracle);
    criterion(2, "lbp matches brute force; monotone invariance", 5.0, lbp_oracle);
    criterion(3, "canny: silent on constants, 1-px step edge", 1.0, canny_criterion);
    criterion(4, "optical flow recovers 1-px shift vs block matching", 30.0, flow_criterion);
    criterion(5, "mask algebra fuzz: OR/morphology properties exact", 10.0, mask_algebra_fuzz);
    criterion(6, "gradient checks: every layer and lite end-to-end", 120.0, gradient_suite);
    criterion(7, "paper-preset shape chain at 256", 30.0, shape_contract);
    criterion(8, "bce loss: ln 2 at 0.5, zero at perfect", 1.0, loss_criterion);
    criterion(9, "desk corpus: recall, union property, val acc >= 0.90", 600.0, desk_end_to_end);
    criterion(10, "delta table reproduces +0.16 / +1.10 / +0.12", 1.0, report_arithmetic);
    criterion(11, "fused pipeline beats independent; ratio in band", 120.0, profiling_property);
    criterion(12, "seeded synth+train+eval runs byte-identical", 300.0, determinism);

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
