#include "dymapia/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include <omp.h>

#include "dymapia/fft.hpp"
#include "dymapia/imgcore.hpp"
#include "dymapia/preprocess.hpp"

namespace dymapia {

Metrics metrics(const Confusion& c) {
    Metrics m;
    auto ratio = [&m](double num, double den) {
        if (den == 0.0) {
            m.degenerate = true;
            return 0.0;
        }
        return num / den;
    };
    m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    m.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
    return m;
}

std::vector<DeltaRow> compare_report(const std::map<std::string, double>& ours_f1,
                                     const std::map<std::string, std::vector<BaselineScore>>& baselines,
                                     const std::map<std::string, std::string>* explicit_pairs) {
    if (baselines.empty()) throw invalid_input("compare_report: empty baseline set");
    std::vector<DeltaRow> rows;
    for (const auto& [dataset, ours] : ours_f1) {
        auto it = baselines.find(dataset);
        if (it == baselines.end() || it->second.empty())
            throw invalid_input("compare_report: no baselines for dataset " + dataset);
        const BaselineScore* chosen = nullptr;
        if (explicit_pairs) {
            auto pit = explicit_pairs->find(dataset);
            if (pit != explicit_pairs->end()) {
                for (const auto& b : it->second)
                    if (b.name == pit->second) chosen = &b;
                if (!chosen)
                    throw invalid_input("compare_report: named baseline " + pit->second +
                                        " not found for " + dataset);
            }
        }
        if (!chosen) {
            chosen = &it->second.front();
            for (const auto& b : it->second)
                if (b.f1 > chosen->f1) chosen = &b;
        }
        rows.push_back({dataset, ours, chosen->name, chosen->f1, ours - chosen->f1});
    }
    return rows;
}

std::string format_delta(double delta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f", delta);
    return buf;
}

Localization localization(const BinaryMask& pred, const BinaryMask& gt) {
    if (!pred.same_shape(gt)) throw invalid_input("localization: dimension mismatch");
    size_t inter = 0, np = 0, ng = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        np += pred.bits[i];
        ng += gt.bits[i];
        inter += pred.bits[i] & gt.bits[i];
    }
    const size_t uni = np + ng - inter;
    Localization loc;
    if (ng == 0) {
        loc.pixel_recall = 1.0;
        loc.degenerate = true;
    } else {
        loc.pixel_recall = static_cast<double>(inter) / static_cast<double>(ng);
    }
    if (np == 0) {
        loc.pixel_precision = ng == 0 ? 1.0 : 0.0;
        loc.degenerate = true;
    } else {
        loc.pixel_precision = static_cast<double>(inter) / static_cast<double>(np);
    }
    if (uni == 0) {
        loc.iou = 1.0;
        loc.degenerate = true;
    } else {
        loc.iou = static_cast<double>(inter) / static_cast<double>(uni);
    }
    return loc;
}

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

// The preprocessing every analyzer depends on: segmentation, masking,
// alignment, normalization.
GrayFrame preprocess_one(const GrayFrame& frame, int side) {
    const BinaryMask face = segment_face(frame, SegmentationSource::heuristic());
    return normalize(align_center_crop(mask_apply(frame, face), side));
}

}  // namespace

ProfileResult profile(const FrameSequence& seq, const AnalyzerConfig& cfg, int align_size,
                      int reps, bool parallel) {
    cfg.validate();
    seq.validate();
    if (seq.size() < 8) throw invalid_input("profile: need at least 8 frames for stable timing");
    if (reps < 1) reps = 1;
    const int saved_jobs = omp_get_max_threads();
    if (!parallel) omp_set_num_threads(1);
    const int side = align_size > 0 ? align_size : seq.frames[0].height;
    const int T = static_cast<int>(seq.size());
    const size_t frame_bytes = static_cast<size_t>(side) * side * sizeof(double);
    const StructuringElement se(cfg.morph_side);

    // Untimed warm-up so neither mode pays the cold-start cost.
    {
        GrayFrame w0 = preprocess_one(seq.frames[0], side);
        GrayFrame w1 = preprocess_one(seq.frames[1], side);
        freq_mask(w0, cfg);
        texture_mask(w0, cfg);
        edge_mask(w0, cfg);
        temporal_mask(dense_flow(w0, w1, cfg), cfg);
    }

    // Fused mode: one preprocessing pass shared by all four analyzers.
    auto fused_pass = [&]() {
        std::vector<StageTiming> stages;
        std::vector<GrayFrame> pre(T);
        auto t0 = clock_type::now();
        for (int t = 0; t < T; ++t) pre[t] = preprocess_one(seq.frames[t], side);
        stages.push_back({"preprocess", ms_since(t0), 2 * frame_bytes});

        t0 = clock_type::now();
        std::vector<BinaryMask> freq(T);
        for (int t = 0; t < T; ++t) freq[t] = freq_mask(pre[t], cfg);
        const size_t pad = static_cast<size_t>(next_pow2(side));
        stages.push_back({"freq", ms_since(t0), 2 * pad * pad * sizeof(double) * 2});

        t0 = clock_type::now();
        std::vector<BinaryMask> tex(T);
        for (int t = 0; t < T; ++t) tex[t] = texture_mask(pre[t], cfg);
        stages.push_back({"texture", ms_since(t0), frame_bytes + 256 * sizeof(double)});

        t0 = clock_type::now();
        std::vector<BinaryMask> edge(T);
        for (int t = 0; t < T; ++t) edge[t] = edge_mask(pre[t], cfg);
        stages.push_back({"edge", ms_since(t0), 4 * frame_bytes});

        t0 = clock_type::now();
        std::vector<BinaryMask> temp(T);
        for (int t = 0; t < T; ++t) {
            const int a = std::min(t, T - 2);
            temp[t] = temporal_mask(dense_flow(pre[a], pre[a + 1], cfg), cfg);
        }
        stages.push_back({"temporal", ms_since(t0), 7 * frame_bytes});

        t0 = clock_type::now();
        for (int t = 0; t < T; ++t) refine(mask_or({freq[t], tex[t], edge[t], temp[t]}), se);
        stages.push_back({"fusion", ms_since(t0), 2 * static_cast<size_t>(side) * side});
        return stages;
    };

    // Independent mode: each analyzer re-runs its own preprocessing.
    auto independent_pass = [&]() {
        double total = 0.0;
        std::vector<BinaryMask> freq(T), tex(T), edge(T), temp(T);
        for (int analyzer = 0; analyzer < 4; ++analyzer) {
            auto t0 = clock_type::now();
            std::vector<GrayFrame> own(T);
            for (int t = 0; t < T; ++t) own[t] = preprocess_one(seq.frames[t], side);
            switch (analyzer) {
                case 0:
                    for (int t = 0; t < T; ++t) freq[t] = freq_mask(own[t], cfg);
                    break;
                case 1:
                    for (int t = 0; t < T; ++t) tex[t] = texture_mask(own[t], cfg);
                    break;
                case 2:
                    for (int t = 0; t < T; ++t) edge[t] = edge_mask(own[t], cfg);
                    break;
                case 3:
                    for (int t = 0; t < T; ++t) {
                        const int a = std::min(t, T - 2);
                        temp[t] = temporal_mask(dense_flow(own[a], own[a + 1], cfg), cfg);
                    }
                    break;
            }
            total += ms_since(t0);
        }
        auto t0 = clock_type::now();
        for (int t = 0; t < T; ++t) refine(mask_or({freq[t], tex[t], edge[t], temp[t]}), se);
        return total + ms_since(t0);
    };

    // Repetitions interleave the two modes so transient machine slowdowns
    // (scheduler steal, bandwidth throttling) cannot bias one side.
    ProfileResult result;
    result.fused_total_ms = 1e300;
    result.independent_total_ms = 1e300;
    for (int r = 0; r < reps; ++r) {
        std::vector<StageTiming> stages = fused_pass();
        double total = 0.0;
        for (const auto& s : stages) total += s.ms;
        if (total < result.fused_total_ms) {
            result.fused_total_ms = total;
            result.stages = std::move(stages);
        }
        result.independent_total_ms = std::min(result.independent_total_ms, independent_pass());
    }

    result.ratio = result.independent_total_ms > 0.0
                       ? result.fused_total_ms / result.independent_total_ms
                       : 0.0;
    result.parallel = parallel;
    omp_set_num_threads(saved_jobs);
    return result;
}

std::string metrics_csv(const std::vector<ReportRow>& rows) {
    std::string out = "model,dataset,PRE,REC,F1,ACC\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.4f,%.4f,%.4f,%.4f\n", r.model.c_str(),
                      r.dataset.c_str(), r.m.precision, r.m.recall, r.m.f1, r.m.accuracy);
        out += buf;
    }
    return out;
}

std::string deltas_csv(const std::vector<DeltaRow>& rows) {
    std::string out = "dataset,ours_f1,baseline,baseline_f1,delta_f1\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.2f,%s,%.2f,%s\n", r.dataset.c_str(), r.ours_f1,
                      r.baseline.c_str(), r.baseline_f1, format_delta(r.delta).c_str());
        out += buf;
    }
    return out;
}

std::string profile_csv(const ProfileResult& result) {
    std::string out = result.parallel ? "stage,cpu_ms (parallel),bytes\n" : "stage,ms,bytes\n";
    char buf[256];
    for (const auto& s : result.stages) {
        std::snprintf(buf, sizeof(buf), "%s,%.3f,%zu\n", s.stage.c_str(), s.ms, s.bytes);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "fused_total,%.3f,0\nindependent_total,%.3f,0\nratio,%.4f,0\n",
                  result.fused_total_ms, result.independent_total_ms, result.ratio);
    out += buf;
    return out;
}

}  // namespace dymapia
