#pragma once

#include <map>
#include <string>
#include <vector>

#include "dymapia/analyzers.hpp"
#include "dymapia/types.hpp"

namespace dymapia {

struct Confusion {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long total() const { return tp + fp + fn + tn; }
};

// 0/0 ratios are defined as 0 and flagged degenerate.
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    bool degenerate = false;
};

Metrics metrics(const Confusion& c);

struct BaselineScore {
    std::string name;
    double f1 = 0.0;
};

struct DeltaRow {
    std::string dataset;
    double ours_f1 = 0.0;
    std::string baseline;
    double baseline_f1 = 0.0;
    double delta = 0.0;
};

// Per dataset: delta between our F1 and a baseline F1. By default the best
// baseline is the max-F1 entry; explicit_pairs forces a named baseline per
// dataset instead.
std::vector<DeltaRow> compare_report(const std::map<std::string, double>& ours_f1,
                                     const std::map<std::string, std::vector<BaselineScore>>& baselines,
                                     const std::map<std::string, std::string>* explicit_pairs = nullptr);

// Signed delta with two decimals, e.g. "+0.16".
std::string format_delta(double delta);

struct Localization {
    double pixel_recall = 0.0;
    double pixel_precision = 0.0;
    double iou = 0.0;
    bool degenerate = false;  // empty gt and/or pred
};

// Set-overlap scores over pixels; empty gt defines recall as 1, flagged.
Localization localization(const BinaryMask& pred, const BinaryMask& gt);

struct StageTiming {
    std::string stage;
    double ms = 0.0;
    size_t bytes = 0;  // estimated transient workspace
};

struct ProfileResult {
    std::vector<StageTiming> stages;  // fused-mode stages in pipeline order
    double fused_total_ms = 0.0;
    double independent_total_ms = 0.0;
    double ratio = 0.0;     // fused / independent
    bool parallel = false;  // measured with the caller's thread count
};

// Times the mask pipeline in two modes: fused (one shared preprocessing pass
// feeding all four analyzers) and independent (each analyzer re-runs its own
// preprocessing). Fused does a strict subset of the independent work.
// align_size is the canonical side frames are preprocessed to (0 = keep the
// source side). With reps > 1 each mode reports its fastest repetition, the
// usual noise-robust benchmark estimate.
//
// Stage times are wall milliseconds. The measured pipeline runs
// single-threaded by default so timings are schedule-independent; passing
// parallel = true keeps the caller's thread count and labels the result.
// For trustworthy numbers on shared machines, size the sequence so each
// mode's pass takes a second or more and use reps >= 2: repetitions
// interleave the two modes, and each reports its fastest pass.
ProfileResult profile(const FrameSequence& seq, const AnalyzerConfig& cfg, int align_size = 0,
                      int reps = 1, bool parallel = false);

// Report serialization (Table-1-shaped rows: model, dataset, PRE/REC/F1/ACC).
struct ReportRow {
    std::string model;
    std::string dataset;
    Metrics m;
};
std::string metrics_csv(const std::vector<ReportRow>& rows);
std::string deltas_csv(const std::vector<DeltaRow>& rows);
std::string profile_csv(const ProfileResult& result);

}  // namespace dymapia
