#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dymapia/analyzers.hpp"
#include "dymapia/net.hpp"
#include "dymapia/types.hpp"

namespace dymapia {

enum class ManipulationKind { Splice, BlurRegion, SpectralPerturb, TemporalJitter };

std::string kind_name(ManipulationKind k);

// Rectangular or elliptical manipulation region in pixel coordinates.
struct Region {
    bool ellipse = false;
    int x = 0, y = 0, w = 0, h = 0;

    bool contains(int py, int px) const;
    BinaryMask to_mask(int frame_h, int frame_w) const;
    void validate(int frame_h, int frame_w) const;
};

struct ManipulationSpec {
    ManipulationKind kind = ManipulationKind::Splice;
    Region region;
    double strength = 1.0;
    uint64_t seed = 0;
};

// Donor content alpha-blended into the region (same-position crop) with a
// linear feather band inside the region; gt mask = the region itself.
std::pair<GrayFrame, BinaryMask> splice(const GrayFrame& base, const GrayFrame& donor,
                                        const Region& region, int feather);

// Gaussian blur (sigma = strength) composited inside the region.
std::pair<GrayFrame, BinaryMask> blur_region(const GrayFrame& frame, const Region& region,
                                             double strength);

// Seeded white noise of amplitude `strength` added inside the region only.
std::pair<GrayFrame, BinaryMask> spectral_perturb(const GrayFrame& frame, const Region& region,
                                                  double strength, uint64_t seed);

// Swaps region content between adjacent frame pairs; each pair swaps with
// probability min(strength, 1). Requires a sequence of at least 2 frames.
std::pair<FrameSequence, BinaryMask> temporal_jitter(const FrameSequence& seq, const Region& region,
                                                     double strength, uint64_t seed);

// Deterministic drifting value-noise sequence standing in for natural video.
FrameSequence generate_source_sequence(uint64_t seed, int frames, int side);

struct LabeledSample {
    GrayFrame frame;    // sample frame after manipulation + normalization
    GrayFrame input;    // masked network input (frame * refined mask)
    BinaryMask gt;      // ground-truth manipulation region; all-zero for real
    MaskBundle bundle;  // analyzer products for the sample frame
    int label = 0;      // 1 = fake
    int split = 0;      // 0 train, 1 val, 2 test
    std::optional<ManipulationSpec> provenance;
};

struct LabeledDataset {
    std::vector<LabeledSample> samples;
    uint64_t seed = 0;
    int per_class = 0;
    int frame_side = 0;

    std::vector<TrainSample> split_view(int split) const;
    void validate() const;
};

struct CorpusConfig {
    int per_class = 200;
    int frame_side = 128;
    int frames_per_sample = 3;
    uint64_t seed = 0;
    AnalyzerConfig analyzer;
    double blur_strength = 7.0;
    double noise_strength = 0.35;
    double jitter_strength = 8.0;
    int splice_feather = 2;
    int region_min = 32;
    int region_max = 56;
};

// N real + N fake samples (manipulation kinds round-robin), 70/15/15 split
// with exact 50/50 class balance per split. Every sample's network input is
// frame * refined-mask; reals pass through the same mask pipeline.
LabeledDataset make_dataset(const std::vector<FrameSequence>& real_sources, const CorpusConfig& cfg);

// Corpus layout: <dir>/{train,val,test}/{real,fake}/%06d/ with frame.png,
// input.png, gt.png, spec.json; manifest.json at the top level.
void save_corpus(const LabeledDataset& dataset, const std::string& dir);
LabeledDataset load_corpus(const std::string& dir);

// Wires the dataset splits into the trainer.
TrainResult train_classifier(const LabeledDataset& dataset, const NetConfig& net_cfg,
                             const TrainConfig& train_cfg);

}  // namespace dymapia
