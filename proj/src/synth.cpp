#include "dymapia/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dymapia/imageio.hpp"
#include "dymapia/imgcore.hpp"
#include "dymapia/preprocess.hpp"
#include "dymapia/rng.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace dymapia {

std::string kind_name(ManipulationKind k) {
    switch (k) {
        case ManipulationKind::Splice: return "splice";
        case ManipulationKind::BlurRegion: return "blur_region";
        case ManipulationKind::SpectralPerturb: return "spectral_perturb";
        case ManipulationKind::TemporalJitter: return "temporal_jitter";
    }
    return "unknown";
}

namespace {

ManipulationKind kind_from_name(const std::string& s) {
    if (s == "splice") return ManipulationKind::Splice;
    if (s == "blur_region") return ManipulationKind::BlurRegion;
    if (s == "spectral_perturb") return ManipulationKind::SpectralPerturb;
    if (s == "temporal_jitter") return ManipulationKind::TemporalJitter;
    throw invalid_input("unknown manipulation kind: " + s);
}

// Distance to the region boundary in pixels, used for the feather band.
double boundary_distance(const Region& r, int py, int px) {
    if (!r.ellipse) {
        const int d = std::min(std::min(py - r.y, r.y + r.h - 1 - py),
                               std::min(px - r.x, r.x + r.w - 1 - px));
        return d + 1.0;
    }
    const double cy = r.y + (r.h - 1) / 2.0, cx = r.x + (r.w - 1) / 2.0;
    const double a = r.w / 2.0, b = r.h / 2.0;
    const double nr = std::sqrt(((px - cx) / a) * ((px - cx) / a) +
                                ((py - cy) / b) * ((py - cy) / b));
    return (1.0 - nr) * std::min(a, b);
}

}  // namespace

bool Region::contains(int py, int px) const {
    if (!ellipse)
        return py >= y && py < y + h && px >= x && px < x + w;
    const double cy = y + (h - 1) / 2.0, cx = x + (w - 1) / 2.0;
    const double a = w / 2.0, b = h / 2.0;
    const double dx = (px - cx) / a, dy = (py - cy) / b;
    return dx * dx + dy * dy <= 1.0;
}

BinaryMask Region::to_mask(int frame_h, int frame_w) const {
    BinaryMask m(frame_h, frame_w, 0);
    for (int py = std::max(0, y); py < std::min(frame_h, y + h); ++py)
        for (int px = std::max(0, x); px < std::min(frame_w, x + w); ++px)
            if (contains(py, px)) m.at(py, px) = 1;
    return m;
}

void Region::validate(int frame_h, int frame_w) const {
    if (w < 1 || h < 1) throw invalid_input("region: non-positive size");
    if (x < 0 || y < 0 || x + w > frame_w || y + h > frame_h)
        throw invalid_input("region exceeds frame bounds");
}

std::pair<GrayFrame, BinaryMask> splice(const GrayFrame& base, const GrayFrame& donor,
                                        const Region& region, int feather) {
    region.validate(base.height, base.width);
    if (donor.height < region.y + region.h || donor.width < region.x + region.w)
        throw invalid_input("splice: donor smaller than the region");
    GrayFrame out = base;
    for (int py = region.y; py < region.y + region.h; ++py) {
        for (int px = region.x; px < region.x + region.w; ++px) {
            if (!region.contains(py, px)) continue;
            double alpha = 1.0;
            if (feather > 0)
                alpha = std::clamp(boundary_distance(region, py, px) / feather, 0.0, 1.0);
            out.at(py, px) = alpha * donor.at(py, px) + (1.0 - alpha) * base.at(py, px);
        }
    }
    return {std::move(out), region.to_mask(base.height, base.width)};
}

std::pair<GrayFrame, BinaryMask> blur_region(const GrayFrame& frame, const Region& region,
                                             double strength) {
    region.validate(frame.height, frame.width);
    if (strength < 0) throw invalid_input("blur_region: strength must be >= 0");
    GrayFrame out = frame;
    if (strength > 1e-12) {
        const GrayFrame blurred = gaussian_blur(frame, strength);
        for (int py = region.y; py < region.y + region.h; ++py)
            for (int px = region.x; px < region.x + region.w; ++px)
                if (region.contains(py, px)) out.at(py, px) = blurred.at(py, px);
    }
    return {std::move(out), region.to_mask(frame.height, frame.width)};
}

std::pair<GrayFrame, BinaryMask> spectral_perturb(const GrayFrame& frame, const Region& region,
                                                  double strength, uint64_t seed) {
    region.validate(frame.height, frame.width);
    if (strength <= 0) throw invalid_input("spectral_perturb: strength must be > 0");
    GrayFrame out = frame;
    Rng rng(seed);
    for (int py = region.y; py < region.y + region.h; ++py)
        for (int px = region.x; px < region.x + region.w; ++px) {
            const double noise = rng.uniform(-strength, strength);
            if (region.contains(py, px))
                out.at(py, px) = std::clamp(frame.at(py, px) + noise, 0.0, 1.0);
        }
    return {std::move(out), region.to_mask(frame.height, frame.width)};
}

std::pair<FrameSequence, BinaryMask> temporal_jitter(const FrameSequence& seq, const Region& region,
                                                     double strength, uint64_t seed) {
    if (seq.size() < 2) throw invalid_input("temporal_jitter: requires at least 2 frames");
    if (strength <= 0) throw invalid_input("temporal_jitter: strength must be > 0");
    const int h = seq.frames[0].height, w = seq.frames[0].width;
    region.validate(h, w);

    // Region content of every odd frame is resampled at a seeded offset of
    // `strength` pixels, so the region jumps back and forth between adjacent
    // frames while the rest of the scene moves smoothly.
    Rng rng(seed);
    const double ang = rng.uniform(0.0, 6.283185307179586);
    int dx = static_cast<int>(std::lround(strength * std::cos(ang)));
    int dy = static_cast<int>(std::lround(strength * std::sin(ang)));
    if (dx == 0 && dy == 0) dx = std::max(1, static_cast<int>(std::lround(strength)));

    FrameSequence out = seq;
    for (size_t t = 1; t < out.frames.size(); t += 2) {
        const GrayFrame& src = seq.frames[t];
        for (int py = region.y; py < region.y + region.h; ++py)
            for (int px = region.x; px < region.x + region.w; ++px) {
                if (!region.contains(py, px)) continue;
                const int sy = std::clamp(py + dy, 0, h - 1);
                const int sx = std::clamp(px + dx, 0, w - 1);
                out.frames[t].at(py, px) = src.at(sy, sx);
            }
    }
    return {std::move(out), region.to_mask(h, w)};
}

FrameSequence generate_source_sequence(uint64_t seed, int frames, int side) {
    if (frames < 1 || side < 16) throw invalid_input("generate_source_sequence: bad dimensions");
    Rng rng(seed);

    // Two octaves of drifting value noise over periodic lattices. Spacings
    // and weights vary per source so distinct sources carry distinct texture
    // statistics (as mixed-content corpora do); the fine octave keeps
    // gradients strong enough for the flow solver.
    struct Octave {
        int spacing;
        double weight;
        int cells;
        std::vector<double> lattice;
        double drift_x, drift_y;
    };
    const double coarse_weight = rng.uniform(0.25, 0.7);
    std::array<Octave, 2> octaves = {
        Octave{rng.range(8, 16), coarse_weight, 0, {}, 0, 0},
        Octave{rng.range(2, 6), 1.0 - coarse_weight, 0, {}, 0, 0}};
    const double ang = rng.uniform(0.0, 6.283185307179586);
    const double speed = rng.uniform(0.5, 1.2);
    for (auto& o : octaves) {
        o.cells = side / o.spacing + 4;
        o.lattice.resize(static_cast<size_t>(o.cells) * o.cells);
        for (double& v : o.lattice) v = rng.uniform();
        o.drift_x = speed * std::cos(ang);
        o.drift_y = speed * std::sin(ang);
    }

    FrameSequence seq;
    seq.fps = 25.0;
    seq.frames.reserve(frames);
    for (int t = 0; t < frames; ++t) {
        GrayFrame f(side, side, 0.0, t);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                double v = 0.0;
                for (const auto& o : octaves) {
                    const double gy = (y + t * o.drift_y) / o.spacing;
                    const double gx = (x + t * o.drift_x) / o.spacing;
                    const int iy = static_cast<int>(std::floor(gy));
                    const int ix = static_cast<int>(std::floor(gx));
                    const double fy = gy - iy, fx = gx - ix;
                    auto lat = [&](int yy, int xx) {
                        yy = ((yy % o.cells) + o.cells) % o.cells;
                        xx = ((xx % o.cells) + o.cells) % o.cells;
                        return o.lattice[static_cast<size_t>(yy) * o.cells + xx];
                    };
                    const double top = lat(iy, ix) * (1 - fx) + lat(iy, ix + 1) * fx;
                    const double bot = lat(iy + 1, ix) * (1 - fx) + lat(iy + 1, ix + 1) * fx;
                    v += o.weight * (top * (1 - fy) + bot * fy);
                }
                f.at(y, x) = 0.1 + 0.8 * v;
            }
        }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

std::vector<TrainSample> LabeledDataset::split_view(int split) const {
    std::vector<TrainSample> out;
    for (const auto& s : samples)
        if (s.split == split) out.push_back({&s.input, s.label});
    return out;
}

void LabeledDataset::validate() const {
    bool class_in_split[3][2] = {};
    for (const auto& s : samples) {
        if ((s.label == 1) != s.gt.any())
            throw invalid_input("dataset: fake label must match non-empty gt mask");
        if (s.split < 0 || s.split > 2) throw invalid_input("dataset: bad split tag");
        class_in_split[s.split][s.label] = true;
    }
    for (int sp = 0; sp < 3; ++sp)
        if (!class_in_split[sp][0] || !class_in_split[sp][1])
            throw invalid_input("dataset: every split needs both classes");
}

namespace {

struct SampleWindow {
    FrameSequence window;   // normalized frames, t reindexed from 0
    int middle;
};

SampleWindow cut_window(const FrameSequence& source, int start, int len) {
    SampleWindow sw;
    sw.window.fps = source.fps;
    for (int i = 0; i < len; ++i) {
        GrayFrame f = source.frames[start + i];
        f.t = i;
        sw.window.frames.push_back(std::move(f));
    }
    sw.middle = len / 2;
    return sw;
}

void normalize_window(FrameSequence& window) {
    for (auto& f : window.frames) f = normalize(f);
}

}  // namespace

LabeledDataset make_dataset(const std::vector<FrameSequence>& real_sources, const CorpusConfig& cfg) {
    if (real_sources.size() < 2)
        throw invalid_input("make_dataset: need at least 2 source sequences");
    if (cfg.per_class < 1) throw invalid_input("make_dataset: per_class must be >= 1 (single-class corpus rejected)");
    if (cfg.frames_per_sample < 2) throw invalid_input("make_dataset: frames_per_sample must be >= 2");
    cfg.analyzer.validate();
    for (const auto& src : real_sources) {
        src.validate();
        if (src.frames.empty() || static_cast<int>(src.size()) < cfg.frames_per_sample)
            throw invalid_input("make_dataset: source sequence shorter than the sample window");
        if (src.frames[0].height != cfg.frame_side || src.frames[0].width != cfg.frame_side)
            throw invalid_input("make_dataset: source dimensions must equal frame_side");
    }

    const int n = cfg.per_class;
    if (n < 3) throw invalid_input("make_dataset: per_class must be >= 3 so every split is populated");
    int n_val = std::max(1, n * 15 / 100);
    int n_test = std::max(1, n - n * 70 / 100 - n_val);
    const int n_train = n - n_val - n_test;
    auto split_of = [&](int i) { return i < n_train ? 0 : i < n_train + n_val ? 1 : 2; };

    Rng rng(cfg.seed);
    LabeledDataset ds;
    ds.seed = cfg.seed;
    ds.per_class = n;
    ds.frame_side = cfg.frame_side;
    ds.samples.reserve(static_cast<size_t>(2) * n);

    const int side = cfg.frame_side;
    const int margin = 8;

    auto pick_window = [&](Rng& r, int exclude_source) {
        int s;
        do {
            s = static_cast<int>(r.below(real_sources.size()));
        } while (s == exclude_source);
        const int max_start = static_cast<int>(real_sources[s].size()) - cfg.frames_per_sample;
        const int start = max_start > 0 ? static_cast<int>(r.below(max_start + 1)) : 0;
        return std::pair<int, int>(s, start);
    };

    auto pick_region = [&](Rng& r) {
        Region reg;
        reg.ellipse = r.below(2) == 1;
        reg.w = r.range(cfg.region_min, cfg.region_max);
        reg.h = r.range(cfg.region_min, cfg.region_max);
        reg.x = r.range(margin, side - margin - reg.w);
        reg.y = r.range(margin, side - margin - reg.h);
        return reg;
    };

    for (int i = 0; i < 2 * n; ++i) {
        const bool fake = i >= n;
        const int class_index = fake ? i - n : i;
        Rng sample_rng = Rng(cfg.seed).fork(static_cast<uint64_t>(i) + 1);

        auto [src_idx, start] = pick_window(sample_rng, -1);
        SampleWindow sw = cut_window(real_sources[src_idx], start, cfg.frames_per_sample);

        LabeledSample sample;
        sample.split = split_of(class_index);
        sample.label = fake ? 1 : 0;

        if (fake) {
            const ManipulationKind kinds[4] = {ManipulationKind::Splice,
                                               ManipulationKind::BlurRegion,
                                               ManipulationKind::SpectralPerturb,
                                               ManipulationKind::TemporalJitter};
            ManipulationSpec spec;
            spec.kind = kinds[class_index % 4];
            spec.region = pick_region(sample_rng);
            spec.seed = sample_rng.next_u64();
            BinaryMask gt;
            switch (spec.kind) {
                case ManipulationKind::Splice: {
                    spec.strength = 1.0;
                    auto [donor_idx, donor_start] = pick_window(sample_rng, src_idx);
                    SampleWindow donor = cut_window(real_sources[donor_idx], donor_start,
                                                    cfg.frames_per_sample);
                    // photometric mismatch: donor content arrives from different
                    // lighting, as spliced material does
                    const double gain = sample_rng.uniform(0.7, 1.35);
                    const double shift = sample_rng.uniform(-0.15, 0.15);
                    for (auto& f : donor.window.frames)
                        for (double& v : f.data) v = std::clamp(gain * v + shift, 0.0, 1.0);
                    for (int t = 0; t < cfg.frames_per_sample; ++t) {
                        auto [f, m] = splice(sw.window.frames[t], donor.window.frames[t],
                                             spec.region, cfg.splice_feather);
                        sw.window.frames[t] = std::move(f);
                        gt = std::move(m);
                    }
                    break;
                }
                case ManipulationKind::BlurRegion: {
                    spec.strength = cfg.blur_strength;
                    for (int t = 0; t < cfg.frames_per_sample; ++t) {
                        auto [f, m] = blur_region(sw.window.frames[t], spec.region, spec.strength);
                        sw.window.frames[t] = std::move(f);
                        gt = std::move(m);
                    }
                    break;
                }
                case ManipulationKind::SpectralPerturb: {
                    spec.strength = cfg.noise_strength;
                    for (int t = 0; t < cfg.frames_per_sample; ++t) {
                        auto [f, m] = spectral_perturb(sw.window.frames[t], spec.region,
                                                       spec.strength, spec.seed + t);
                        sw.window.frames[t] = std::move(f);
                        gt = std::move(m);
                    }
                    break;
                }
                case ManipulationKind::TemporalJitter: {
                    spec.strength = cfg.jitter_strength;
                    auto [jittered, m] = temporal_jitter(sw.window, spec.region, spec.strength,
                                                         spec.seed);
                    sw.window = std::move(jittered);
                    gt = std::move(m);
                    break;
                }
            }
            sample.provenance = spec;
            sample.gt = std::move(gt);
        } else {
            sample.gt = BinaryMask(side, side, 0);
        }

        normalize_window(sw.window);
        BundleResult bundle = build_bundle(sw.window, cfg.analyzer);
        sample.bundle = std::move(bundle.bundles[sw.middle]);
        sample.frame = sw.window.frames[sw.middle];
        sample.input = mask_apply(sample.frame, sample.bundle.refined);
        ds.samples.push_back(std::move(sample));
    }
    ds.validate();
    return ds;
}

namespace {

const char* split_name(int split) { return split == 0 ? "train" : split == 1 ? "val" : "test"; }

std::string sample_rel_dir(const LabeledSample& s, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s/%s/%06d", split_name(s.split),
                  s.label ? "fake" : "real", index);
    return buf;
}

ordered_json region_json(const Region& r) {
    return ordered_json{{"shape", r.ellipse ? "ellipse" : "rect"},
                        {"x", r.x},
                        {"y", r.y},
                        {"w", r.w},
                        {"h", r.h}};
}

Region region_from_json(const ordered_json& j) {
    Region r;
    r.ellipse = j.at("shape").get<std::string>() == "ellipse";
    r.x = j.at("x").get<int>();
    r.y = j.at("y").get<int>();
    r.w = j.at("w").get<int>();
    r.h = j.at("h").get<int>();
    return r;
}

}  // namespace

void save_corpus(const LabeledDataset& dataset, const std::string& dir) {
    fs::create_directories(dir);
    ordered_json manifest;
    manifest["seed"] = dataset.seed;
    manifest["per_class"] = dataset.per_class;
    manifest["frame_side"] = dataset.frame_side;
    int counts[3][2] = {};
    ordered_json sample_list = ordered_json::array();
    for (size_t i = 0; i < dataset.samples.size(); ++i) {
        const LabeledSample& s = dataset.samples[i];
        ++counts[s.split][s.label];
        const std::string rel = sample_rel_dir(s, static_cast<int>(i));
        const fs::path sdir = fs::path(dir) / rel;
        fs::create_directories(sdir);
        write_png((sdir / "frame.png").string(), to_image(s.frame));
        write_png((sdir / "input.png").string(), to_image(s.input));
        write_png((sdir / "gt.png").string(), mask_to_image(s.gt));

        ordered_json spec;
        spec["id"] = i;
        spec["split"] = split_name(s.split);
        spec["label"] = s.label ? "fake" : "real";
        if (s.provenance) {
            spec["kind"] = kind_name(s.provenance->kind);
            spec["region"] = region_json(s.provenance->region);
            spec["strength"] = s.provenance->strength;
            spec["manipulation_seed"] = s.provenance->seed;
        }
        std::ofstream sf(sdir / "spec.json");
        sf << spec.dump(2) << "\n";
        if (!sf) throw io_error("cannot write sample spec under " + sdir.string());

        ordered_json rec;
        rec["id"] = i;
        rec["dir"] = rel;
        rec["split"] = split_name(s.split);
        rec["label"] = s.label ? "fake" : "real";
        if (s.provenance) rec["kind"] = kind_name(s.provenance->kind);
        sample_list.push_back(rec);
    }
    ordered_json split_counts;
    for (int sp = 0; sp < 3; ++sp)
        split_counts[split_name(sp)] = ordered_json{{"real", counts[sp][0]}, {"fake", counts[sp][1]}};
    manifest["split_counts"] = split_counts;
    manifest["samples"] = sample_list;
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw io_error("cannot write manifest under " + dir);
}

LabeledDataset load_corpus(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw io_error("cannot open corpus manifest in " + dir);
    ordered_json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("corpus manifest parse error: ") + e.what());
    }
    LabeledDataset ds;
    ds.seed = manifest.at("seed").get<uint64_t>();
    ds.per_class = manifest.at("per_class").get<int>();
    ds.frame_side = manifest.at("frame_side").get<int>();
    for (const auto& rec : manifest.at("samples")) {
        const fs::path sdir = fs::path(dir) / rec.at("dir").get<std::string>();
        LabeledSample s;
        const std::string split = rec.at("split").get<std::string>();
        s.split = split == "train" ? 0 : split == "val" ? 1 : 2;
        s.label = rec.at("label").get<std::string>() == "fake" ? 1 : 0;
        s.frame = to_gray_frame(read_image((sdir / "frame.png").string()));
        s.input = to_gray_frame(read_image((sdir / "input.png").string()));
        s.gt = image_to_mask(read_image((sdir / "gt.png").string()));
        std::ifstream sf(sdir / "spec.json");
        if (sf) {
            ordered_json spec;
            sf >> spec;
            if (spec.contains("kind")) {
                ManipulationSpec ms;
                ms.kind = kind_from_name(spec.at("kind").get<std::string>());
                ms.region = region_from_json(spec.at("region"));
                ms.strength = spec.at("strength").get<double>();
                ms.seed = spec.at("manipulation_seed").get<uint64_t>();
                s.provenance = ms;
            }
        }
        ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

TrainResult train_classifier(const LabeledDataset& dataset, const NetConfig& net_cfg,
                             const TrainConfig& train_cfg) {
    return train(dataset.split_view(0), dataset.split_view(1), net_cfg, train_cfg);
}

}  // namespace dymapia
