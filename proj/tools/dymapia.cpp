// dymapia: multi-domain manipulation detection pipeline.
// Subcommands: mask, synth, train, eval, predict, profile.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dymapia/analyzers.hpp"
#include "dymapia/eval.hpp"
#include "dymapia/imageio.hpp"
#include "dymapia/imgcore.hpp"
#include "dymapia/net.hpp"
#include "dymapia/parallel.hpp"
#include "dymapia/preprocess.hpp"
#include "dymapia/synth.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace dymapia;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kIoError = 3 };

int log_level() {
    const char* env = std::getenv("DYMAPIA_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "error") return 0;
    if (v == "debug") return 2;
    return 1;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[dymapia] " << msg << "\n";
}

void log_error(const std::string& msg) { std::cerr << "[dymapia] error: " << msg << "\n"; }

// Every tunable in one place: analyzer + net + train + corpus knobs, loadable
// from a flat key = value file, CLI flags win.
struct RunConfig {
    AnalyzerConfig analyzer;
    NetConfig net = NetConfig::lite_preset();
    TrainConfig train;
    CorpusConfig corpus;
    uint64_t seed = 0;
    int jobs = 1;
    int align_size = 256;
    std::string preset = "lite";

    void apply_preset() {
        NetConfig base = preset == "paper" ? NetConfig::paper_preset() : NetConfig::lite_preset();
        base.input_side = net.input_side;
        net = base;
    }
};

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    auto geti = [](const std::string& v) { return std::stoi(v); };
    auto getd = [](const std::string& v) { return std::stod(v); };
    auto getu = [](const std::string& v) { return std::stoull(v); };
    for (const auto& [key, value] : kv) {
        try {
            if (key == "t_freq") cfg.analyzer.t_freq = getd(value);
            else if (key == "k_sigma_freq") cfg.analyzer.k_sigma_freq = getd(value);
            else if (key == "k_sigma_tex") cfg.analyzer.k_sigma_tex = getd(value);
            else if (key == "k_sigma_edge") cfg.analyzer.k_sigma_edge = getd(value);
            else if (key == "k_sigma_temp") cfg.analyzer.k_sigma_temp = getd(value);
            else if (key == "block") cfg.analyzer.block = geti(value);
            else if (key == "canny_sigma") cfg.analyzer.canny_sigma = getd(value);
            else if (key == "canny_lo") cfg.analyzer.canny_lo = getd(value);
            else if (key == "canny_hi") cfg.analyzer.canny_hi = getd(value);
            else if (key == "flow_alpha") cfg.analyzer.flow_alpha = getd(value);
            else if (key == "flow_iters") cfg.analyzer.flow_iters = geti(value);
            else if (key == "morph_side") cfg.analyzer.morph_side = geti(value);
            else if (key == "preset") cfg.preset = value;
            else if (key == "input_side") cfg.net.input_side = geti(value);
            else if (key == "hidden") cfg.net.hidden = geti(value);
            else if (key == "stem_pool") cfg.net.stem_pool = geti(value) != 0;
            else if (key == "lr") cfg.train.lr = getd(value);
            else if (key == "lr_decay") cfg.train.lr_decay = getd(value);
            else if (key == "momentum") cfg.train.momentum = getd(value);
            else if (key == "weight_decay") cfg.train.weight_decay = getd(value);
            else if (key == "batch") cfg.train.batch = geti(value);
            else if (key == "epochs") cfg.train.epochs = geti(value);
            else if (key == "bn_momentum") cfg.train.bn_momentum = getd(value);
            else if (key == "dropout") cfg.train.dropout = getd(value);
            else if (key == "per_class") cfg.corpus.per_class = geti(value);
            else if (key == "frame_side") cfg.corpus.frame_side = geti(value);
            else if (key == "frames_per_sample") cfg.corpus.frames_per_sample = geti(value);
            else if (key == "blur_strength") cfg.corpus.blur_strength = getd(value);
            else if (key == "noise_strength") cfg.corpus.noise_strength = getd(value);
            else if (key == "jitter_strength") cfg.corpus.jitter_strength = getd(value);
            else if (key == "splice_feather") cfg.corpus.splice_feather = geti(value);
            else if (key == "region_min") cfg.corpus.region_min = geti(value);
            else if (key == "region_max") cfg.corpus.region_max = geti(value);
            else if (key == "seed") cfg.seed = getu(value);
            else if (key == "jobs") cfg.jobs = geti(value);
            else if (key == "align_size") cfg.align_size = geti(value);
            else throw config_error("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw config_error("bad value for config key " + key + ": " + value);
        }
    }
}

// The effective config echoed into every run's output directory.
std::string dump_config(const RunConfig& cfg) {
    char buf[2048];
    std::snprintf(buf, sizeof(buf),
                  "t_freq = %g\nk_sigma_freq = %g\nk_sigma_tex = %g\nk_sigma_edge = %g\n"
                  "k_sigma_temp = %g\nblock = %d\ncanny_sigma = %g\ncanny_lo = %g\ncanny_hi = %g\n"
                  "flow_alpha = %g\nflow_iters = %d\nmorph_side = %d\n"
                  "preset = %s\ninput_side = %d\nhidden = %d\nstem_pool = %d\n"
                  "lr = %g\nlr_decay = %g\nmomentum = %g\nweight_decay = %g\nbatch = %d\nepochs = %d\n"
                  "bn_momentum = %g\ndropout = %g\n"
                  "per_class = %d\nframe_side = %d\nframes_per_sample = %d\nblur_strength = %g\n"
                  "noise_strength = %g\njitter_strength = %g\nsplice_feather = %d\n"
                  "region_min = %d\nregion_max = %d\n"
                  "seed = %llu\njobs = %d\nalign_size = %d\n",
                  cfg.analyzer.t_freq, cfg.analyzer.k_sigma_freq, cfg.analyzer.k_sigma_tex,
                  cfg.analyzer.k_sigma_edge, cfg.analyzer.k_sigma_temp, cfg.analyzer.block,
                  cfg.analyzer.canny_sigma, cfg.analyzer.canny_lo, cfg.analyzer.canny_hi,
                  cfg.analyzer.flow_alpha, cfg.analyzer.flow_iters, cfg.analyzer.morph_side,
                  cfg.preset.c_str(), cfg.net.input_side, cfg.net.hidden, cfg.net.stem_pool ? 1 : 0,
                  cfg.train.lr, cfg.train.lr_decay, cfg.train.momentum, cfg.train.weight_decay, cfg.train.batch,
                  cfg.train.epochs, cfg.train.bn_momentum, cfg.train.dropout,
                  cfg.corpus.per_class, cfg.corpus.frame_side, cfg.corpus.frames_per_sample,
                  cfg.corpus.blur_strength, cfg.corpus.noise_strength, cfg.corpus.jitter_strength,
                  cfg.corpus.splice_feather, cfg.corpus.region_min, cfg.corpus.region_max,
                  static_cast<unsigned long long>(cfg.seed), cfg.jobs, cfg.align_size);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
    if (!out) throw io_error("write failed: " + path.string());
}

void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
    write_text(out_dir / "effective_config", dump_config(cfg));
}

std::string frame_name(const char* prefix, int t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06d.png", prefix, t);
    return buf;
}

// ----------------------------------------------------------------- commands

int cmd_mask(const RunConfig& cfg, const std::string& input_dir, const std::string& out_dir,
             const std::string& seg_mode, const std::string& masks_dir,
             const std::string& annotations, const std::string& dump_dir, bool no_preprocess) {
    cfg.analyzer.validate();
    FrameSequence raw = load_sequence(input_dir);
    log_info("loaded " + std::to_string(raw.size()) + " frames from " + input_dir);

    std::map<int, FrameAnnotation> ann;
    if (!annotations.empty()) ann = load_annotations(annotations);

    SegmentationSource src = SegmentationSource::heuristic();
    if (seg_mode == "external") {
        src = SegmentationSource::external(masks_dir);
    } else if (seg_mode == "box") {
        std::map<int, Rect> boxes;
        for (const auto& [t, a] : ann)
            if (a.box) boxes[t] = *a.box;
        src = SegmentationSource::from_boxes(std::move(boxes));
    } else if (seg_mode != "heuristic") {
        throw config_error("unknown segmentation mode: " + seg_mode);
    }

    FrameSequence prepared;
    prepared.fps = raw.fps;
    std::vector<ordered_json> pre_diags;
    if (no_preprocess) {
        prepared = raw;
        for (auto& f : prepared.frames) f = normalize(f);
    } else {
        for (const auto& f : raw.frames) {
            const BinaryMask face = segment_face(f, src);
            if (!face.any())
                pre_diags.push_back(ordered_json{{"t", f.t},
                                                 {"stage", "segmentation"},
                                                 {"message", "empty face mask; frame skippable"}});
            std::optional<Landmarks> lm;
            auto it = ann.find(f.t);
            if (it != ann.end() && it->second.landmarks) lm = it->second.landmarks;
            const GrayFrame masked = mask_apply(f, face);
            GrayFrame p = normalize(lm ? align(masked, *lm, cfg.align_size)
                                       : align_center_crop(masked, cfg.align_size));
            p.t = f.t;
            prepared.frames.push_back(std::move(p));
        }
    }

    BundleResult result = build_bundle(prepared, cfg.analyzer);

    const fs::path out(out_dir);
    const fs::path masks_out = dump_dir.empty() ? out / "masks" : fs::path(dump_dir);
    fs::create_directories(masks_out);
    echo_config(cfg, out);

    for (const auto& b : result.bundles) {
        write_png((masks_out / frame_name("freq", b.t)).string(), mask_to_image(b.freq));
        write_png((masks_out / frame_name("tex", b.t)).string(), mask_to_image(b.tex));
        write_png((masks_out / frame_name("edge", b.t)).string(), mask_to_image(b.edge));
        write_png((masks_out / frame_name("temp", b.t)).string(), mask_to_image(b.temp));
        write_png((masks_out / frame_name("combined", b.t)).string(), mask_to_image(b.combined));
        write_png((masks_out / frame_name("refined", b.t)).string(), mask_to_image(b.refined));
        write_png((masks_out / frame_name("overlay", b.t)).string(),
                  overlay(prepared.frames[b.t], b.refined));
    }

    ordered_json diag;
    diag["frames"] = result.bundles.size();
    ordered_json issues = ordered_json::array();
    for (const auto& d : pre_diags) issues.push_back(d);
    for (const auto& d : result.diagnostics)
        issues.push_back(ordered_json{{"t", d.t}, {"stage", d.stage}, {"message", d.message}});
    diag["diagnostics"] = issues;
    ordered_json per_frame = ordered_json::array();
    for (const auto& b : result.bundles)
        per_frame.push_back(ordered_json{{"t", b.t},
                                         {"freq", b.freq.count()},
                                         {"tex", b.tex.count()},
                                         {"edge", b.edge.count()},
                                         {"temp", b.temp.count()},
                                         {"combined", b.combined.count()},
                                         {"refined", b.refined.count()}});
    diag["mask_areas"] = per_frame;
    write_text(out / "diagnostics.json", diag.dump(2) + "\n");
    log_info("wrote masks for " + std::to_string(result.bundles.size()) + " frames to " +
             masks_out.string());
    return kOk;
}

std::vector<FrameSequence> corpus_sources(const RunConfig& cfg, const std::string& frames_csv) {
    std::vector<FrameSequence> sources;
    if (!frames_csv.empty()) {
        std::string rest = frames_csv;
        while (!rest.empty()) {
            const size_t comma = rest.find(',');
            std::string dir = rest.substr(0, comma);
            if (!dir.empty()) sources.push_back(load_sequence(dir));
            if (comma == std::string::npos) break;
            rest.erase(0, comma + 1);
        }
    } else {
        // Self-contained default: procedural drifting textures.
        const int count = 6;
        const int frames = std::max(cfg.corpus.frames_per_sample + 1, 8);
        for (int i = 0; i < count; ++i)
            sources.push_back(generate_source_sequence(cfg.seed * 1000003ULL + i, frames,
                                                       cfg.corpus.frame_side));
    }
    return sources;
}

int cmd_synth(RunConfig cfg, const std::string& out_dir, const std::string& frames_csv) {
    cfg.corpus.seed = cfg.seed;
    cfg.corpus.analyzer = cfg.analyzer;
    LabeledDataset ds = make_dataset(corpus_sources(cfg, frames_csv), cfg.corpus);
    const fs::path out(out_dir);
    fs::create_directories(out);
    echo_config(cfg, out);
    save_corpus(ds, (out / "corpus").string());
    log_info("corpus: " + std::to_string(ds.samples.size()) + " samples under " +
             (out / "corpus").string());
    return kOk;
}

int cmd_train(RunConfig cfg, const std::string& corpus_dir, const std::string& out_dir) {
    cfg.train.seed = cfg.seed;
    cfg.apply_preset();
    LabeledDataset ds = load_corpus(corpus_dir);
    if (cfg.net.input_side != ds.frame_side) {
        log_info("resizing inputs " + std::to_string(ds.frame_side) + " -> " +
                 std::to_string(cfg.net.input_side));
    }
    TrainResult result = train_classifier(ds, cfg.net, cfg.train);

    const fs::path out(out_dir);
    fs::create_directories(out);
    echo_config(cfg, out);
    save_checkpoint((out / "checkpoint.bin").string(), result.best);

    std::string csv = "epoch,train_loss,val_loss,val_acc\n";
    char buf[128];
    for (const auto& e : result.history) {
        std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f,%.6f\n", e.epoch, e.train_loss, e.val_loss,
                      e.val_acc);
        csv += buf;
    }
    write_text(out / "history.csv", csv);

    ordered_json manifest;
    manifest["preset"] = cfg.net.preset;
    manifest["param_count"] = result.best.trainable_count();
    manifest["seed"] = cfg.seed;
    manifest["epochs"] = cfg.train.epochs;
    manifest["metrics"] = ordered_json{{"best_epoch", result.best_epoch},
                                       {"best_val_acc", result.best_val_acc}};
    write_text(out / "checkpoint.json", manifest.dump(2) + "\n");
    log_info("best val acc " + std::to_string(result.best_val_acc) + " at epoch " +
             std::to_string(result.best_epoch));
    return kOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& corpus_dir, const std::string& checkpoint,
             const std::string& out_dir, const std::string& baselines_file) {
    LabeledDataset ds = load_corpus(corpus_dir);
    NetParams params = load_checkpoint(checkpoint);

    Confusion confusion;
    for (const auto& s : ds.samples) {
        if (s.split != 2) continue;  // test split
        Prediction pred = predict(s.input, BinaryMask(s.input.height, s.input.width, 1), params);
        if (s.label == 1 && pred.fake) ++confusion.tp;
        if (s.label == 0 && pred.fake) ++confusion.fp;
        if (s.label == 1 && !pred.fake) ++confusion.fn;
        if (s.label == 0 && !pred.fake) ++confusion.tn;
    }
    Metrics m = metrics(confusion);

    const fs::path out(out_dir);
    fs::create_directories(out);
    echo_config(cfg, out);
    std::vector<ReportRow> rows = {{"distxcnet", "desk", m}};
    const std::string csv = metrics_csv(rows);
    write_text(out / "metrics.csv", csv);
    std::cout << csv;

    ordered_json j;
    j["model"] = "distxcnet";
    j["dataset"] = "desk";
    j["confusion"] = ordered_json{{"tp", confusion.tp}, {"fp", confusion.fp},
                                  {"fn", confusion.fn}, {"tn", confusion.tn}};
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["accuracy"] = m.accuracy;
    j["degenerate"] = m.degenerate;
    write_text(out / "metrics.json", j.dump(2) + "\n");

    if (!baselines_file.empty()) {
        // CSV: dataset,name,f1 (percent); ours drawn from the desk run
        std::ifstream in(baselines_file);
        if (!in) throw io_error("cannot open baselines: " + baselines_file);
        std::map<std::string, std::vector<BaselineScore>> baselines;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw config_error("baselines: expected dataset,name,f1: " + line);
            baselines[line.substr(0, c1)].push_back(
                {line.substr(c1 + 1, c2 - c1 - 1), std::stod(line.substr(c2 + 1))});
        }
        std::map<std::string, double> ours = {{"desk", m.f1 * 100.0}};
        auto deltas = compare_report(ours, baselines);
        write_text(out / "deltas.csv", deltas_csv(deltas));
    }
    return kOk;
}

int cmd_predict(RunConfig cfg, const std::string& input_dir, const std::string& checkpoint,
                const std::string& out_dir, const std::string& dump_dir, bool no_preprocess) {
    NetParams params = load_checkpoint(checkpoint);
    FrameSequence raw = load_sequence(input_dir);
    FrameSequence prepared;
    if (no_preprocess) {
        prepared = raw;
        for (auto& f : prepared.frames) f = normalize(f);
    } else {
        for (const auto& f : raw.frames) {
            GrayFrame p = preprocess_frame(f, SegmentationSource::heuristic(), std::nullopt,
                                           cfg.align_size);
            p.t = f.t;
            prepared.frames.push_back(std::move(p));
        }
    }
    BundleResult bundles = build_bundle(prepared, cfg.analyzer);

    const fs::path out(out_dir);
    fs::create_directories(out);
    echo_config(cfg, out);
    if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        for (const auto& b : bundles.bundles) {
            write_png((fs::path(dump_dir) / frame_name("refined", b.t)).string(),
                      mask_to_image(b.refined));
            write_png((fs::path(dump_dir) / frame_name("overlay", b.t)).string(),
                      overlay(prepared.frames[b.t], b.refined));
        }
    }

    ordered_json records = ordered_json::array();
    std::string csv = "t,probability,label,low_evidence\n";
    for (const auto& b : bundles.bundles) {
        Prediction pred = predict(prepared.frames[b.t], b.refined, params);
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%s,%d\n", b.t, pred.probability,
                      pred.fake ? "fake" : "real", pred.low_evidence ? 1 : 0);
        csv += buf;
        records.push_back(ordered_json{{"t", b.t},
                                       {"probability", pred.probability},
                                       {"label", pred.fake ? "fake" : "real"},
                                       {"low_evidence", pred.low_evidence}});
    }
    write_text(out / "predictions.csv", csv);
    write_text(out / "predictions.json", records.dump(2) + "\n");
    std::cout << csv;
    return kOk;
}

int cmd_profile(const RunConfig& cfg, const std::string& input_dir, const std::string& out_dir,
                int synth_frames) {
    FrameSequence seq;
    if (!input_dir.empty()) {
        seq = load_sequence(input_dir);
    } else {
        seq = generate_source_sequence(cfg.seed + 71, synth_frames,
                                       std::max(cfg.corpus.frame_side, 3 * cfg.align_size / 2));
    }
    ProfileResult r = profile(seq, cfg.analyzer, cfg.align_size);
    const fs::path out(out_dir);
    fs::create_directories(out);
    echo_config(cfg, out);
    const std::string csv = profile_csv(r);
    write_text(out / "profile.csv", csv);
    std::cout << csv;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DYMAPIA: dynamic anomaly masks + mask-guided DistXCNet classification"};
    app.require_subcommand(1);

    std::string config_file, out_dir = "out";
    uint64_t seed = 0;
    int jobs = 1;
    std::string preset;
    app.add_option("--config", config_file, "flat key = value config file");
    app.add_option("--seed", seed, "global seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--jobs", jobs, "worker threads (default 1, deterministic)");
    app.add_option("--preset", preset, "network preset: paper or lite")
        ->check(CLI::IsMember({"paper", "lite"}));

    // mask
    auto* mask_cmd = app.add_subcommand("mask", "generate refined anomaly masks for a frame dir");
    std::string mask_input, seg_mode = "heuristic", ext_masks, annotations, dump_masks;
    bool no_preprocess = false;
    mask_cmd->add_option("input", mask_input, "frame directory")->required();
    mask_cmd->add_option("--segmentation", seg_mode, "heuristic | external | box");
    mask_cmd->add_option("--masks", ext_masks, "external segmentation mask dir");
    mask_cmd->add_option("--annotations", annotations, "per-sequence JSON (boxes/landmarks)");
    mask_cmd->add_option("--dump-masks", dump_masks, "directory for per-frame mask images");
    mask_cmd->add_flag("--no-preprocess", no_preprocess,
                       "treat frames as already segmented and aligned");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic corpus");
    std::string synth_frames;
    synth_cmd->add_option("--frames", synth_frames, "comma-separated real source frame dirs");

    // train
    auto* train_cmd = app.add_subcommand("train", "train DistXCNet on a corpus");
    std::string train_corpus;
    train_cmd->add_option("corpus", train_corpus, "corpus directory (from synth)")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus test split");
    std::string eval_corpus, eval_ckpt, baselines;
    eval_cmd->add_option("corpus", eval_corpus, "corpus directory")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--baselines", baselines, "baseline CSV (dataset,name,f1)");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "classify frames in a directory");
    std::string pred_input, pred_ckpt, pred_dump;
    bool pred_no_preprocess = false;
    predict_cmd->add_option("input", pred_input, "frame directory")->required();
    predict_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
    predict_cmd->add_option("--dump-masks", pred_dump, "directory for refined masks + overlays");
    predict_cmd->add_flag("--no-preprocess", pred_no_preprocess,
                          "treat frames as already segmented and aligned");

    // profile
    auto* profile_cmd = app.add_subcommand("profile", "stage timing, fused vs independent");
    std::string prof_input;
    int prof_frames = 32;
    profile_cmd->add_option("--frames-dir", prof_input, "frame directory (default: synthetic)");
    profile_cmd->add_option("--synthetic-frames", prof_frames, "frames when no dir given");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_file.empty()) apply_kv(cfg, parse_kv_file(config_file));
        // CLI flags override the config file
        if (app.count("--seed")) cfg.seed = seed;
        if (app.count("--jobs")) cfg.jobs = jobs;
        if (!preset.empty()) cfg.preset = preset;
        cfg.apply_preset();
        cfg.analyzer.validate();
        set_jobs(cfg.jobs);

        if (mask_cmd->parsed())
            return cmd_mask(cfg, mask_input, out_dir, seg_mode, ext_masks, annotations, dump_masks,
                            no_preprocess);
        if (synth_cmd->parsed()) return cmd_synth(cfg, out_dir, synth_frames);
        if (train_cmd->parsed()) return cmd_train(cfg, train_corpus, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(cfg, eval_corpus, eval_ckpt, out_dir, baselines);
        if (predict_cmd->parsed())
            return cmd_predict(cfg, pred_input, pred_ckpt, out_dir, pred_dump, pred_no_preprocess);
        if (profile_cmd->parsed()) return cmd_profile(cfg, prof_input, out_dir, prof_frames);
        log_error("no subcommand");
        return kConfigError;
    } catch (const Error& e) {
        log_error(e.what());
        return e.kind() == Error::Kind::Io ? kIoError : kConfigError;
    } catch (const std::exception& e) {
        log_error(e.what());
        return kConfigError;
    }
}
