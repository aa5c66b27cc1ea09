#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dymapia/imageio.hpp"
#include "dymapia/synth.hpp"
#include "testutil.hpp"

using namespace dymapia;
namespace fs = std::filesystem;

namespace {

const char* cli = DYMAPIA_CLI_PATH;

fs::path work_root() {
    fs::path p = fs::temp_directory_path() / "dymapia_cli_test";
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(cli) + " " + args + " >> " +
                            (work_root() / "cli.log").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct Fixture {
    fs::path root = work_root();
    Fixture() {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    std::string dir(const std::string& name) { return (root / name).string(); }
};

void write_frames(const fs::path& dir, int count, int side, uint64_t seed) {
    fs::create_directories(dir);
    FrameSequence seq = generate_source_sequence(seed, count, side);
    for (int t = 0; t < count; ++t) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06d.png", t);
        write_png((dir / buf).string(), to_image(seq.frames[t]));
    }
}

}  // namespace

TEST_CASE("cli end-to-end: mask, synth, train, eval, predict, profile") {
    Fixture fx;

    // ---- mask over a 10-frame sequence
    write_frames(fx.root / "frames", 10, 64, 42);
    const std::string mask_out = fx.dir("mask_out");
    REQUIRE(run("--out " + mask_out + " mask " + fx.dir("frames") + " --no-preprocess") == 0);
    for (int t = 0; t < 10; ++t) {
        for (const char* kind : {"freq", "tex", "edge", "temp", "combined", "refined", "overlay"}) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s_%06d.png", kind, t);
            CHECK(fs::exists(fs::path(mask_out) / "masks" / buf));
        }
    }
    CHECK(fs::exists(fs::path(mask_out) / "diagnostics.json"));
    CHECK(fs::exists(fs::path(mask_out) / "effective_config"));

    // mask values stay {0, 255}
    ImageU8 img = read_image((fs::path(mask_out) / "masks" / "refined_000003.png").string());
    for (auto px : img.pixels) CHECK((px == 0 || px == 255));

    // ---- mask resumes determinism: rerun gives byte-identical outputs
    const std::string mask_out2 = fx.dir("mask_out2");
    REQUIRE(run("--out " + mask_out2 + " mask " + fx.dir("frames") + " --no-preprocess") == 0);
    CHECK(slurp(fs::path(mask_out) / "masks" / "refined_000007.png") ==
          slurp(fs::path(mask_out2) / "masks" / "refined_000007.png"));

    // ---- synth a small corpus
    std::ofstream cfg(fx.root / "desk.cfg");
    cfg << "per_class = 8\nframe_side = 64\nregion_min = 16\nregion_max = 24\n"
        << "input_side = 64\nepochs = 2\nbatch = 4\n";
    cfg.close();
    const std::string synth_out = fx.dir("synth_out");
    REQUIRE(run("--config " + (fx.root / "desk.cfg").string() + " --seed 5 --out " + synth_out +
                " synth") == 0);
    CHECK(fs::exists(fs::path(synth_out) / "corpus" / "manifest.json"));

    // ---- train on it
    const std::string train_out = fx.dir("train_out");
    REQUIRE(run("--config " + (fx.root / "desk.cfg").string() + " --seed 5 --preset lite --out " +
                train_out + " train " + synth_out + "/corpus") == 0);
    CHECK(fs::exists(fs::path(train_out) / "checkpoint.bin"));
    CHECK(fs::exists(fs::path(train_out) / "checkpoint.json"));
    const std::string history = slurp(fs::path(train_out) / "history.csv");
    CHECK(history.find("epoch,train_loss,val_loss,val_acc") == 0);

    // ---- eval produces the Table-1-shaped CSV
    const std::string eval_out = fx.dir("eval_out");
    REQUIRE(run("--config " + (fx.root / "desk.cfg").string() + " --out " + eval_out + " eval " +
                synth_out + "/corpus --checkpoint " + train_out + "/checkpoint.bin") == 0);
    const std::string metrics = slurp(fs::path(eval_out) / "metrics.csv");
    CHECK(metrics.find("model,dataset,PRE,REC,F1,ACC") == 0);
    CHECK(fs::exists(fs::path(eval_out) / "metrics.json"));

    // ---- predict over the frame dir
    const std::string pred_out = fx.dir("pred_out");
    REQUIRE(run("--config " + (fx.root / "desk.cfg").string() + " --out " + pred_out + " predict " +
                fx.dir("frames") + " --checkpoint " + train_out +
                "/checkpoint.bin --no-preprocess --dump-masks " + pred_out + "/masks") == 0);
    const std::string preds = slurp(fs::path(pred_out) / "predictions.csv");
    CHECK(preds.find("t,probability,label,low_evidence") == 0);
    CHECK(fs::exists(fs::path(pred_out) / "masks" / "overlay_000000.png"));

    // ---- profile emits the stage CSV
    const std::string prof_out = fx.dir("prof_out");
    std::ofstream pcfg(fx.root / "prof.cfg");
    pcfg << "frame_side = 64\nflow_iters = 30\nalign_size = 64\n";
    pcfg.close();
    REQUIRE(run("--config " + (fx.root / "prof.cfg").string() + " --out " + prof_out +
                " profile --synthetic-frames 8") == 0);
    const std::string prof = slurp(fs::path(prof_out) / "profile.csv");
    CHECK(prof.find("stage,ms,bytes") == 0);
    CHECK(prof.find("preprocess") != std::string::npos);
    CHECK(prof.find("fusion") != std::string::npos);
}

TEST_CASE("cli exit codes: empty dir is an io error, bad config a config error") {
    Fixture fx;
    fs::create_directories(fx.root / "empty");
    CHECK(run("--out " + fx.dir("o1") + " mask " + fx.dir("empty")) == 3);

    std::ofstream bad(fx.root / "bad.cfg");
    bad << "t_freq = 2.0\n";  // out of range
    bad.close();
    CHECK(run("--config " + (fx.root / "bad.cfg").string() + " --out " + fx.dir("o2") + " mask " +
              fx.dir("empty")) == 2);

    std::ofstream unknown(fx.root / "unknown.cfg");
    unknown << "no_such_key = 1\n";
    unknown.close();
    CHECK(run("--config " + (fx.root / "unknown.cfg").string() + " --out " + fx.dir("o3") +
              " synth") == 2);
}

TEST_CASE("cli seeded determinism across synth runs") {
    Fixture fx;
    std::ofstream cfg(fx.root / "c.cfg");
    cfg << "per_class = 4\nframe_side = 64\nregion_min = 16\nregion_max = 20\n";
    cfg.close();
    REQUIRE(run("--config " + (fx.root / "c.cfg").string() + " --seed 9 --out " + fx.dir("a") +
                " synth") == 0);
    REQUIRE(run("--config " + (fx.root / "c.cfg").string() + " --seed 9 --out " + fx.dir("b") +
                " synth") == 0);
    CHECK(slurp(fs::path(fx.dir("a")) / "corpus" / "manifest.json") ==
          slurp(fs::path(fx.dir("b")) / "corpus" / "manifest.json"));
}
