#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dymapia/imageio.hpp"
#include "dymapia/imgcore.hpp"
#include "dymapia/preprocess.hpp"
#include "testutil.hpp"

using namespace dymapia;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "dymapia_pre_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_frame(const fs::path& dir, int t, const GrayFrame& f, const char* ext = ".pgm") {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03d%s", t, ext);
    write_image((dir / buf).string(), to_image(f));
}

Landmarks canonical_landmarks(int size) {
    Landmarks lm;
    lm.left_eye = {0.35 * size, 0.40 * size};
    lm.right_eye = {0.65 * size, 0.40 * size};
    lm.nose = {0.50 * size, 0.55 * size};
    lm.mouth_left = {0.40 * size, 0.70 * size};
    lm.mouth_right = {0.60 * size, 0.70 * size};
    return lm;
}

}  // namespace

TEST_CASE("load_sequence reads zero-padded frames in order") {
    fs::path dir = fresh_dir("seq_ok");
    for (int t = 0; t < 10; ++t) write_frame(dir, t, testutil::random_frame(t, 16, 16));
    FrameSequence seq = load_sequence(dir.string());
    CHECK(seq.size() == 10);
    for (int t = 0; t < 10; ++t) CHECK(seq.frames[t].t == t);
}

TEST_CASE("load_sequence reports gaps with the missing indices") {
    fs::path dir = fresh_dir("seq_gap");
    for (int t : {0, 1, 3, 4, 6}) write_frame(dir, t, GrayFrame(16, 16, 0.5));
    try {
        load_sequence(dir.string());
        CHECK(false);
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
    }
}

TEST_CASE("load_sequence converts rgb to luma") {
    fs::path dir = fresh_dir("seq_rgb");
    ImageU8 img(16, 16, 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(y, x, 0) = 255;  // pure red
    write_png((dir / "000000.png").string(), img);
    FrameSequence seq = load_sequence(dir.string());
    CHECK(seq.frames[0].at(3, 3) == doctest::Approx(0.299).epsilon(1e-12));
}

TEST_CASE("load_sequence propagates unreadable files with the path") {
    fs::path dir = fresh_dir("seq_bad");
    std::ofstream(dir / "000.png") << "not a png";
    try {
        load_sequence(dir.string());
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("000.png") != std::string::npos);
    }
}

TEST_CASE("heuristic ellipse contains the center and misses the corner") {
    GrayFrame f(100, 100, 0.5);
    BinaryMask m = segment_face(f, SegmentationSource::heuristic());
    CHECK(m.at(50, 50) == 1);
    CHECK(m.at(0, 0) == 0);
    const double ratio = static_cast<double>(m.count()) / (100.0 * 100.0);
    CHECK(ratio > 0.3);
    CHECK(ratio < 0.5);
}

TEST_CASE("external all-one mask passes through") {
    fs::path dir = fresh_dir("ext_masks");
    write_image((dir / "000000.png").string(), mask_to_image(BinaryMask(20, 20, 1)));
    GrayFrame f(20, 20, 0.5);
    f.t = 0;
    BinaryMask m = segment_face(f, SegmentationSource::external(dir.string()));
    CHECK(m.count() == 400);

    GrayFrame f1(20, 20, 0.5);
    f1.t = 1;  // no mask file for t=1
    CHECK_THROWS_AS(segment_face(f1, SegmentationSource::external(dir.string())), Error);
}

TEST_CASE("bounding box mode is 1 exactly inside the box") {
    GrayFrame f(80, 80, 0.5);
    auto src = SegmentationSource::from_boxes({{0, Rect{10, 10, 50, 50}}});
    BinaryMask m = segment_face(f, src);
    CHECK(m.count() == 2500);
    CHECK(m.at(10, 10) == 1);
    CHECK(m.at(59, 59) == 1);
    CHECK(m.at(9, 10) == 0);
    CHECK(m.at(60, 10) == 0);
}

TEST_CASE("align with canonical landmarks is the identity") {
    const int size = 64;
    GrayFrame f = testutil::random_frame(3, size, size);
    GrayFrame out = align(f, canonical_landmarks(size), size);
    CHECK(testutil::max_abs_diff(out, f) < 1e-6);
}

TEST_CASE("align undoes a 90-degree rotation") {
    const int size = 64;
    GrayFrame f = testutil::random_frame(4, size, size);
    // exact rotation: g(y, x) = f(size-1-x, y), landmarks rotated the same way
    GrayFrame g(size, size, 0.0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) g.at(y, x) = f.at(size - 1 - x, y);
    auto rot = [&](Point2 p) { return Point2{size - 1.0 - p.y, p.x}; };
    Landmarks lm = canonical_landmarks(size);
    Landmarks lm_rot;
    lm_rot.left_eye = rot(lm.left_eye);
    lm_rot.right_eye = rot(lm.right_eye);
    lm_rot.nose = rot(lm.nose);
    lm_rot.mouth_left = rot(lm.mouth_left);
    lm_rot.mouth_right = rot(lm.mouth_right);

    GrayFrame a = align(f, lm, size);
    GrayFrame b = align(g, lm_rot, size);
    CHECK(testutil::mean_abs_diff(a, b) < 1e-3);
}

TEST_CASE("degenerate landmarks fall back to center crop") {
    GrayFrame f = testutil::random_frame(5, 32, 48);
    Landmarks lm;
    lm.left_eye = {10.0, 10.0};
    lm.right_eye = {10.5, 10.0};  // under 2 px apart
    GrayFrame out = align(f, lm, 32);
    CHECK(testutil::max_abs_diff(out, align_center_crop(f, 32)) == 0.0);
}

TEST_CASE("center-crop fallback crops the largest centered square") {
    GrayFrame f(32, 48, 0.0);
    for (int y = 0; y < 32; ++y)
        for (int x = 8; x < 40; ++x) f.at(y, x) = 1.0;  // centered 32x32 block of ones
    GrayFrame out = align_center_crop(f, 32);
    CHECK(out.height == 32);
    CHECK(out.width == 32);
    CHECK(testutil::max_abs_diff(out, GrayFrame(32, 32, 1.0)) < 1e-9);
}

TEST_CASE("normalize maps constants to 0.5") {
    GrayFrame f(16, 16, 0.8);
    GrayFrame out = normalize(f);
    for (double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalize stretches a two-value frame to the ends") {
    // closed form: equal counts of {0.2, 0.8} give z = -1/+1, minmax to 0/1
    GrayFrame f(16, 16, 0.0);
    for (size_t i = 0; i < f.size(); ++i) f.data[i] = i % 2 ? 0.8 : 0.2;
    GrayFrame out = normalize(f);
    for (size_t i = 0; i < f.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(i % 2 ? 1.0 : 0.0).epsilon(1e-12));
}

TEST_CASE("normalize output stays in [0,1]") {
    GrayFrame f = testutil::random_frame(6, 24, 24);
    GrayFrame out = normalize(f);
    for (double v : out.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("normalize is idempotent on already-normalized input") {
    GrayFrame f = testutil::random_frame(8, 24, 24);
    GrayFrame once = normalize(f);
    GrayFrame twice = normalize(once);
    CHECK(testutil::max_abs_diff(once, twice) < 1e-6);
}

TEST_CASE("preprocess_frame equals the explicit composition") {
    GrayFrame f = testutil::random_frame(9, 40, 40);
    auto src = SegmentationSource::heuristic();
    GrayFrame expected = normalize(align(mask_apply(f, segment_face(f, src)),
                                         canonical_landmarks(40), 32));
    GrayFrame got = preprocess_frame(f, src, canonical_landmarks(40), 32);
    CHECK(testutil::max_abs_diff(expected, got) == 0.0);
}

TEST_CASE("annotations load boxes and landmarks") {
    fs::path dir = fresh_dir("ann");
    std::ofstream(dir / "ann.json") << R"([
      {"t": 0, "box": [1, 2, 3, 4]},
      {"t": 1, "landmarks": {"left_eye": [10, 20], "right_eye": [30, 20],
        "nose": [20, 30], "mouth_left": [12, 40], "mouth_right": [28, 40]}}
    ])";
    auto ann = load_annotations((dir / "ann.json").string());
    CHECK(ann.at(0).box.has_value());
    CHECK(ann.at(0).box->w == 3);
    CHECK(ann.at(1).landmarks.has_value());
    CHECK(ann.at(1).landmarks->right_eye.x == doctest::Approx(30.0));
    CHECK(!ann.at(1).box.has_value());
}

TEST_CASE("annotations reject swapped eyes") {
    fs::path dir = fresh_dir("ann_bad");
    std::ofstream(dir / "ann.json") << R"([
      {"t": 0, "landmarks": {"left_eye": [30, 20], "right_eye": [10, 20],
        "nose": [20, 30], "mouth_left": [12, 40], "mouth_right": [28, 40]}}
    ])";
    CHECK_THROWS_AS(load_annotations((dir / "ann.json").string()), Error);
}
