#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dymapia/imageio.hpp"
#include "testutil.hpp"

using namespace dymapia;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "dymapia_imageio_test";
    fs::create_directories(p);
    return p;
}

ImageU8 random_image(uint64_t seed, int h, int w, int c) {
    Rng rng(seed);
    ImageU8 img(h, w, c);
    for (auto& px : img.pixels) px = static_cast<uint8_t>(rng.below(256));
    return img;
}

}  // namespace

TEST_CASE("png gray round trip is lossless") {
    ImageU8 img = random_image(5, 37, 23, 1);
    const std::string path = (temp_dir() / "gray.png").string();
    write_png(path, img);
    ImageU8 back = read_image(path);
    CHECK(back.height == 37);
    CHECK(back.width == 23);
    CHECK(back.channels == 1);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("png rgb round trip is lossless") {
    ImageU8 img = random_image(6, 19, 41, 3);
    const std::string path = (temp_dir() / "rgb.png").string();
    write_png(path, img);
    ImageU8 back = read_image(path);
    CHECK(back.channels == 3);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("pgm round trip is lossless") {
    ImageU8 img = random_image(7, 16, 16, 1);
    const std::string path = (temp_dir() / "img.pgm").string();
    write_pgm(path, img);
    ImageU8 back = read_image(path);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("ascii pgm is readable") {
    const std::string path = (temp_dir() / "ascii.pgm").string();
    std::ofstream out(path);
    out << "P2\n# comment line\n3 2\n255\n0 128 255\n10 20 30\n";
    out.close();
    ImageU8 img = read_image(path);
    CHECK(img.width == 3);
    CHECK(img.height == 2);
    CHECK(img.at(0, 1) == 128);
    CHECK(img.at(1, 2) == 30);
}

TEST_CASE("ppm carries rgb") {
    const std::string path = (temp_dir() / "img.ppm").string();
    ImageU8 img(2, 2, 3);
    img.at(0, 0, 0) = 255;  // red pixel
    std::ofstream out(path, std::ios::binary);
    out << "P6\n2 2\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), 12);
    out.close();
    ImageU8 back = read_image(path);
    CHECK(back.channels == 3);
    CHECK(back.at(0, 0, 0) == 255);
    CHECK(back.at(0, 0, 1) == 0);
}

TEST_CASE("luma conversion uses the 601 coefficients") {
    ImageU8 img(1, 3, 3);
    img.at(0, 0, 0) = 255; img.at(0, 0, 1) = 255; img.at(0, 0, 2) = 255;  // white
    img.at(0, 1, 0) = 255;                                                // pure red
    GrayFrame f = to_gray_frame(img);
    CHECK(f.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.at(0, 1) == doctest::Approx(0.299).epsilon(1e-12));
    CHECK(f.at(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mask serialization uses 0/255 and survives a round trip") {
    BinaryMask m = testutil::random_mask(11, 9, 9);
    ImageU8 img = mask_to_image(m);
    for (auto px : img.pixels) CHECK((px == 0 || px == 255));
    CHECK(image_to_mask(img) == m);

    const std::string path = (temp_dir() / "mask.png").string();
    write_png(path, img);
    CHECK(image_to_mask(read_image(path)) == m);
}

TEST_CASE("png writes are byte-identical across runs") {
    ImageU8 img = random_image(13, 24, 24, 1);
    const std::string p1 = (temp_dir() / "det1.png").string();
    const std::string p2 = (temp_dir() / "det2.png").string();
    write_png(p1, img);
    write_png(p2, img);
    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    std::vector<char> da((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::vector<char> db((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(da == db);
}

TEST_CASE("overlay marks mask pixels in red") {
    GrayFrame f(4, 4, 0.5);
    BinaryMask m(4, 4, 0);
    m.at(1, 2) = 1;
    ImageU8 o = overlay(f, m);
    CHECK(o.channels == 3);
    CHECK(o.at(1, 2, 0) > o.at(1, 2, 1));          // reddened
    CHECK(o.at(0, 0, 0) == o.at(0, 0, 1));          // untouched stays gray
}

TEST_CASE("missing file raises an io error with the path") {
    try {
        read_image("/nonexistent/nope.png");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::Io);
        CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
    }
}

TEST_CASE("corrupt png is rejected") {
    const std::string path = (temp_dir() / "corrupt.png").string();
    std::ofstream out(path, std::ios::binary);
    const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.write(reinterpret_cast<const char*>(sig), 8);
    out << "garbage";
    out.close();
    CHECK_THROWS_AS(read_image(path), Error);
}
