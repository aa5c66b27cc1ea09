#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "dymapia/fft.hpp"
#include "ref/reference.hpp"
#include "testutil.hpp"

using namespace dymapia;

namespace {

// DC-centered index -> unshifted index, for comparing against the oracle.
std::complex<double> unshifted(const Spectrum& s, int u, int v) {
    return s.at((u + s.height / 2) % s.height, (v + s.width / 2) % s.width);
}

}  // namespace

TEST_CASE("constant frame concentrates in the DC bin") {
    const double c = 0.37;
    GrayFrame f(8, 8, c);
    Spectrum s = fft2d(f);
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            const std::complex<double> val = unshifted(s, u, v);
            if (u == 0 && v == 0) {
                CHECK(std::abs(val - std::complex<double>(c * 64.0, 0.0)) < 1e-9);
            } else {
                CHECK(std::abs(val) < 1e-9);
            }
        }
}

TEST_CASE("delta impulse has flat magnitude spectrum") {
    GrayFrame f(8, 8, 0.0);
    f.at(0, 0) = 1.0;
    Spectrum s = fft2d(f);
    for (const auto& v : s.values) CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);
}

TEST_CASE("fft2d matches the naive double-sum oracle") {
    for (int size : {8, 16}) {
        GrayFrame f = testutil::random_frame(42 + size, size, size);
        Spectrum s = fft2d(f);
        auto oracle = ref::naive_dft2d(f.data, size, size);
        double max_diff = 0.0;
        for (int u = 0; u < size; ++u)
            for (int v = 0; v < size; ++v)
                max_diff = std::max(max_diff,
                                    std::abs(unshifted(s, u, v) - oracle[static_cast<size_t>(u) * size + v]));
        CHECK(max_diff < 1e-9);
    }
}

TEST_CASE("round trip is the identity") {
    GrayFrame f = testutil::random_frame(7, 12, 10);  // forces padding to 16x16
    GrayFrame back = ifft2d(fft2d(f));
    CHECK(back.height == 12);
    CHECK(back.width == 10);
    CHECK(testutil::max_abs_diff(back, f) < 1e-9);
}

TEST_CASE("spectrum round trip through the inverse") {
    GrayFrame f = testutil::random_frame(9, 16, 16);
    Spectrum s = fft2d(f);
    Spectrum s2 = fft2d(ifft2d(s));
    double max_diff = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i)
        max_diff = std::max(max_diff, std::abs(s.values[i] - s2.values[i]));
    CHECK(max_diff < 1e-9);
}

TEST_CASE("Parseval in the forward-unnormalized convention") {
    GrayFrame f = testutil::random_frame(11, 16, 16);
    Spectrum s = fft2d(f);
    double spatial = 0.0;
    for (double v : f.data) spatial += v * v;
    double spectral = 0.0;
    for (const auto& v : s.values) spectral += std::norm(v);
    CHECK(std::abs(spectral - 256.0 * spatial) / (256.0 * spatial) < 1e-9);
}

TEST_CASE("Hermitian symmetry for real input") {
    GrayFrame f = testutil::random_frame(13, 16, 16);
    Spectrum s = fft2d(f);
    const int n = 16;
    for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
            const auto a = unshifted(s, u, v);
            const auto b = std::conj(unshifted(s, (n - u) % n, (n - v) % n));
            CHECK(std::abs(a - b) < 1e-9);
        }
}

TEST_CASE("highpass keeps exactly the bins outside the cutoff radius") {
    GrayFrame f(16, 16, 0.0);
    f.at(0, 0) = 1.0;  // flat spectrum: every surviving bin has magnitude 1
    Spectrum s = highpass(fft2d(f), 0.5);
    const double cutoff = 0.5 * 8.0;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            const double du = i - 8.0, dv = j - 8.0;
            const bool survives = std::sqrt(du * du + dv * dv) > cutoff;
            CHECK(std::abs(std::abs(s.at(i, j)) - (survives ? 1.0 : 0.0)) < 1e-12);
        }
}

TEST_CASE("highpass at cutoff just under 1 removes smooth input almost entirely") {
    GrayFrame f(32, 32, 0.0);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            f.at(y, x) = 0.5 + 0.4 * std::cos(2.0 * 3.14159265358979 * y / 32.0);
    Spectrum s = fft2d(f);
    double total = 0.0;
    for (const auto& v : s.values) total += std::norm(v);
    Spectrum hp = highpass(s, 0.999);
    double kept = 0.0;
    for (const auto& v : hp.values) kept += std::norm(v);
    CHECK(kept < 1e-6 * total);
}

TEST_CASE("highpass and its complement partition the energy") {
    GrayFrame f = testutil::random_frame(21, 16, 16);
    Spectrum s = fft2d(f);
    Spectrum hp = highpass(s, 0.4);
    double e_total = 0.0, e_hp = 0.0, e_lp = 0.0;
    for (size_t i = 0; i < s.values.size(); ++i) {
        e_total += std::norm(s.values[i]);
        e_hp += std::norm(hp.values[i]);
        e_lp += std::norm(s.values[i] - hp.values[i]);
    }
    CHECK(std::abs(e_hp + e_lp - e_total) / e_total < 1e-9);
}

TEST_CASE("highpass rejects out-of-range cutoffs") {
    Spectrum s = fft2d(GrayFrame(8, 8, 0.1));
    CHECK_THROWS_AS(highpass(s, 0.0), Error);
    CHECK_THROWS_AS(highpass(s, 1.0), Error);
}
