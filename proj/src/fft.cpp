#include "dymapia/fft.hpp"

#include <cmath>

namespace dymapia {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
void fft1d(std::complex<double>* a, int n, bool inverse) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? kTwoPi : -kTwoPi) / len;
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

void fft2d_inplace(std::vector<std::complex<double>>& a, int h, int w, bool inverse) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) fft1d(&a[static_cast<size_t>(y) * w], w, inverse);
#pragma omp parallel for schedule(static)
    for (int x = 0; x < w; ++x) {
        std::vector<std::complex<double>> col(h);
        for (int y = 0; y < h; ++y) col[y] = a[static_cast<size_t>(y) * w + x];
        fft1d(col.data(), h, inverse);
        for (int y = 0; y < h; ++y) a[static_cast<size_t>(y) * w + x] = col[y];
    }
}

// DC <-> center swap; an involution for even dims (always even here except 1).
std::vector<std::complex<double>> shift(const std::vector<std::complex<double>>& a, int h, int w) {
    std::vector<std::complex<double>> out(a.size());
    const int hy = h / 2, hx = w / 2;
    for (int y = 0; y < h; ++y) {
        const int sy = (y + hy) % h;
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + x] = a[static_cast<size_t>(sy) * w + (x + hx) % w];
    }
    return out;
}

}  // namespace

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

Spectrum fft2d(const GrayFrame& frame) {
    const int h = next_pow2(frame.height);
    const int w = next_pow2(frame.width);
    std::vector<std::complex<double>> a(static_cast<size_t>(h) * w, {0.0, 0.0});
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x)
            a[static_cast<size_t>(y) * w + x] = {frame.at(y, x), 0.0};
    fft2d_inplace(a, h, w, false);
    Spectrum spec;
    spec.height = h;
    spec.width = w;
    spec.source_height = frame.height;
    spec.source_width = frame.width;
    spec.values = shift(a, h, w);
    return spec;
}

GrayFrame ifft2d(const Spectrum& spec) {
    const int h = spec.height, w = spec.width;
    std::vector<std::complex<double>> a = shift(spec.values, h, w);
    fft2d_inplace(a, h, w, true);
    const double scale = 1.0 / (static_cast<double>(h) * w);
    const int oh = spec.source_height > 0 ? spec.source_height : h;
    const int ow = spec.source_width > 0 ? spec.source_width : w;
    GrayFrame out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at(y, x) = a[static_cast<size_t>(y) * w + x].real() * scale;
    return out;
}

Spectrum highpass(const Spectrum& spec, double t_freq) {
    if (!(t_freq > 0.0 && t_freq < 1.0)) throw invalid_input("highpass: t_freq must be in (0,1)");
    Spectrum out = spec;
    const int h = spec.height, w = spec.width;
    const double cutoff = t_freq * (std::min(h, w) / 2.0);
    const double cy = h / 2.0, cx = w / 2.0;
#pragma omp parallel for schedule(static)
    for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
            const double du = u - cy, dv = v - cx;
            if (std::sqrt(du * du + dv * dv) <= cutoff) out.at(u, v) = {0.0, 0.0};
        }
    }
    return out;
}

}  // namespace dymapia
