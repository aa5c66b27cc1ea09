#pragma once

#include <complex>
#include <vector>

#include "dymapia/types.hpp"

namespace dymapia {

// 2D spectrum in DC-centered (fftshift) layout. Frames are zero-padded to the
// next power of two per axis before the transform; source dims are kept so
// the inverse can crop back.
struct Spectrum {
    int height = 0;
    int width = 0;
    int source_height = 0;
    int source_width = 0;
    std::vector<std::complex<double>> values;

    std::complex<double>& at(int u, int v) { return values[static_cast<size_t>(u) * width + v]; }
    std::complex<double> at(int u, int v) const { return values[static_cast<size_t>(u) * width + v]; }
};

// Forward transform, unnormalized:
//   F(u,v) = sum_{y,x} f(y,x) exp(-2*pi*i*(u*y/H + v*x/W))
// with u the row frequency and v the column frequency.
Spectrum fft2d(const GrayFrame& frame);

// Inverse transform scaled by 1/(H*W), cropped to the source dimensions.
// Real part of the result; for spectra of real frames the imaginary residue
// is numerical noise.
GrayFrame ifft2d(const Spectrum& spec);

// Keeps bins with centered radius sqrt(u^2+v^2) > t_freq * R_nyquist, zeroes
// the rest. R_nyquist = min(height, width) / 2.
Spectrum highpass(const Spectrum& spec, double t_freq);

int next_pow2(int n);

}  // namespace dymapia
