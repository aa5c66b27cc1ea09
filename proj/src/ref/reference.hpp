#pragma once

// Serial reference implementations, kept for testing and benchmarking.
// Each one computes its result by the most direct definition available
// (double-sum DFT, per-pixel set tests, exhaustive block search) and is
// deliberately independent of the optimized kernels in dymapia_core.

#include <complex>
#include <vector>

#include "dymapia/analyzers.hpp"
#include "dymapia/types.hpp"

namespace dymapia::ref {

// O(N^2 M^2) double-sum DFT of an H x W field, unshifted layout:
//   F(u,v) = sum_{y,x} f(y,x) exp(-2*pi*i*(u*y/H + v*x/W))
std::vector<std::complex<double>> naive_dft2d(const std::vector<double>& f, int h, int w);

// Inverse double sum, scaled by 1/(H*W).
std::vector<double> naive_idft2d(const std::vector<std::complex<double>>& F, int h, int w);

// Per-pixel 8-comparison LBP, clockwise from top-left, neighbor >= center.
uint8_t lbp_code_at(const GrayFrame& f, int y, int x);

// Set-definition morphology with zero padding.
BinaryMask erode_brute(const BinaryMask& m, int se_side);
BinaryMask dilate_brute(const BinaryMask& m, int se_side);

// Exhaustive block matching: per block of side `block`, the integer
// displacement in [-radius, radius]^2 minimizing SAD against the next frame.
struct BlockFlow {
    int by, bx;       // block origin
    int dy, dx;       // best displacement
    double sad;
};
std::vector<BlockFlow> block_match(const GrayFrame& f_t, const GrayFrame& f_t1, int block, int radius);

// Direct 6-loop 2D convolution with stride 1, symmetric zero padding `pad`:
// out[oc][y][x] = bias[oc] + sum_{ic,ky,kx} w[oc][ic][ky][kx] * in[ic][y+ky-pad][x+kx-pad]
std::vector<double> conv2d_naive(const std::vector<double>& in, int in_c, int h, int w,
                                 const std::vector<double>& weight, int out_c, int k, int pad,
                                 const std::vector<double>& bias);

// Depthwise 3x3 (pad 1) then 1x1 pointwise mix, both by definition.
std::vector<double> depthwise_naive(const std::vector<double>& in, int c, int h, int w,
                                    const std::vector<double>& kernels);
std::vector<double> pointwise_naive(const std::vector<double>& in, int in_c, int h, int w,
                                    const std::vector<double>& mix, int out_c,
                                    const std::vector<double>& bias);

// Serial 3x3 Sobel pair with replicate border, for edge-detector checks.
void sobel_serial(const GrayFrame& f, std::vector<double>& gx, std::vector<double>& gy);

// Serial Horn-Schunck with identical discretization to the parallel kernel.
FlowField dense_flow_serial(const GrayFrame& f_t, const GrayFrame& f_t1, double alpha, int iters);

}  // namespace dymapia::ref
