#pragma once

#include <string>
#include <vector>

#include "dymapia/types.hpp"

namespace dymapia {

// Thresholds and knobs for the four modality analyzers. Every anomaly
// predicate is the same statistical rule: flag where the deviation score
// exceeds mean + k_sigma * stddev of the score over the frame.
struct AnalyzerConfig {
    double t_freq = 0.25;        // radial cutoff, fraction of the Nyquist radius
    double k_sigma_freq = 2.0;
    double k_sigma_tex = 2.0;
    double k_sigma_edge = 2.0;
    double k_sigma_temp = 2.0;
    int block = 16;              // texture/edge tile side; partial border tiles allowed
    double canny_sigma = 1.4;
    double canny_lo = 0.1;       // fractions of the max gradient magnitude
    double canny_hi = 0.2;
    double flow_alpha = 1.0;
    int flow_iters = 100;
    int morph_side = 3;          // refinement SE side, odd

    void validate() const {
        if (!(t_freq > 0.0 && t_freq < 1.0)) throw config_error("t_freq must be in (0,1)");
        if (k_sigma_freq <= 0 || k_sigma_tex <= 0 || k_sigma_edge <= 0 || k_sigma_temp <= 0)
            throw config_error("k_sigma thresholds must be > 0");
        if (block < 1) throw config_error("block must be >= 1");
        if (!(canny_lo < canny_hi)) throw config_error("canny_lo must be < canny_hi");
        if (canny_sigma <= 0) throw config_error("canny_sigma must be > 0");
        if (flow_alpha <= 0) throw config_error("flow_alpha must be > 0");
        if (flow_iters < 0) throw config_error("flow_iters must be >= 0");
        if (morph_side < 1 || morph_side % 2 == 0) throw config_error("morph_side must be odd >= 1");
    }
};

// Per-pixel displacement between consecutive frames, pixels/frame.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> u, v;

    FlowField() = default;
    FlowField(int h, int w)
        : height(h), width(w), u(static_cast<size_t>(h) * w, 0.0), v(static_cast<size_t>(h) * w, 0.0) {}

    double& u_at(int y, int x) { return u[static_cast<size_t>(y) * width + x]; }
    double u_at(int y, int x) const { return u[static_cast<size_t>(y) * width + x]; }
    double& v_at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    double v_at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
};

// LBP code raster; border codes are undefined, stored 0, excluded from stats.
struct CodeMap {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> codes;

    uint8_t at(int y, int x) const { return codes[static_cast<size_t>(y) * width + x]; }
};

// The four modality masks plus fusion products for one frame.
struct MaskBundle {
    BinaryMask freq, tex, edge, temp, combined, refined;
    int t = 0;
};

struct Diagnostic {
    int t = 0;
    std::string stage;
    std::string message;
};

// Separable Gaussian blur, replicate borders, kernel side 2*ceil(3*sigma)+1.
GrayFrame gaussian_blur(const GrayFrame& frame, double sigma);

// High-frequency residual anomalies: |ifft(highpass(fft(frame)))| thresholded
// at mean + k_sigma_freq * stddev. Zero-variance residual gives an all-zero mask.
BinaryMask freq_mask(const GrayFrame& frame, const AnalyzerConfig& cfg);

// 8-neighbor LBP at radius 1, bits clockwise from the top-left neighbor,
// bit set iff neighbor >= center.
CodeMap lbp_codes(const GrayFrame& frame);

// Per-tile chi-squared distance between the tile's LBP histogram and the
// frame-wide histogram; whole tiles flagged beyond mean + k_sigma_tex * stddev.
BinaryMask texture_mask(const GrayFrame& frame, const AnalyzerConfig& cfg,
                        std::vector<Diagnostic>* diags = nullptr);

// Canny: Gaussian blur -> 3x3 Sobel -> non-maximum suppression over 4
// quantized directions -> hysteresis at canny_lo/hi fractions of the max
// gradient. Blur and gradients use replicate borders.
BinaryMask canny(const GrayFrame& frame, const AnalyzerConfig& cfg);

// Two-sided tile test on Canny edge density: flags tiles that are unnaturally
// busy or unnaturally smooth relative to the frame.
BinaryMask edge_mask(const GrayFrame& frame, const AnalyzerConfig& cfg,
                     std::vector<Diagnostic>* diags = nullptr);

// Horn-Schunck dense flow: Jacobi iterations from zero init, central-difference
// spatial gradients on the temporal mean frame, I_t = next - prev.
FlowField dense_flow(const GrayFrame& f_t, const GrayFrame& f_t1, const AnalyzerConfig& cfg);

// Deviation of the flow from its componentwise 3x3 median, thresholded at
// mean + k_sigma_temp * stddev. Offset-invariant by construction.
BinaryMask temporal_mask(const FlowField& flow, const AnalyzerConfig& cfg);

struct BundleResult {
    std::vector<MaskBundle> bundles;
    std::vector<Diagnostic> diagnostics;
};

// Runs all four analyzers per frame and fuses: combined = OR of the four,
// refined = morphological refinement of combined. The temporal mask for frame
// t comes from flow(t, t+1); the last frame reuses flow(t-1, t); a single
// frame gets an all-zero temporal mask. A failing analyzer contributes an
// all-zero mask and a diagnostic record; the bundle is never aborted.
BundleResult build_bundle(const FrameSequence& seq, const AnalyzerConfig& cfg);
BundleResult build_bundle(const GrayFrame& frame, const AnalyzerConfig& cfg);

}  // namespace dymapia
