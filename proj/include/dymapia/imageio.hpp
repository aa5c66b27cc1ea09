#pragma once

#include <string>
#include <vector>

#include "dymapia/types.hpp"

namespace dymapia {

// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<uint8_t> pixels;

    ImageU8() = default;
    ImageU8(int h, int w, int c, uint8_t fill = 0)
        : height(h), width(w), channels(c), pixels(static_cast<size_t>(h) * w * c, fill) {}

    uint8_t& at(int y, int x, int c = 0) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int y, int x, int c = 0) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Readers dispatch on the file's magic bytes: PNG (8-bit gray/RGB/RGBA/palette,
// non-interlaced) and PGM/PPM (P2/P5/P6, maxval 255).
ImageU8 read_image(const std::string& path);

// PNG output is written with stored deflate blocks: valid everywhere, larger
// than compressed, and byte-deterministic.
void write_png(const std::string& path, const ImageU8& img);
void write_pgm(const std::string& path, const ImageU8& img);

// Extension-dispatching writer (.png or .pgm).
void write_image(const std::string& path, const ImageU8& img);

// ITU-R 601 luma for RGB inputs, intensities scaled to [0, 1].
GrayFrame to_gray_frame(const ImageU8& img, int t = 0);
ImageU8 to_image(const GrayFrame& frame);

// Masks serialize as single-channel images with values {0, 255}.
ImageU8 mask_to_image(const BinaryMask& mask);
BinaryMask image_to_mask(const ImageU8& img);

// Mask rendered in red over the frame, for visual inspection.
ImageU8 overlay(const GrayFrame& frame, const BinaryMask& mask);

}  // namespace dymapia
