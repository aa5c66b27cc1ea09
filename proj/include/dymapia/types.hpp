#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dymapia {

// Error taxonomy surfaced through the CLI exit codes:
// invalid inputs/configs map to exit 2, I/O failures to exit 3.
class Error : public std::runtime_error {
public:
    enum class Kind { InvalidInput, Config, Io };

    Error(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline Error invalid_input(std::string msg) { return Error(Error::Kind::InvalidInput, std::move(msg)); }
inline Error config_error(std::string msg) { return Error(Error::Kind::Config, std::move(msg)); }
inline Error io_error(std::string msg) { return Error(Error::Kind::Io, std::move(msg)); }

// Single-channel raster with real-valued intensities, row-major.
// Normalized frames hold values in [0, 1]; t is the frame index in a sequence.
struct GrayFrame {
    int height = 0;
    int width = 0;
    int t = 0;
    std::vector<double> data;

    GrayFrame() = default;
    GrayFrame(int h, int w, double fill = 0.0, int frame_index = 0)
        : height(h), width(w), t(frame_index), data(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw invalid_input("GrayFrame: non-positive dimensions");
    }

    double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return data.size(); }
    bool same_shape(const GrayFrame& o) const { return height == o.height && width == o.width; }
};

// Per-pixel {0,1} anomaly indicator.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int h, int w, uint8_t fill = 0)
        : height(h), width(w), bits(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw invalid_input("BinaryMask: non-positive dimensions");
        if (fill > 1) throw invalid_input("BinaryMask: fill must be 0 or 1");
    }

    uint8_t& at(int y, int x) { return bits[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return bits[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return bits.size(); }
    bool same_shape(const BinaryMask& o) const { return height == o.height && width == o.width; }
    bool same_shape(const GrayFrame& o) const { return height == o.height && width == o.width; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }
    bool any() const { return count() > 0; }

    bool operator==(const BinaryMask& o) const {
        return height == o.height && width == o.width && bits == o.bits;
    }
};

// Full-square structuring element with odd side.
struct StructuringElement {
    int side = 3;

    explicit StructuringElement(int s = 3) : side(s) {
        if (s < 1 || s % 2 == 0) throw invalid_input("StructuringElement: side must be odd and >= 1");
    }
    int radius() const { return side / 2; }
};

// Ordered frames with contiguous t indices starting at 0.
struct FrameSequence {
    std::vector<GrayFrame> frames;
    double fps = 0.0;  // metadata only

    size_t size() const { return frames.size(); }
    bool empty() const { return frames.empty(); }

    void validate() const {
        for (size_t i = 0; i < frames.size(); ++i) {
            if (frames[i].t != static_cast<int>(i))
                throw invalid_input("FrameSequence: t indices must be contiguous from 0");
            if (i > 0 && !frames[i].same_shape(frames[0]))
                throw invalid_input("FrameSequence: all frames must share dimensions");
        }
    }
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Five-point face landmark set used by the aligner.
struct Landmarks {
    Point2 left_eye, right_eye, nose, mouth_left, mouth_right;
};

}  // namespace dymapia
