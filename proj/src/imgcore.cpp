#include "dymapia/imgcore.hpp"

namespace dymapia {

GrayFrame mask_apply(const GrayFrame& frame, const BinaryMask& mask) {
    if (!mask.same_shape(frame))
        throw invalid_input("mask_apply: mask dimensions do not match frame");
    GrayFrame out(frame.height, frame.width, 0.0, frame.t);
    const size_t n = frame.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i)
        out.data[i] = frame.data[i] * mask.bits[i];
    return out;
}

BinaryMask mask_or(const std::vector<BinaryMask>& masks) {
    if (masks.empty()) throw invalid_input("mask_or: empty mask list");
    for (const auto& m : masks)
        if (!m.same_shape(masks[0]))
            throw invalid_input("mask_or: mixed mask dimensions");
    BinaryMask out(masks[0].height, masks[0].width, 0);
    const size_t n = out.size();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        uint8_t v = 0;
        for (const auto& m : masks) v |= m.bits[i];
        out.bits[i] = v;
    }
    return out;
}

namespace {

// minimum over the SE window = erosion, maximum = dilation.
BinaryMask morph(const BinaryMask& mask, const StructuringElement& se, bool is_erode) {
    const int r = se.radius();
    const int h = mask.height, w = mask.width;
    BinaryMask out(h, w, 0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            uint8_t v = is_erode ? 1 : 0;
            for (int dy = -r; dy <= r && (is_erode ? v : !v); ++dy) {
                const int ny = y + dy;
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx;
                    uint8_t bit = 0;  // zero padding outside the frame
                    if (ny >= 0 && ny < h && nx >= 0 && nx < w) bit = mask.at(ny, nx);
                    if (is_erode) {
                        if (!bit) { v = 0; break; }
                    } else {
                        if (bit) { v = 1; break; }
                    }
                }
            }
            out.at(y, x) = v;
        }
    }
    return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    return morph(mask, se, true);
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    return morph(mask, se, false);
}

BinaryMask open(const BinaryMask& mask, const StructuringElement& se) {
    return dilate(erode(mask, se), se);
}

BinaryMask close(const BinaryMask& mask, const StructuringElement& se) {
    const int r = se.radius();
    if (r == 0) return mask;
    const int h = mask.height, w = mask.width;
    BinaryMask canvas(h + 2 * r, w + 2 * r, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            canvas.at(y + r, x + r) = mask.at(y, x);
    BinaryMask closed = erode(dilate(canvas, se), se);
    BinaryMask out(h, w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x) = closed.at(y + r, x + r);
    return out;
}

BinaryMask refine(const BinaryMask& mask, const StructuringElement& se) {
    return close(open(mask, se), se);
}

}  // namespace dymapia
