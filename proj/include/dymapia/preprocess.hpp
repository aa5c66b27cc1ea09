#pragma once

#include <map>
#include <optional>
#include <string>

#include "dymapia/types.hpp"

namespace dymapia {

struct Rect {
    int x = 0, y = 0, w = 0, h = 0;
};

// Per-frame annotation record from a sequence's JSON sidecar. Schema:
//   [{ "t": int, "box": [x,y,w,h]?, "landmarks": {name:[x,y]}? }, ...]
struct FrameAnnotation {
    std::optional<Rect> box;
    std::optional<Landmarks> landmarks;
};

std::map<int, FrameAnnotation> load_annotations(const std::string& path);

// Face segmentation intake. The segmentation model itself is pluggable:
// precomputed masks, annotated boxes, or the self-contained ellipse heuristic.
struct SegmentationSource {
    enum class Mode { ExternalMask, BoundingBox, HeuristicEllipse };

    Mode mode = Mode::HeuristicEllipse;
    std::string mask_dir;                 // ExternalMask: directory of numbered mask files
    std::map<int, Rect> boxes;            // BoundingBox: per-frame rects

    static SegmentationSource heuristic() { return {}; }
    static SegmentationSource external(std::string dir);
    static SegmentationSource from_boxes(std::map<int, Rect> boxes);
};

// Loads a directory of zero-padded numbered PNG/PGM/PPM frames, sorted by
// index. RGB converts to luma Y = 0.299R + 0.587G + 0.114B; values scale to
// [0,1]. Missing indices raise a gap error listing the missing t values.
FrameSequence load_sequence(const std::string& dir_path);

// Returns S_face for the frame. Heuristic mode: centered axis-aligned
// ellipse, semi-axes 0.30*width and 0.40*height.
BinaryMask segment_face(const GrayFrame& frame, const SegmentationSource& src);

// Similarity transform (exact two-point fit over the eyes) mapping
// left/right eye to (0.35*S, 0.40*S), (0.65*S, 0.40*S); bilinear resampling,
// out-of-source pixels 0. Eye distance < 2 px falls back to center-crop.
GrayFrame align(const GrayFrame& frame, const Landmarks& lm, int out_size);

// Declared fallback when no landmarks are available.
GrayFrame align_center_crop(const GrayFrame& frame, int out_size);

// Photometric normalization: z-score, clip to +-3 sigma, affine map of the
// clipped scores onto [0,1]. Constant frames map to all-0.5.
GrayFrame normalize(const GrayFrame& frame);

GrayFrame resize_bilinear(const GrayFrame& frame, int out_h, int out_w);

// The full preprocessing composition: normalize(align(mask_apply(frame, face))).
GrayFrame preprocess_frame(const GrayFrame& frame, const SegmentationSource& src,
                           const std::optional<Landmarks>& lm, int out_size);

}  // namespace dymapia
