#pragma once

#include <vector>

#include "dymapia/types.hpp"

namespace dymapia {

// out(x,y) = frame(x,y) * mask(x,y); frame index preserved.
GrayFrame mask_apply(const GrayFrame& frame, const BinaryMask& mask);

// Pointwise OR of a non-empty list of same-sized masks.
BinaryMask mask_or(const std::vector<BinaryMask>& masks);

// Morphology over the square SE with zero padding: out-of-frame pixels count
// as 0, so erosion shrinks at borders and dilation never wraps.
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);

// Opening = erode then dilate; anti-extensive and idempotent.
BinaryMask open(const BinaryMask& mask, const StructuringElement& se);

// Closing = dilate then erode, computed on a canvas padded by the SE radius
// so the result matches closing on the infinite zero plane. Without the
// padded intermediate, border pixels would lose dilated support that lies
// outside the frame and extensivity would break there.
BinaryMask close(const BinaryMask& mask, const StructuringElement& se);

// Mask refinement: opening removes isolated specks, closing bridges gaps.
BinaryMask refine(const BinaryMask& mask, const StructuringElement& se = StructuringElement(3));

}  // namespace dymapia
