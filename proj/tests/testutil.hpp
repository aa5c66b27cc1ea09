#pragma once

#include <cmath>

#include "dymapia/rng.hpp"
#include "dymapia/types.hpp"

namespace testutil {

inline dymapia::GrayFrame random_frame(uint64_t seed, int h, int w) {
    dymapia::Rng rng(seed);
    dymapia::GrayFrame f(h, w);
    for (double& v : f.data) v = rng.uniform();
    return f;
}

inline dymapia::BinaryMask random_mask(uint64_t seed, int h, int w, double density = 0.5) {
    dymapia::Rng rng(seed);
    dymapia::BinaryMask m(h, w, 0);
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    return m;
}

inline bool subset_of(const dymapia::BinaryMask& a, const dymapia::BinaryMask& b) {
    for (size_t i = 0; i < a.size(); ++i)
        if (a.bits[i] && !b.bits[i]) return false;
    return true;
}

inline double max_abs_diff(const dymapia::GrayFrame& a, const dymapia::GrayFrame& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline double mean_abs_diff(const dymapia::GrayFrame& a, const dymapia::GrayFrame& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace testutil
