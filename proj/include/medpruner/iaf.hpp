#pragma once
// Inter-slice anchor-based filtering: sequentially keep slices whose mean L1
// divergence from the running anchor exceeds gamma.

#include <cmath>
#include <string>

#include "medpruner/core.hpp"

namespace medpruner {

// Mean per-pixel L1 distance between two slices. Symmetric, >= 0.
inline double slice_l1_distance(const Volume& vol, std::uint32_t i, std::uint32_t j) {
    if (i >= vol.depth || j >= vol.depth)
        throw ValidationError("slice index out of range: " +
                              std::to_string(i >= vol.depth ? i : j) + " >= depth " +
                              std::to_string(vol.depth));
    const float* a = vol.slice(i);
    const float* b = vol.slice(j);
    const std::size_t n = vol.slice_pixels();
    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        sum += std::fabs(static_cast<double>(a[p]) - static_cast<double>(b[p]));
    }
    return sum / static_cast<double>(n);
}

// Sequential anchor scan. Slice 0 is always retained; slice i takes over as
// anchor exactly when its distance to the current anchor strictly exceeds
// gamma, so gamma = 0 drops only exact duplicates and gamma < 0 keeps all.
inline SliceSelection iaf_filter(const Volume& vol, double gamma) {
    vol.validate();
    SliceSelection sel;
    sel.original_depth = vol.depth;
    sel.retained.push_back(0);
    std::uint32_t anchor = 0;
    for (std::uint32_t i = 1; i < vol.depth; ++i) {
        if (slice_l1_distance(vol, i, anchor) > gamma) {
            sel.retained.push_back(i);
            anchor = i;
        }
    }
    return sel;
}

}  // namespace medpruner
