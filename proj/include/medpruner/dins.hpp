#pragma once
// Dynamic information nucleus selection: the minimal top-weight token set
// whose cumulative mass reaches tau, plus the fixed-ratio baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "medpruner/core.hpp"

namespace medpruner {

// Slack on the tau comparison so tau = 1.0 reliably selects all M tokens
// despite summation rounding.
inline constexpr double kNucleusEpsilon = 1e-9;

namespace detail {

// Token indices ordered by descending weight, ties broken by lower index.
inline std::vector<std::uint32_t> descending_weight_order(const std::vector<double>& weights) {
    std::vector<std::uint32_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    });
    return order;
}

}  // namespace detail

// Smallest k >= 1 such that the top-k weights reach tau (within epsilon).
inline PrimarySet nucleus_select(const ImportanceVector& v, double tau) {
    if (!std::isfinite(tau) || tau <= 0.0 || tau > 1.0)
        throw ValidationError("tau out of range: must be in (0, 1], got " + std::to_string(tau));
    if (v.weights.empty()) throw ValidationError("nucleus_select: empty importance vector");

    const std::vector<std::uint32_t> order = detail::descending_weight_order(v.weights);
    PrimarySet out;
    double mass = 0.0;
    for (std::uint32_t idx : order) {
        mass += v.weights[idx];
        out.indices.push_back(idx);
        if (mass >= tau - kNucleusEpsilon) break;
    }
    out.cumulative_mass = mass;
    return out;
}

// Top-k baseline with k = round(ratio * M), half away from zero, clamped to [1, M].
inline PrimarySet fixed_ratio_select(const ImportanceVector& v, double ratio) {
    if (!std::isfinite(ratio) || ratio <= 0.0 || ratio > 1.0)
        throw ValidationError("ratio out of range: must be in (0, 1], got " + std::to_string(ratio));
    if (v.weights.empty()) throw ValidationError("fixed_ratio_select: empty importance vector");

    const std::uint64_t m = v.weights.size();
    std::uint64_t k = static_cast<std::uint64_t>(std::llround(ratio * static_cast<double>(m)));
    if (k < 1) k = 1;
    if (k > m) k = m;

    const std::vector<std::uint32_t> order = detail::descending_weight_order(v.weights);
    PrimarySet out;
    double mass = 0.0;
    for (std::uint64_t i = 0; i < k; ++i) {
        out.indices.push_back(order[i]);
        mass += v.weights[order[i]];
    }
    out.cumulative_mass = mass;
    return out;
}

}  // namespace medpruner
