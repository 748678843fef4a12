#pragma once
// Shared seeded generators for randomized property tests. All randomness in
// the suite flows through these so every run sees the same cases.

#include <cstdint>
#include <random>
#include <vector>

#include "medpruner/core.hpp"
#include "medpruner/saliency.hpp"

namespace test_support {

using Rng = std::mt19937;

inline medpruner::Volume random_volume(Rng& rng, std::uint32_t max_depth = 32,
                                       std::uint32_t max_side = 8) {
    std::uniform_int_distribution<std::uint32_t> depth_dist(1, max_depth);
    std::uniform_int_distribution<std::uint32_t> side_dist(1, max_side);
    std::uniform_real_distribution<float> value_dist(0.0f, 1.0f);
    medpruner::Volume vol = medpruner::Volume::zeros(depth_dist(rng), side_dist(rng), side_dist(rng));
    for (float& v : vol.data) v = value_dist(rng);
    return vol;
}

inline medpruner::HeadStack random_headstack(Rng& rng, std::uint32_t max_heads = 4,
                                             std::uint32_t max_tokens = 12,
                                             std::uint32_t max_head_dim = 8) {
    std::uniform_int_distribution<std::uint32_t> heads_dist(1, max_heads);
    std::uniform_int_distribution<std::uint32_t> tokens_dist(1, max_tokens);
    std::uniform_int_distribution<std::uint32_t> dim_dist(1, max_head_dim);
    std::uniform_real_distribution<float> value_dist(-3.0f, 3.0f);
    medpruner::HeadStack s;
    s.num_heads = heads_dist(rng);
    s.tokens = tokens_dist(rng);
    s.head_dim = dim_dist(rng);
    const std::size_t total = static_cast<std::size_t>(s.num_heads) * s.tokens * s.head_dim;
    s.q.resize(total);
    s.k.resize(total);
    for (float& v : s.q) v = value_dist(rng);
    for (float& v : s.k) v = value_dist(rng);
    return s;
}

inline medpruner::ImportanceVector random_importance(Rng& rng, std::size_t tokens) {
    std::uniform_real_distribution<double> value_dist(0.01, 1.0);
    medpruner::ImportanceVector v;
    v.weights.resize(tokens);
    double sum = 0.0;
    for (double& w : v.weights) {
        w = value_dist(rng);
        sum += w;
    }
    for (double& w : v.weights) w /= sum;
    return v;
}

inline medpruner::ImportanceVector uniform_importance(std::size_t tokens) {
    medpruner::ImportanceVector v;
    v.weights.assign(tokens, 1.0 / static_cast<double>(tokens));
    return v;
}

}  // namespace test_support
