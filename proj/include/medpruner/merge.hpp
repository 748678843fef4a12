#pragma once
// Cluster the redundant (non-primary) tokens: top-importance redundant tokens
// become centers, remaining ones attach to their cosine-nearest center, and
// each cluster is pooled into one mean contextual feature vector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "medpruner/core.hpp"
#include "medpruner/saliency.hpp"

namespace medpruner {

struct MergeOutcome {
    std::vector<TokenCluster> clusters;                 // ascending center index
    std::vector<std::vector<float>> contextual_tokens;  // aligned with clusters
};

// Number of clusters formed from |redundant| tokens. Ratio 0 keeps none;
// otherwise at least one center, at most one per redundant token.
inline std::size_t contextual_cluster_count(std::size_t redundant_count, double contextual_ratio) {
    if (redundant_count == 0 || contextual_ratio <= 0.0) return 0;
    const std::size_t target = static_cast<std::size_t>(
        std::ceil(contextual_ratio * static_cast<double>(redundant_count)));
    return std::min(redundant_count, std::max<std::size_t>(1, target));
}

namespace detail {

// Cosine similarity in double; zero-norm vectors are similar to nothing.
inline double cosine_similarity(const float* a, const float* b, std::uint32_t dim) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

inline MergeOutcome bipartite_merge(std::span<const std::uint32_t> redundant,
                                    const ImportanceVector& v, const TokenFeatures& feats,
                                    double contextual_ratio) {
    if (!std::isfinite(contextual_ratio) || contextual_ratio < 0.0 || contextual_ratio > 1.0)
        throw ValidationError("contextual ratio out of range: must be in [0, 1]");
    MergeOutcome out;
    if (redundant.empty()) return out;
    for (std::uint32_t idx : redundant) {
        if (idx >= v.weights.size())
            throw ValidationError("redundant index " + std::to_string(idx) +
                                  " out of range for " + std::to_string(v.weights.size()) + " tokens");
        if (idx >= feats.tokens)
            throw ValidationError("redundant index " + std::to_string(idx) +
                                  " has no feature vector");
    }

    const std::size_t num_clusters = contextual_cluster_count(redundant.size(), contextual_ratio);
    if (num_clusters == 0) return out;

    // Centers: the highest-weight redundant tokens, ties to the lower index.
    std::vector<std::uint32_t> by_weight(redundant.begin(), redundant.end());
    std::sort(by_weight.begin(), by_weight.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (v.weights[a] != v.weights[b]) return v.weights[a] > v.weights[b];
        return a < b;
    });
    std::vector<std::uint32_t> centers(by_weight.begin(), by_weight.begin() + num_clusters);
    std::sort(centers.begin(), centers.end());

    out.clusters.resize(num_clusters);
    for (std::size_t c = 0; c < num_clusters; ++c) out.clusters[c].center = centers[c];

    // One-shot assignment of every non-center redundant token to its most
    // cosine-similar center; ties go to the lowest center index.
    for (std::size_t i = num_clusters; i < by_weight.size(); ++i) {
        const std::uint32_t tok = by_weight[i];
        std::size_t best = 0;
        double best_sim = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < num_clusters; ++c) {
            const double sim =
                detail::cosine_similarity(feats.token(tok), feats.token(centers[c]), feats.dim);
            if (sim > best_sim) {
                best_sim = sim;
                best = c;
            }
        }
        out.clusters[best].members.push_back(tok);
    }
    for (TokenCluster& cluster : out.clusters) std::sort(cluster.members.begin(), cluster.members.end());

    // Contextual token = unweighted mean of the cluster's feature vectors.
    out.contextual_tokens.resize(num_clusters);
    std::vector<double> acc(feats.dim);
    for (std::size_t c = 0; c < num_clusters; ++c) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* center_feat = feats.token(out.clusters[c].center);
        for (std::uint32_t d = 0; d < feats.dim; ++d) acc[d] += center_feat[d];
        for (std::uint32_t member : out.clusters[c].members) {
            const float* f = feats.token(member);
            for (std::uint32_t d = 0; d < feats.dim; ++d) acc[d] += f[d];
        }
        const double inv = 1.0 / static_cast<double>(1 + out.clusters[c].members.size());
        out.contextual_tokens[c].resize(feats.dim);
        for (std::uint32_t d = 0; d < feats.dim; ++d)
            out.contextual_tokens[c][d] = static_cast<float>(acc[d] * inv);
    }
    return out;
}

}  // namespace medpruner
