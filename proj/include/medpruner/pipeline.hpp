#pragma once
// Orchestration: slice filter -> per-slice saliency -> nucleus selection ->
// redundant-token merge, plus the ablation variants, the tau sweep, and the
// baseline strategies used for comparison runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "medpruner/core.hpp"
#include "medpruner/dins.hpp"
#include "medpruner/iaf.hpp"
#include "medpruner/merge.hpp"
#include "medpruner/saliency.hpp"

namespace medpruner {

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
        .count();
}

// Resolves per-slice head stacks and token features for either input path.
// External attention is indexed by original slice index and must match the
// patch grid, so filtering decisions can never desynchronize the lookup.
class SliceTokenSource {
public:
    SliceTokenSource(const Volume& vol, const PruneConfig& cfg,
                     const std::vector<HeadStack>* external)
        : vol_(vol), external_(external), encoder_(cfg) {
        tokens_ = encoder_.tokens_for(vol.height, vol.width);
        if (external_) {
            if (external_->size() < vol.depth)
                throw ValidationError("attention input has " + std::to_string(external_->size()) +
                                      " slice blocks but volume has " +
                                      std::to_string(vol.depth) + " slices");
            for (std::size_t i = 0; i < external_->size(); ++i) {
                if ((*external_)[i].tokens != (*external_)[0].tokens)
                    throw ValidationError("inconsistent token count: attention block " +
                                          std::to_string(i) + " has M=" +
                                          std::to_string((*external_)[i].tokens) + ", expected " +
                                          std::to_string((*external_)[0].tokens));
            }
            if ((*external_)[0].tokens != tokens_)
                throw ValidationError("attention token count " +
                                      std::to_string((*external_)[0].tokens) +
                                      " does not match patch grid " + std::to_string(tokens_) +
                                      " tokens per slice");
        }
    }

    std::uint32_t tokens() const { return tokens_; }

    const HeadStack& stack(std::uint32_t slice) {
        if (external_) return (*external_)[slice];
        ensure_slice(slice);
        if (!stack_valid_) {
            stack_ = encoder_.project_qk(features_);
            stack_valid_ = true;
        }
        return stack_;
    }

    const TokenFeatures& features(std::uint32_t slice) {
        ensure_slice(slice);
        return features_;
    }

private:
    void ensure_slice(std::uint32_t slice) {
        if (current_slice_ == slice && features_valid_) return;
        features_ = encoder_.encode_features(vol_.slice(slice), vol_.height, vol_.width);
        current_slice_ = slice;
        features_valid_ = true;
        stack_valid_ = false;
    }

    const Volume& vol_;
    const std::vector<HeadStack>* external_;
    ToyEncoder encoder_;
    std::uint32_t tokens_ = 0;
    std::uint32_t current_slice_ = 0;
    bool features_valid_ = false;
    bool stack_valid_ = false;
    TokenFeatures features_;
    HeadStack stack_;
};

// Ascending token indices not selected as primary.
inline std::vector<std::uint32_t> redundant_indices(const PrimarySet& primary, std::uint32_t tokens) {
    std::vector<bool> selected(tokens, false);
    for (std::uint32_t idx : primary.indices) selected[idx] = true;
    std::vector<std::uint32_t> out;
    out.reserve(tokens - primary.indices.size());
    for (std::uint32_t i = 0; i < tokens; ++i)
        if (!selected[i]) out.push_back(i);
    return out;
}

// Normalized importance for one slice: aggregate and temperature-softmax.
inline ImportanceVector slice_importance(SliceTokenSource& source, std::uint32_t slice,
                                         const PruneConfig& cfg) {
    return temperature_softmax(aggregate_importance(source.stack(slice)), cfg.temperature);
}

// Rethrows validation failures with the failing stage's name attached.
template <typename Fn>
auto run_stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(name) + " stage: " + e.what());
    }
}

}  // namespace detail

inline PruneResult prune_volume(const Volume& vol, const PruneConfig& cfg,
                                const std::vector<HeadStack>* attention = nullptr) {
    const auto t_total = std::chrono::steady_clock::now();
    vol.validate();
    validate_config(cfg, vol);
    detail::SliceTokenSource source(vol, cfg, attention);

    PruneResult res;
    res.config = cfg;

    auto t0 = std::chrono::steady_clock::now();
    res.slice_selection = detail::run_stage("iaf", [&] { return iaf_filter(vol, cfg.gamma); });
    res.timings.iaf_ms = detail::elapsed_ms(t0);

    const std::uint32_t tokens = source.tokens();
    res.original_tokens = static_cast<std::uint64_t>(vol.depth) * tokens;

    for (std::uint32_t slice : res.slice_selection.retained) {
        SlicePrune sp;
        sp.slice_index = slice;

        t0 = std::chrono::steady_clock::now();
        const ImportanceVector v = detail::run_stage(
            "saliency", [&] { return detail::slice_importance(source, slice, cfg); });
        res.timings.saliency_ms += detail::elapsed_ms(t0);

        t0 = std::chrono::steady_clock::now();
        sp.primary = detail::run_stage("dins", [&] { return nucleus_select(v, cfg.tau); });
        res.timings.dins_ms += detail::elapsed_ms(t0);

        t0 = std::chrono::steady_clock::now();
        const std::vector<std::uint32_t> redundant = detail::redundant_indices(sp.primary, tokens);
        if (!redundant.empty() && cfg.contextual_ratio > 0.0) {
            MergeOutcome mo = detail::run_stage("merge", [&] {
                return bipartite_merge(redundant, v, source.features(slice), cfg.contextual_ratio);
            });
            sp.clusters = std::move(mo.clusters);
            sp.contextual_tokens = std::move(mo.contextual_tokens);
        }
        res.timings.merge_ms += detail::elapsed_ms(t0);

        res.retained_tokens += sp.primary.indices.size() + sp.clusters.size();
        res.slices.push_back(std::move(sp));
    }
    res.r_rate = static_cast<double>(res.retained_tokens) / static_cast<double>(res.original_tokens);
    res.timings.total_ms = detail::elapsed_ms(t_total);
    return res;
}

// One row per pruning variant: which stages were active and what survived.
struct AblationRow {
    std::string variant;
    double r_rate = 0.0;
    std::uint64_t retained_slices = 0;
    std::uint64_t retained_tokens = 0;
};

// Evaluates the stage combinations: original, slice filter alone, token
// nucleus alone, nucleus + redundant clustering, and the full pipeline.
inline std::vector<AblationRow> run_ablation(const Volume& vol, const PruneConfig& cfg,
                                             const std::vector<HeadStack>* attention = nullptr) {
    vol.validate();
    validate_config(cfg, vol);
    detail::SliceTokenSource source(vol, cfg, attention);
    const std::uint32_t tokens = source.tokens();
    const std::uint64_t original = static_cast<std::uint64_t>(vol.depth) * tokens;

    const SliceSelection iaf_sel = iaf_filter(vol, cfg.gamma);
    std::vector<bool> retained_by_iaf(vol.depth, false);
    for (std::uint32_t s : iaf_sel.retained) retained_by_iaf[s] = true;

    // One saliency/nucleus pass over every slice feeds all token-stage variants.
    std::uint64_t primary_all = 0, merged_all = 0, primary_iaf = 0, merged_iaf = 0;
    for (std::uint32_t s = 0; s < vol.depth; ++s) {
        const ImportanceVector v = detail::slice_importance(source, s, cfg);
        const std::uint64_t k = nucleus_select(v, cfg.tau).indices.size();
        const std::uint64_t c = contextual_cluster_count(tokens - k, cfg.contextual_ratio);
        primary_all += k;
        merged_all += k + c;
        if (retained_by_iaf[s]) {
            primary_iaf += k;
            merged_iaf += k + c;
        }
    }

    const auto rate = [original](std::uint64_t kept) {
        return static_cast<double>(kept) / static_cast<double>(original);
    };
    std::vector<AblationRow> rows;
    rows.push_back({"original", 1.0, vol.depth, original});
    rows.push_back({"iaf_only", rate(iaf_sel.retained.size() * static_cast<std::uint64_t>(tokens)),
                    iaf_sel.retained.size(),
                    iaf_sel.retained.size() * static_cast<std::uint64_t>(tokens)});
    rows.push_back({"primary_only", rate(primary_all), vol.depth, primary_all});
    rows.push_back({"primary_redundant", rate(merged_all), vol.depth, merged_all});
    rows.push_back({"full", rate(merged_iaf), iaf_sel.retained.size(), merged_iaf});
    return rows;
}

struct SweepPoint {
    double tau = 0.0;
    double r_rate = 0.0;
    double mean_mass = 0.0;  // mean over retained slices of primary cumulative mass
};

// Token stage per tau on a fixed slice-filter output.
inline std::vector<SweepPoint> tau_sweep(const Volume& vol, const PruneConfig& cfg,
                                         const std::vector<HeadStack>* attention,
                                         const std::vector<double>& taus) {
    for (double tau : taus) {
        if (!std::isfinite(tau) || tau <= 0.0 || tau > 1.0)
            throw ValidationError("tau out of range: must be in (0, 1], got " + std::to_string(tau));
    }
    vol.validate();
    validate_config(cfg, vol);
    detail::SliceTokenSource source(vol, cfg, attention);
    const std::uint32_t tokens = source.tokens();
    const std::uint64_t original = static_cast<std::uint64_t>(vol.depth) * tokens;

    const SliceSelection iaf_sel = iaf_filter(vol, cfg.gamma);
    std::vector<ImportanceVector> per_slice_v;
    per_slice_v.reserve(iaf_sel.retained.size());
    for (std::uint32_t s : iaf_sel.retained) per_slice_v.push_back(detail::slice_importance(source, s, cfg));

    std::vector<SweepPoint> points;
    points.reserve(taus.size());
    for (double tau : taus) {
        SweepPoint p;
        p.tau = tau;
        std::uint64_t kept = 0;
        double mass_sum = 0.0;
        for (const ImportanceVector& v : per_slice_v) {
            const PrimarySet primary = nucleus_select(v, tau);
            const std::uint64_t k = primary.indices.size();
            kept += k + contextual_cluster_count(tokens - k, cfg.contextual_ratio);
            mass_sum += primary.cumulative_mass;
        }
        p.r_rate = static_cast<double>(kept) / static_cast<double>(original);
        p.mean_mass = mass_sum / static_cast<double>(per_slice_v.size());
        points.push_back(p);
    }
    return points;
}

// Fixed-interval slice baseline: indices {0, stride, 2*stride, ...} < depth.
inline SliceSelection uniform_slice_sample(std::uint32_t depth, std::uint32_t stride) {
    if (depth < 1) throw ValidationError("depth must be >= 1");
    if (stride < 1) throw ValidationError("stride must be >= 1");
    SliceSelection sel;
    sel.original_depth = depth;
    for (std::uint64_t i = 0; i < depth; i += stride)
        sel.retained.push_back(static_cast<std::uint32_t>(i));
    return sel;
}

struct CompareRow {
    std::string method;
    double r_rate = 0.0;
    double mean_mass = 0.0;
};

// Adaptive pipeline vs fixed-ratio token selection vs uniform slice sampling.
// The slice baseline uses stride = max(1, round(1/ratio)) so its slice
// retention approximates the requested token ratio.
inline std::vector<CompareRow> compare_methods(const Volume& vol, const PruneConfig& cfg,
                                               const std::vector<HeadStack>* attention,
                                               double ratio) {
    if (!std::isfinite(ratio) || ratio <= 0.0 || ratio > 1.0)
        throw ValidationError("ratio out of range: must be in (0, 1], got " + std::to_string(ratio));
    vol.validate();
    validate_config(cfg, vol);
    detail::SliceTokenSource source(vol, cfg, attention);
    const std::uint32_t tokens = source.tokens();
    const std::uint64_t original = static_cast<std::uint64_t>(vol.depth) * tokens;

    const SliceSelection iaf_sel = iaf_filter(vol, cfg.gamma);
    std::vector<bool> retained_by_iaf(vol.depth, false);
    for (std::uint32_t s : iaf_sel.retained) retained_by_iaf[s] = true;

    std::uint64_t adaptive_kept = 0;
    double adaptive_mass = 0.0;
    std::uint64_t fixed_kept = 0;
    double fixed_mass = 0.0;
    for (std::uint32_t s = 0; s < vol.depth; ++s) {
        const ImportanceVector v = detail::slice_importance(source, s, cfg);
        const PrimarySet fixed = fixed_ratio_select(v, ratio);
        fixed_kept += fixed.indices.size();
        fixed_mass += fixed.cumulative_mass;
        if (retained_by_iaf[s]) {
            const PrimarySet primary = nucleus_select(v, cfg.tau);
            const std::uint64_t k = primary.indices.size();
            adaptive_kept += k + contextual_cluster_count(tokens - k, cfg.contextual_ratio);
            adaptive_mass += primary.cumulative_mass;
        }
    }

    const std::uint32_t stride = static_cast<std::uint32_t>(
        std::max<long long>(1, std::llround(1.0 / ratio)));
    const SliceSelection uniform = uniform_slice_sample(vol.depth, stride);

    std::vector<CompareRow> rows;
    rows.push_back({"medpruner",
                    static_cast<double>(adaptive_kept) / static_cast<double>(original),
                    adaptive_mass / static_cast<double>(iaf_sel.retained.size())});
    rows.push_back({"fixed_ratio", static_cast<double>(fixed_kept) / static_cast<double>(original),
                    fixed_mass / static_cast<double>(vol.depth)});
    rows.push_back({"uniform_slices",
                    static_cast<double>(uniform.retained.size()) / static_cast<double>(vol.depth),
                    1.0});
    return rows;
}

}  // namespace medpruner
