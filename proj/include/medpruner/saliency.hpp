#pragma once
// Per-slice token importance: per-head scaled-dot attention, head/sequence
// aggregation into raw scores, and temperature-softmax normalization.
// Also hosts the deterministic toy encoder that stands in for a real
// vision backbone.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "medpruner/core.hpp"

namespace medpruner {

// Per-slice multi-head query/key matrices, head-major then row-major (M x D_h).
struct HeadStack {
    std::uint32_t num_heads = 0;
    std::uint32_t tokens = 0;    // M
    std::uint32_t head_dim = 0;  // D_h
    std::vector<float> q;
    std::vector<float> k;

    std::size_t head_elems() const { return static_cast<std::size_t>(tokens) * head_dim; }

    const float* q_head(std::uint32_t h) const { return q.data() + h * head_elems(); }
    const float* k_head(std::uint32_t h) const { return k.data() + h * head_elems(); }

    void validate() const {
        if (num_heads < 1 || tokens < 1 || head_dim < 1)
            throw ValidationError("head stack dimensions must be >= 1");
        const std::size_t want = static_cast<std::size_t>(num_heads) * head_elems();
        if (q.size() != want || k.size() != want)
            throw ValidationError("head stack Q/K size does not match heads*M*D_h");
        for (float x : q)
            if (!std::isfinite(x)) throw ValidationError("head stack Q contains non-finite value");
        for (float x : k)
            if (!std::isfinite(x)) throw ValidationError("head stack K contains non-finite value");
    }
};

// M embedded token feature vectors of length E, row-major.
struct TokenFeatures {
    std::uint32_t tokens = 0;  // M
    std::uint32_t dim = 0;     // E
    std::vector<float> data;

    const float* token(std::uint32_t m) const { return data.data() + static_cast<std::size_t>(m) * dim; }
};

// Row-wise softmax of Q K^T / sqrt(D_h) for one head. Returns the M x M
// attention matrix row-major; every row sums to 1.
inline std::vector<double> head_attention(std::span<const float> q, std::span<const float> k,
                                          std::uint32_t tokens, std::uint32_t head_dim) {
    const std::size_t want = static_cast<std::size_t>(tokens) * head_dim;
    if (tokens < 1 || head_dim < 1 || q.size() != want || k.size() != want)
        throw ValidationError("head_attention: Q/K shape mismatch");
    for (float x : q)
        if (!std::isfinite(x)) throw ValidationError("head_attention: non-finite Q input");
    for (float x : k)
        if (!std::isfinite(x)) throw ValidationError("head_attention: non-finite K input");

    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<double> s(static_cast<std::size_t>(tokens) * tokens);
    for (std::uint32_t i = 0; i < tokens; ++i) {
        double* row = s.data() + static_cast<std::size_t>(i) * tokens;
        const float* qi = q.data() + static_cast<std::size_t>(i) * head_dim;
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::uint32_t j = 0; j < tokens; ++j) {
            const float* kj = k.data() + static_cast<std::size_t>(j) * head_dim;
            double dot = 0.0;
            for (std::uint32_t d = 0; d < head_dim; ++d)
                dot += static_cast<double>(qi[d]) * static_cast<double>(kj[d]);
            row[j] = dot * scale;
            if (row[j] > row_max) row_max = row[j];
        }
        double denom = 0.0;
        for (std::uint32_t j = 0; j < tokens; ++j) {
            row[j] = std::exp(row[j] - row_max);
            denom += row[j];
        }
        for (std::uint32_t j = 0; j < tokens; ++j) row[j] /= denom;
    }
    return s;
}

// Raw importance scores: average the per-head attention matrices, then take
// the column mean, i.e. the average attention each token receives.
inline std::vector<double> aggregate_importance(const HeadStack& stack) {
    stack.validate();
    const std::uint32_t m = stack.tokens;
    std::vector<double> acc(m, 0.0);
    for (std::uint32_t h = 0; h < stack.num_heads; ++h) {
        std::vector<double> s = head_attention(
            std::span<const float>(stack.q_head(h), stack.head_elems()),
            std::span<const float>(stack.k_head(h), stack.head_elems()), m, stack.head_dim);
        for (std::uint32_t i = 0; i < m; ++i) {
            const double* row = s.data() + static_cast<std::size_t>(i) * m;
            for (std::uint32_t j = 0; j < m; ++j) acc[j] += row[j];
        }
    }
    const double norm = 1.0 / (static_cast<double>(stack.num_heads) * static_cast<double>(m));
    for (double& x : acc) x *= norm;
    return acc;
}

// Temperature-scaled softmax of raw scores, max-subtracted for stability.
inline ImportanceVector temperature_softmax(const std::vector<double>& scores, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ValidationError("temperature out of range: must be > 0");
    if (scores.empty()) throw ValidationError("temperature_softmax: empty score vector");
    double max_score = -std::numeric_limits<double>::infinity();
    for (double x : scores) {
        if (!std::isfinite(x)) throw ValidationError("temperature_softmax: non-finite score");
        if (x > max_score) max_score = x;
    }
    ImportanceVector v;
    v.weights.resize(scores.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        v.weights[i] = std::exp((scores[i] - max_score) / temperature);
        denom += v.weights[i];
    }
    for (double& w : v.weights) w /= denom;
    return v;
}

// Deterministic stand-in for a vision encoder: closed-form sinusoidal patch
// embedding followed by sinusoidal Q/K projections. No learned state, no RNG.
//
//   x_m    = flattened p x p patch (patch grid row-major, pixels row-major)
//   W_e    [a][b] = sin(a*E + b + 1) / p
//   Wq_h   [a][b] = sin(h*E*D_h + a*D_h + b + 1) / sqrt(E)
//   Wk_h   [a][b] = cos(h*E*D_h + a*D_h + b + 1) / sqrt(E)
//   t = x W_e,  Q_h = t Wq_h,  K_h = t Wk_h
class ToyEncoder {
public:
    explicit ToyEncoder(const PruneConfig& cfg)
        : patch_(cfg.patch_size),
          embed_dim_(cfg.embed_dim),
          num_heads_(cfg.num_heads),
          head_dim_(cfg.head_dim) {
        if (patch_ < 1 || embed_dim_ < 1 || num_heads_ < 1 || head_dim_ < 1)
            throw ValidationError("toy encoder dimensions must be >= 1");
        const std::size_t pp = static_cast<std::size_t>(patch_) * patch_;
        const double inv_p = 1.0 / static_cast<double>(patch_);
        w_embed_.resize(pp * embed_dim_);
        for (std::size_t a = 0; a < pp; ++a)
            for (std::uint32_t b = 0; b < embed_dim_; ++b)
                w_embed_[a * embed_dim_ + b] =
                    std::sin(static_cast<double>(a * embed_dim_ + b + 1)) * inv_p;

        const double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(embed_dim_));
        const std::size_t per_head = static_cast<std::size_t>(embed_dim_) * head_dim_;
        w_query_.resize(static_cast<std::size_t>(num_heads_) * per_head);
        w_key_.resize(w_query_.size());
        for (std::uint32_t h = 0; h < num_heads_; ++h) {
            for (std::uint32_t a = 0; a < embed_dim_; ++a) {
                for (std::uint32_t b = 0; b < head_dim_; ++b) {
                    const double arg = static_cast<double>(
                        static_cast<std::uint64_t>(h) * embed_dim_ * head_dim_ +
                        static_cast<std::uint64_t>(a) * head_dim_ + b + 1);
                    const std::size_t idx = h * per_head + static_cast<std::size_t>(a) * head_dim_ + b;
                    w_query_[idx] = std::sin(arg) * inv_sqrt_e;
                    w_key_[idx] = std::cos(arg) * inv_sqrt_e;
                }
            }
        }
    }

    std::uint32_t tokens_for(std::uint32_t height, std::uint32_t width) const {
        if (height % patch_ != 0)
            throw ValidationError("patch size must divide height: " + std::to_string(patch_) +
                                  " does not divide " + std::to_string(height));
        if (width % patch_ != 0)
            throw ValidationError("patch size must divide width: " + std::to_string(patch_) +
                                  " does not divide " + std::to_string(width));
        return (height / patch_) * (width / patch_);
    }

    // Patch-embed one H x W slice into M = (H/p)(W/p) feature vectors.
    TokenFeatures encode_features(const float* pixels, std::uint32_t height, std::uint32_t width) const {
        const std::uint32_t m_tokens = tokens_for(height, width);
        const std::uint32_t grid_w = width / patch_;
        const std::size_t pp = static_cast<std::size_t>(patch_) * patch_;

        TokenFeatures feats;
        feats.tokens = m_tokens;
        feats.dim = embed_dim_;
        feats.data.resize(static_cast<std::size_t>(m_tokens) * embed_dim_);

        std::vector<double> patch_buf(pp);
        std::vector<double> out(embed_dim_);
        for (std::uint32_t m = 0; m < m_tokens; ++m) {
            const std::uint32_t gy = m / grid_w;
            const std::uint32_t gx = m % grid_w;
            for (std::uint32_t py = 0; py < patch_; ++py) {
                const float* src = pixels + static_cast<std::size_t>(gy * patch_ + py) * width +
                                   static_cast<std::size_t>(gx) * patch_;
                for (std::uint32_t px = 0; px < patch_; ++px)
                    patch_buf[static_cast<std::size_t>(py) * patch_ + px] = src[px];
            }
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t a = 0; a < pp; ++a) {
                const double xa = patch_buf[a];
                const double* wrow = w_embed_.data() + a * embed_dim_;
                for (std::uint32_t b = 0; b < embed_dim_; ++b) out[b] += xa * wrow[b];
            }
            float* dst = feats.data.data() + static_cast<std::size_t>(m) * embed_dim_;
            for (std::uint32_t b = 0; b < embed_dim_; ++b) dst[b] = static_cast<float>(out[b]);
        }
        return feats;
    }

    // Project embedded features to per-head Q/K.
    HeadStack project_qk(const TokenFeatures& feats) const {
        if (feats.dim != embed_dim_)
            throw ValidationError("feature dim does not match encoder embed dim");
        HeadStack stack;
        stack.num_heads = num_heads_;
        stack.tokens = feats.tokens;
        stack.head_dim = head_dim_;
        const std::size_t total = static_cast<std::size_t>(num_heads_) * feats.tokens * head_dim_;
        stack.q.resize(total);
        stack.k.resize(total);

        const std::size_t per_head = static_cast<std::size_t>(embed_dim_) * head_dim_;
        std::vector<double> qrow(head_dim_);
        std::vector<double> krow(head_dim_);
        for (std::uint32_t h = 0; h < num_heads_; ++h) {
            const double* wq = w_query_.data() + h * per_head;
            const double* wk = w_key_.data() + h * per_head;
            for (std::uint32_t m = 0; m < feats.tokens; ++m) {
                const float* t = feats.token(m);
                std::fill(qrow.begin(), qrow.end(), 0.0);
                std::fill(krow.begin(), krow.end(), 0.0);
                for (std::uint32_t e = 0; e < embed_dim_; ++e) {
                    const double te = t[e];
                    const double* wq_row = wq + static_cast<std::size_t>(e) * head_dim_;
                    const double* wk_row = wk + static_cast<std::size_t>(e) * head_dim_;
                    for (std::uint32_t d = 0; d < head_dim_; ++d) {
                        qrow[d] += te * wq_row[d];
                        krow[d] += te * wk_row[d];
                    }
                }
                float* qdst = stack.q.data() + (h * static_cast<std::size_t>(feats.tokens) + m) * head_dim_;
                float* kdst = stack.k.data() + (h * static_cast<std::size_t>(feats.tokens) + m) * head_dim_;
                for (std::uint32_t d = 0; d < head_dim_; ++d) {
                    qdst[d] = static_cast<float>(qrow[d]);
                    kdst[d] = static_cast<float>(krow[d]);
                }
            }
        }
        return stack;
    }

private:
    std::uint32_t patch_;
    std::uint32_t embed_dim_;
    std::uint32_t num_heads_;
    std::uint32_t head_dim_;
    std::vector<double> w_embed_;  // p^2 x E
    std::vector<double> w_query_;  // heads x E x D_h
    std::vector<double> w_key_;
};

// One-shot convenience wrapper over ToyEncoder for a single slice.
inline std::pair<TokenFeatures, HeadStack> toy_encode(const float* pixels, std::uint32_t height,
                                                      std::uint32_t width, const PruneConfig& cfg) {
    ToyEncoder enc(cfg);
    TokenFeatures feats = enc.encode_features(pixels, height, width);
    HeadStack stack = enc.project_qk(feats);
    return {std::move(feats), std::move(stack)};
}

}  // namespace medpruner
