#pragma once
// Core domain types and configuration validation shared by every stage.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace medpruner {

// Thrown for invalid configuration values, invalid domain objects, and
// out-of-range arguments. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Base for everything that can go wrong with files. CLI maps these to exit 2.
class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure (open/read/write).
class IoError : public FileError {
public:
    using FileError::FileError;
};

// Structurally malformed file (magic, version, declared sizes).
class FormatError : public FileError {
public:
    using FileError::FileError;
};

// Structurally valid file carrying unusable values (NaN/Inf payload).
class DataError : public FileError {
public:
    using FileError::FileError;
};

// D slices of H*W intensities, slice-major then row-major.
struct Volume {
    std::uint32_t depth = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> data;

    static Volume zeros(std::uint32_t d, std::uint32_t h, std::uint32_t w) {
        Volume v;
        v.depth = d;
        v.height = h;
        v.width = w;
        v.data.assign(static_cast<std::size_t>(d) * h * w, 0.0f);
        return v;
    }

    std::size_t slice_pixels() const { return static_cast<std::size_t>(height) * width; }
    std::size_t total_voxels() const { return static_cast<std::size_t>(depth) * slice_pixels(); }

    const float* slice(std::uint32_t i) const { return data.data() + i * slice_pixels(); }
    float* slice(std::uint32_t i) { return data.data() + i * slice_pixels(); }

    float& at(std::uint32_t z, std::uint32_t y, std::uint32_t x) {
        return data[(static_cast<std::size_t>(z) * height + y) * width + x];
    }
    float at(std::uint32_t z, std::uint32_t y, std::uint32_t x) const {
        return data[(static_cast<std::size_t>(z) * height + y) * width + x];
    }

    void validate() const {
        if (depth < 1) throw ValidationError("volume depth must be >= 1");
        if (height < 1) throw ValidationError("volume height must be >= 1");
        if (width < 1) throw ValidationError("volume width must be >= 1");
        if (data.size() != total_voxels())
            throw ValidationError("volume data size " + std::to_string(data.size()) +
                                  " does not match D*H*W = " + std::to_string(total_voxels()));
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(data[i]))
                throw ValidationError("volume contains non-finite value at index " + std::to_string(i));
        }
    }
};

// All tunables in one place. embed_dim defaults to patch_size^2 so the patch
// embedding is square by default.
struct PruneConfig {
    double gamma = 0.02;            // slice-filter sensitivity threshold
    double tau = 0.9;               // cumulative-mass information threshold, (0, 1]
    double temperature = 1.0;       // softmax smoothing, > 0
    double contextual_ratio = 0.1;  // fraction of redundant tokens kept as cluster centers, [0, 1]
    std::uint32_t patch_size = 16;  // must divide H and W
    std::uint32_t embed_dim = 256;  // token feature length E
    std::uint32_t num_heads = 4;
    std::uint32_t head_dim = 16;
};

inline void validate_config(const PruneConfig& cfg, const Volume& vol) {
    if (!std::isfinite(cfg.gamma) || cfg.gamma < -1.0)
        throw ValidationError("gamma out of range: must be a finite value >= -1, got " +
                              std::to_string(cfg.gamma));
    if (!std::isfinite(cfg.tau) || cfg.tau <= 0.0 || cfg.tau > 1.0)
        throw ValidationError("tau out of range: must be in (0, 1], got " + std::to_string(cfg.tau));
    if (!std::isfinite(cfg.temperature) || cfg.temperature <= 0.0)
        throw ValidationError("temperature out of range: must be > 0, got " +
                              std::to_string(cfg.temperature));
    if (!std::isfinite(cfg.contextual_ratio) || cfg.contextual_ratio < 0.0 || cfg.contextual_ratio > 1.0)
        throw ValidationError("contextual ratio out of range: must be in [0, 1], got " +
                              std::to_string(cfg.contextual_ratio));
    if (cfg.patch_size < 1) throw ValidationError("patch size must be >= 1");
    if (cfg.embed_dim < 1) throw ValidationError("embed dim must be >= 1");
    if (cfg.num_heads < 1) throw ValidationError("head count must be >= 1");
    if (cfg.head_dim < 1) throw ValidationError("head dim must be >= 1");
    if (vol.height % cfg.patch_size != 0)
        throw ValidationError("patch size must divide height: " + std::to_string(cfg.patch_size) +
                              " does not divide " + std::to_string(vol.height));
    if (vol.width % cfg.patch_size != 0)
        throw ValidationError("patch size must divide width: " + std::to_string(cfg.patch_size) +
                              " does not divide " + std::to_string(vol.width));
}

// Slice indices surviving the filter stage. Always non-empty, always starts at 0.
struct SliceSelection {
    std::vector<std::uint32_t> retained;
    std::uint32_t original_depth = 0;

    void validate() const {
        if (retained.empty()) throw ValidationError("slice selection must be non-empty");
        if (retained.front() != 0) throw ValidationError("slice selection must start at index 0");
        for (std::size_t i = 1; i < retained.size(); ++i) {
            if (retained[i] <= retained[i - 1])
                throw ValidationError("slice selection indices must be strictly increasing");
        }
        if (retained.back() >= original_depth)
            throw ValidationError("slice selection index " + std::to_string(retained.back()) +
                                  " out of range for depth " + std::to_string(original_depth));
    }
};

// Normalized per-token weights for one slice. Sums to 1, every entry positive.
struct ImportanceVector {
    std::vector<double> weights;

    std::size_t token_count() const { return weights.size(); }

    void validate() const {
        if (weights.empty()) throw ValidationError("importance vector must be non-empty");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw ValidationError("importance weights must be strictly positive");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-6)
            throw ValidationError("importance weights must sum to 1 within 1e-6, got " +
                                  std::to_string(sum));
    }
};

// Tokens selected by the nucleus stage, in descending-weight order.
struct PrimarySet {
    std::vector<std::uint32_t> indices;
    double cumulative_mass = 0.0;
};

struct TokenCluster {
    std::uint32_t center = 0;
    std::vector<std::uint32_t> members;
};

// Per-retained-slice pruning detail.
struct SlicePrune {
    std::uint32_t slice_index = 0;
    PrimarySet primary;
    std::vector<TokenCluster> clusters;                 // ascending center index
    std::vector<std::vector<float>> contextual_tokens;  // one mean feature vector per cluster
};

struct StageTimings {
    double iaf_ms = 0.0;
    double saliency_ms = 0.0;
    double dins_ms = 0.0;
    double merge_ms = 0.0;
    double total_ms = 0.0;
};

struct PruneResult {
    PruneConfig config;
    SliceSelection slice_selection;
    std::vector<SlicePrune> slices;  // ascending slice index, one per retained slice
    std::uint64_t original_tokens = 0;
    std::uint64_t retained_tokens = 0;
    double r_rate = 0.0;
    StageTimings timings;
};

}  // namespace medpruner
