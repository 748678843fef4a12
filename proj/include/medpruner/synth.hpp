#pragma once
// Closed-form deterministic volume and attention generators for tests, demos,
// and the CLI synth subcommand. No RNG anywhere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "medpruner/core.hpp"
#include "medpruner/saliency.hpp"

namespace medpruner {

// Constant-valued slices stepping up by delta every `block` slices,
// clamped to [0, 1].
inline Volume make_step_volume(std::uint32_t depth, std::uint32_t height, std::uint32_t width,
                               std::uint32_t block, double delta) {
    if (block < 1) throw ValidationError("step volume block must be >= 1");
    if (!(delta >= 0.0) || !std::isfinite(delta))
        throw ValidationError("step volume delta must be finite and >= 0");
    Volume vol = Volume::zeros(depth, height, width);
    vol.validate();
    for (std::uint32_t i = 0; i < depth; ++i) {
        const double value = std::clamp(static_cast<double>(i / block) * delta, 0.0, 1.0);
        float* s = vol.slice(i);
        std::fill(s, s + vol.slice_pixels(), static_cast<float>(value));
    }
    return vol;
}

// Background 0.1 plus a spherical bump of the given amplitude centered at
// (center_slice, H/2, W/2): value = 0.1 + amplitude * max(0, 1 - dist/radius).
inline Volume make_lesion_volume(std::uint32_t depth, std::uint32_t height, std::uint32_t width,
                                 std::uint32_t center_slice, double radius, double amplitude) {
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw ValidationError("lesion radius must be finite and > 0");
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        throw ValidationError("lesion amplitude must be finite and >= 0");
    Volume vol = Volume::zeros(depth, height, width);
    vol.validate();
    if (center_slice >= depth)
        throw ValidationError("lesion center slice " + std::to_string(center_slice) +
                              " out of range for depth " + std::to_string(depth));
    const double cy = static_cast<double>(height) / 2.0;
    const double cx = static_cast<double>(width) / 2.0;
    for (std::uint32_t z = 0; z < depth; ++z) {
        const double dz = static_cast<double>(z) - static_cast<double>(center_slice);
        float* s = vol.slice(z);
        for (std::uint32_t y = 0; y < height; ++y) {
            const double dy = static_cast<double>(y) - cy;
            for (std::uint32_t x = 0; x < width; ++x) {
                const double dx = static_cast<double>(x) - cx;
                const double dist = std::sqrt(dz * dz + dy * dy + dx * dx);
                const double value = 0.1 + amplitude * std::max(0.0, 1.0 - dist / radius);
                s[static_cast<std::size_t>(y) * width + x] = static_cast<float>(value);
            }
        }
    }
    return vol;
}

// Single-head stack whose attention logits are `gap` at the dominant column
// and 0 everywhere else: every Q row is sqrt(D_h) * e1, K is zero except
// K[dominant] = gap * e1. gap = 0 degenerates to uniform attention.
inline HeadStack make_skewed_headstack(std::uint32_t tokens, std::uint32_t head_dim,
                                       std::uint32_t dominant, double logit_gap) {
    if (tokens < 1 || head_dim < 1)
        throw ValidationError("skewed head stack dimensions must be >= 1");
    if (dominant >= tokens)
        throw ValidationError("dominant index " + std::to_string(dominant) +
                              " out of range for " + std::to_string(tokens) + " tokens");
    if (!std::isfinite(logit_gap)) throw ValidationError("logit gap must be finite");
    HeadStack stack;
    stack.num_heads = 1;
    stack.tokens = tokens;
    stack.head_dim = head_dim;
    stack.q.assign(static_cast<std::size_t>(tokens) * head_dim, 0.0f);
    stack.k.assign(static_cast<std::size_t>(tokens) * head_dim, 0.0f);
    const float q0 = static_cast<float>(std::sqrt(static_cast<double>(head_dim)));
    for (std::uint32_t m = 0; m < tokens; ++m)
        stack.q[static_cast<std::size_t>(m) * head_dim] = q0;
    stack.k[static_cast<std::size_t>(dominant) * head_dim] = static_cast<float>(logit_gap);
    return stack;
}

}  // namespace medpruner
