#pragma once

#include <random>
#include <vector>

#include "tasdiff/diffusion.hpp"
#include "tasdiff/tensor.hpp"

namespace tasdiff {

enum class MaskKind { Ones, Zeros, Boundary, Relation };

// Per-frame 0/1 gate on the conditioning features, broadcast across channels.
struct ConditionMask {
    MaskKind kind = MaskKind::Ones;
    std::vector<double> values;  // length L, each 0 or 1
};

struct MaskConfig {
    int boundary_radius = 4;
};

ConditionMask make_mask(const LabelSequence& y0, MaskKind kind, const MaskConfig& cfg,
                        std::mt19937_64& rng);

// Draws the kind uniformly over the four variants, then builds the mask.
ConditionMask sample_mask(const LabelSequence& y0, const MaskConfig& cfg, std::mt19937_64& rng);

// cond * mask, broadcast across channels; differentiable through cond.
Tensor apply_mask(const Tensor& cond, const ConditionMask& mask);

}  // namespace tasdiff
