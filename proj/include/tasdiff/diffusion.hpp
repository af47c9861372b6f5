#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tasdiff/tensor.hpp"

namespace tasdiff {

// Per-frame class ids with exactly one class per frame; the one-hot matrix
// view is materialized on demand.
struct LabelSequence {
    std::vector<int> ids;
    int num_classes = 0;

    int length() const { return static_cast<int>(ids.size()); }
    Tensor one_hot() const;
    void validate() const;  // ids in range, non-empty
};

// Cumulative signal-retention coefficients, index 0..steps with [0] == 1.
struct DiffusionSchedule {
    int steps = 0;
    std::vector<double> alpha_bar;

    double at(int s) const { return alpha_bar[static_cast<std::size_t>(s)]; }
};

// Cosine schedule; alpha_bar strictly decreases from 1 to ~0.
DiffusionSchedule make_schedule(int steps);

// Affine embedding of one-hot rows into the diffusion space: {0,1} -> -/+scale.
struct LabelCodec {
    double scale = 1.0;

    Tensor encode(const LabelSequence& y) const;
    // Maps probabilities [0,1] into the same +-scale range (used by the sampler).
    Tensor encode_probs(const Tensor& probs) const;
    std::vector<int> decode_argmax(const Tensor& t) const;
};

// y_s = sqrt(abar_s) * y0 + sqrt(1 - abar_s) * noise, 1 <= s <= steps.
Tensor corrupt(const Tensor& y0_encoded, int s, const DiffusionSchedule& schedule,
               const Tensor& noise);

// 0/1 flags for label changes between consecutive frames (length L-1).
std::vector<std::uint8_t> boundary_flags(const LabelSequence& y);

// Gaussian blur with a peak-normalized kernel (support 4*sigma), clamped to [0,1],
// so an isolated boundary keeps target 1.
std::vector<double> smooth_boundaries(const std::vector<std::uint8_t>& b, double sigma);

// Training losses; scalar outputs participate in autodiff through probs.
Tensor loss_ce(const Tensor& probs, const LabelSequence& y0);
Tensor loss_smooth(const Tensor& probs, bool clamp_at_16 = false);
Tensor loss_boundary(const Tensor& probs, const std::vector<double>& boundary_target);
Tensor loss_total(const Tensor& probs, const LabelSequence& y0,
                  const std::vector<double>& boundary_target, bool smooth_clamp = false);

}  // namespace tasdiff
