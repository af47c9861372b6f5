#pragma once

#include <random>
#include <vector>

#include "tasdiff/diffusion.hpp"
#include "tasdiff/tensor.hpp"

namespace tasdiff {

struct SamplerConfig {
    int steps = 1000;
    int delta_init = 40;
    double eta = 0.0;  // 0 -> deterministic steps
    double gamma = 2.0;
    double theta_high = 0.997;
    double theta_low = 0.990;
    int delta_min = 1;
    int delta_max = 0;  // 0 -> steps / 5
    bool similarity_on_probs = false;

    void validate() const;
    int effective_delta_max() const { return delta_max > 0 ? delta_max : steps / 5; }
};

struct TrajectoryRow {
    int s = 0;            // step index after this iteration
    int delta_used = 0;   // step size of the jump just taken
    double similarity = 0.0;
    int calls = 0;        // cumulative denoiser calls
    double wall_ms = 0.0; // cumulative
};
using Trajectory = std::vector<TrajectoryRow>;

// Step-size state and bounds; grows on high similarity, shrinks on low.
struct SkipController {
    SamplerConfig cfg;
    int delta = 0;

    explicit SkipController(const SamplerConfig& c) : cfg(c), delta(c.delta_init) {}
    int update(double similarity);
};

int adjust_delta(int delta, double similarity, const SamplerConfig& cfg);

// |a.b| / (|a||b|) over flattened values; 0 (with a warning) on zero norm.
double cosine_similarity_abs(const Tensor& a, const Tensor& b);

// One deterministic/stochastic denoising jump from step s to s_next.
// probs is the denoiser output at s; it is mapped through the codec into the
// diffusion space before the update. rng may be null when sigma == 0.
Tensor ddim_step(const Tensor& latent, const Tensor& probs, int s, int s_next,
                 const DiffusionSchedule& schedule, const LabelCodec& codec, double sigma,
                 std::mt19937_64* rng);

double ddim_sigma(double eta, double ab_s, double ab_next);

// Anything that maps (latent, step) to per-frame class probabilities.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Tensor denoise(const Tensor& latent, int s) const = 0;
};

struct SampleResult {
    Tensor probs;         // prediction from the final denoiser call
    Tensor final_latent;  // latent at s = 0
    Trajectory trajectory;
};

SampleResult infer_fixed(const Denoiser& denoiser, int length, int classes,
                         const DiffusionSchedule& schedule, const LabelCodec& codec,
                         const SamplerConfig& cfg, std::mt19937_64& rng);

SampleResult infer_adaptive(const Denoiser& denoiser, int length, int classes,
                            const DiffusionSchedule& schedule, const LabelCodec& codec,
                            const SamplerConfig& cfg, std::mt19937_64& rng);

}  // namespace tasdiff
