#include "tasdiff/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace tasdiff {

void SamplerConfig::validate() const {
    if (steps < 2) throw ConfigError("sampler: steps must be >= 2");
    if (!(theta_low > 0.0 && theta_low <= theta_high && theta_high < 1.0))
        throw ConfigError("sampler: need 0 < theta_low <= theta_high < 1");
    if (gamma <= 1.0) throw ConfigError("sampler: gamma must be > 1");
    if (eta < 0.0 || eta > 1.0) throw ConfigError("sampler: eta must be in [0,1]");
    const int dmax = effective_delta_max();
    if (!(delta_min >= 1 && delta_min <= delta_init && delta_init <= dmax && dmax <= steps))
        throw ConfigError("sampler: need delta_min <= delta_init <= delta_max <= steps");
}

int adjust_delta(int delta, double similarity, const SamplerConfig& cfg) {
    double next = delta;
    if (similarity > cfg.theta_high) {
        next = std::round(delta * cfg.gamma);
    } else if (similarity < cfg.theta_low) {
        next = std::max(1.0, std::round(delta / cfg.gamma));
    }
    int out = static_cast<int>(next);
    out = std::max(cfg.delta_min, std::min(cfg.effective_delta_max(), out));
    return out;
}

int SkipController::update(double similarity) {
    delta = adjust_delta(delta, similarity, cfg);
    return delta;
}

double cosine_similarity_abs(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b)) throw ShapeError("cosine_similarity: shape mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        dot += a.data()[i] * b.data()[i];
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    if (na == 0.0 || nb == 0.0) {
        static bool warned = false;
        if (!warned) {
            std::fprintf(stderr, "[tasdiff] cosine_similarity: zero-norm input, returning 0\n");
            warned = true;
        }
        return 0.0;
    }
    return std::min(1.0, std::abs(dot) / (std::sqrt(na) * std::sqrt(nb)));
}

double ddim_sigma(double eta, double ab_s, double ab_next) {
    if (eta == 0.0) return 0.0;
    return eta * std::sqrt((1.0 - ab_next) / (1.0 - ab_s)) * std::sqrt(1.0 - ab_s / ab_next);
}

Tensor ddim_step(const Tensor& latent, const Tensor& probs, int s, int s_next,
                 const DiffusionSchedule& schedule, const LabelCodec& codec, double sigma,
                 std::mt19937_64* rng) {
    if (!(0 <= s_next && s_next < s && s <= schedule.steps))
        throw ConfigError("ddim_step: need 0 <= s_next < s <= steps");
    if (!same_shape(latent, probs)) throw ShapeError("ddim_step: latent/probs shape mismatch");
    const double ab_s = schedule.at(s);
    const double ab_n = schedule.at(s_next);
    const double rad = 1.0 - ab_n - sigma * sigma;
    if (rad < 0.0) throw ConfigError("ddim_step: sigma^2 exceeds 1 - alpha_bar(s_next)");
    if (sigma > 0.0 && rng == nullptr) throw ConfigError("ddim_step: sigma > 0 needs an rng");

    const Tensor target = codec.encode_probs(probs);
    const double sig_n = std::sqrt(ab_n);
    const double dir = std::sqrt(rad);
    const double sig_s = std::sqrt(ab_s);
    const double denom = std::sqrt(1.0 - ab_s);

    Tensor out(latent.shape());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < out.size(); ++i) {
        const double eps_hat = (latent.data()[i] - sig_s * target.data()[i]) / denom;
        double v = sig_n * target.data()[i] + dir * eps_hat;
        if (sigma > 0.0) v += sigma * normal(*rng);
        out.data()[i] = v;
    }
    autodiff::finalize(out);
    return out;
}

namespace {

SampleResult run_sampler(const Denoiser& denoiser, int length, int classes,
                         const DiffusionSchedule& schedule, const LabelCodec& codec,
                         const SamplerConfig& cfg, std::mt19937_64& rng, bool adaptive) {
    cfg.validate();
    if (length < 1 || classes < 2) throw ConfigError("sampler: bad sequence dims");

    SampleResult res;
    Tensor latent = Tensor::randn({length, classes}, rng);
    SkipController controller(cfg);
    Tensor prev_probs;
    int calls = 0;
    const auto t0 = std::chrono::steady_clock::now();

    int s = cfg.steps;
    while (s > 0) {
        Tensor probs = denoiser.denoise(latent, s);
        ++calls;
        if (adaptive && cfg.similarity_on_probs && prev_probs.defined())
            controller.update(cosine_similarity_abs(prev_probs, probs));

        const int s_next = std::max(0, s - controller.delta);
        const double sigma = cfg.eta > 0.0 ? ddim_sigma(cfg.eta, schedule.at(s), schedule.at(s_next)) : 0.0;
        Tensor next = ddim_step(latent, probs, s, s_next, schedule, codec, sigma,
                                cfg.eta > 0.0 ? &rng : nullptr);

        const double sim = cosine_similarity_abs(latent, next);
        if (adaptive && !cfg.similarity_on_probs) controller.update(sim);

        TrajectoryRow row;
        row.s = s_next;
        row.delta_used = s - s_next;
        row.similarity = sim;
        row.calls = calls;
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        res.trajectory.push_back(row);

        if (cfg.similarity_on_probs) prev_probs = probs;
        res.probs = std::move(probs);
        latent = std::move(next);
        s = s_next;
    }
    res.final_latent = std::move(latent);
    return res;
}

}  // namespace

SampleResult infer_fixed(const Denoiser& denoiser, int length, int classes,
                         const DiffusionSchedule& schedule, const LabelCodec& codec,
                         const SamplerConfig& cfg, std::mt19937_64& rng) {
    return run_sampler(denoiser, length, classes, schedule, codec, cfg, rng, false);
}

SampleResult infer_adaptive(const Denoiser& denoiser, int length, int classes,
                            const DiffusionSchedule& schedule, const LabelCodec& codec,
                            const SamplerConfig& cfg, std::mt19937_64& rng) {
    return run_sampler(denoiser, length, classes, schedule, codec, cfg, rng, true);
}

}  // namespace tasdiff
