#pragma once

#include <cstdint>
#include <vector>

#include "tasdiff/tensor.hpp"

namespace tasdiff {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    // One update from the accumulated gradients; parameters with no gradient
    // buffer are treated as having zero gradient.
    void step();
    void zero_grad();

    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<Tensor>& params() const { return params_; }

    // checkpoint access
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    void set_step_count(std::int64_t t) { t_ = t; }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::int64_t t_ = 0;
};

}  // namespace tasdiff
