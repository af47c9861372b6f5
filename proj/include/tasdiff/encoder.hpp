#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tasdiff/tensor.hpp"

namespace tasdiff {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct TemporalLayerConfig {
    int channels = 64;
    int window = 3;          // shared separable-conv window, odd
    int dilation = 1;
    int maxpool_window = 3;  // boundary gate window, odd
    int ffn_expansion = 2;
    void validate() const;
};

struct EncoderConfig {
    int input_dim = 0;
    int hidden = 64;
    int num_layers = 8;
    int window = 3;
    int maxpool_window = 3;
    int ffn_expansion = 2;
    std::vector<int> dilations;  // empty -> 1, 2, 4, ... per layer

    void validate() const;
    std::vector<int> dilation_schedule() const;
};

// One encoder layer: instance norm, then three gates (boundary max-pool,
// global average, dilated conv), each multiplying its own depthwise-separable
// conv of the normalized input, plus the raw residual. A second norm and a
// two-layer feedforward with residual follow.
class GatedTemporalLayer {
public:
    GatedTemporalLayer(TemporalLayerConfig cfg, std::mt19937_64& rng);

    Tensor forward(const Tensor& x) const;

    // the three gate signals, exposed for tests
    Tensor boundary_gate(const Tensor& z) const;
    Tensor global_gate(const Tensor& z) const;
    Tensor dilation_gate(const Tensor& z) const;

    void collect_params(const std::string& prefix, NamedParams& out) const;
    const TemporalLayerConfig& config() const { return cfg_; }

private:
    Tensor separable(const Tensor& z, const Tensor& dw, const Tensor& pw_w, const Tensor& pw_b) const;

    TemporalLayerConfig cfg_;
    Tensor norm1_gain_, norm1_bias_;
    Tensor dw_boundary_, pw_boundary_w_, pw_boundary_b_;
    Tensor dw_global_, pw_global_w_, pw_global_b_;
    Tensor dw_dilation_, pw_dilation_w_, pw_dilation_b_;
    Tensor global_scale_;    // per-channel scaling of the pooled frame
    Tensor dilated_kernel_;  // dilation-gate depthwise kernel
    Tensor norm2_gain_, norm2_bias_;
    Tensor ffn_w1_, ffn_b1_, ffn_w2_, ffn_b2_;
};

// Stacked gated temporal layers behind a pointwise input projection.
class GatedTemporalEncoder {
public:
    GatedTemporalEncoder(EncoderConfig cfg, std::mt19937_64& rng);

    // features: L x input_dim, finite; returns L x hidden
    Tensor forward(const Tensor& features) const;

    void collect_params(const std::string& prefix, NamedParams& out) const;
    const EncoderConfig& config() const { return cfg_; }
    const std::vector<GatedTemporalLayer>& layers() const { return layers_; }

private:
    EncoderConfig cfg_;
    Tensor proj_w_, proj_b_;
    std::vector<GatedTemporalLayer> layers_;
};

}  // namespace tasdiff
