#include "tasdiff/encoder.hpp"

#include <cmath>

namespace tasdiff {

namespace {

Tensor init_weight(int fan_in, int fan_out, std::mt19937_64& rng) {
    return Tensor::randn({fan_in, fan_out}, rng, std::sqrt(2.0 / fan_in), true);
}

Tensor init_bias(int n) {
    Tensor b({1, n});
    b.set_requires_grad(true);
    return b;
}

Tensor init_depthwise(int w, int ch, std::mt19937_64& rng) {
    return Tensor::randn({w, ch}, rng, 1.0 / std::sqrt(static_cast<double>(w)), true);
}

Tensor init_gain(int n, double v) {
    Tensor g = Tensor::full({1, n}, v);
    g.set_requires_grad(true);
    return g;
}

}  // namespace

void TemporalLayerConfig::validate() const {
    if (channels < 1) throw ConfigError("layer channels must be positive");
    if (window < 1 || window % 2 == 0) throw ConfigError("layer window must be odd");
    if (maxpool_window < 1 || maxpool_window % 2 == 0) throw ConfigError("maxpool window must be odd");
    if (dilation < 1) throw ConfigError("dilation must be >= 1");
    if (ffn_expansion < 1) throw ConfigError("ffn expansion must be positive");
}

void EncoderConfig::validate() const {
    if (input_dim < 1) throw ConfigError("encoder input_dim must be positive");
    if (hidden < 1) throw ConfigError("encoder hidden must be positive");
    if (num_layers < 1) throw ConfigError("encoder needs >= 1 layer");
    if (window % 2 == 0 || maxpool_window % 2 == 0) throw ConfigError("encoder windows must be odd");
    if (ffn_expansion < 1) throw ConfigError("ffn expansion must be positive");
    if (!dilations.empty() && static_cast<int>(dilations.size()) != num_layers)
        throw ConfigError("dilation schedule length must equal num_layers");
    for (int d : dilations)
        if (d < 1) throw ConfigError("dilations must be >= 1");
}

std::vector<int> EncoderConfig::dilation_schedule() const {
    if (!dilations.empty()) return dilations;
    std::vector<int> out(static_cast<std::size_t>(num_layers));
    int d = 1;
    for (int i = 0; i < num_layers; ++i) {
        out[static_cast<std::size_t>(i)] = d;
        d *= 2;
    }
    return out;
}

GatedTemporalLayer::GatedTemporalLayer(TemporalLayerConfig cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg_.validate();
    const int h = cfg_.channels, w = cfg_.window;
    norm1_gain_ = init_gain(h, 1.0);
    norm1_bias_ = init_bias(h);
    dw_boundary_ = init_depthwise(w, h, rng);
    pw_boundary_w_ = init_weight(h, h, rng);
    pw_boundary_b_ = init_bias(h);
    dw_global_ = init_depthwise(w, h, rng);
    pw_global_w_ = init_weight(h, h, rng);
    pw_global_b_ = init_bias(h);
    dw_dilation_ = init_depthwise(w, h, rng);
    pw_dilation_w_ = init_weight(h, h, rng);
    pw_dilation_b_ = init_bias(h);
    global_scale_ = init_gain(h, 1.0);
    dilated_kernel_ = init_depthwise(w, h, rng);
    norm2_gain_ = init_gain(h, 1.0);
    norm2_bias_ = init_bias(h);
    const int fh = h * cfg_.ffn_expansion;
    ffn_w1_ = init_weight(h, fh, rng);
    ffn_b1_ = init_bias(fh);
    ffn_w2_ = init_weight(fh, h, rng);
    ffn_b2_ = init_bias(h);
}

Tensor GatedTemporalLayer::separable(const Tensor& z, const Tensor& dw, const Tensor& pw_w,
                                     const Tensor& pw_b) const {
    return pointwise_conv1d(depthwise_conv1d(z, dw, 1), pw_w, pw_b);
}

Tensor GatedTemporalLayer::boundary_gate(const Tensor& z) const {
    return maxpool1d_same(z, cfg_.maxpool_window);
}

Tensor GatedTemporalLayer::global_gate(const Tensor& z) const {
    // pool over time, per-channel scaling, non-linearity, repeat to all frames
    Tensor pooled = global_avgpool_time(z);
    Tensor scaled = relu(mul(pooled, global_scale_));
    return broadcast_time(scaled, z.rows());
}

Tensor GatedTemporalLayer::dilation_gate(const Tensor& z) const {
    return depthwise_conv1d(z, dilated_kernel_, cfg_.dilation);
}

Tensor GatedTemporalLayer::forward(const Tensor& x) const {
    Tensor z = instance_norm_time(x, norm1_gain_, norm1_bias_);
    Tensor mixed = add(
        add(mul(boundary_gate(z), separable(z, dw_boundary_, pw_boundary_w_, pw_boundary_b_)),
            mul(global_gate(z), separable(z, dw_global_, pw_global_w_, pw_global_b_))),
        mul(dilation_gate(z), separable(z, dw_dilation_, pw_dilation_w_, pw_dilation_b_)));
    Tensor u = add(mixed, x);
    Tensor t = instance_norm_time(u, norm2_gain_, norm2_bias_);
    Tensor f = linear(relu(linear(t, ffn_w1_, ffn_b1_)), ffn_w2_, ffn_b2_);
    return add(u, f);
}

void GatedTemporalLayer::collect_params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".norm1.gain", norm1_gain_);
    out.emplace_back(prefix + ".norm1.bias", norm1_bias_);
    out.emplace_back(prefix + ".boundary.dw", dw_boundary_);
    out.emplace_back(prefix + ".boundary.pw_w", pw_boundary_w_);
    out.emplace_back(prefix + ".boundary.pw_b", pw_boundary_b_);
    out.emplace_back(prefix + ".global.dw", dw_global_);
    out.emplace_back(prefix + ".global.pw_w", pw_global_w_);
    out.emplace_back(prefix + ".global.pw_b", pw_global_b_);
    out.emplace_back(prefix + ".dilation.dw", dw_dilation_);
    out.emplace_back(prefix + ".dilation.pw_w", pw_dilation_w_);
    out.emplace_back(prefix + ".dilation.pw_b", pw_dilation_b_);
    out.emplace_back(prefix + ".global.scale", global_scale_);
    out.emplace_back(prefix + ".dilation.kernel", dilated_kernel_);
    out.emplace_back(prefix + ".norm2.gain", norm2_gain_);
    out.emplace_back(prefix + ".norm2.bias", norm2_bias_);
    out.emplace_back(prefix + ".ffn.w1", ffn_w1_);
    out.emplace_back(prefix + ".ffn.b1", ffn_b1_);
    out.emplace_back(prefix + ".ffn.w2", ffn_w2_);
    out.emplace_back(prefix + ".ffn.b2", ffn_b2_);
}

GatedTemporalEncoder::GatedTemporalEncoder(EncoderConfig cfg, std::mt19937_64& rng)
    : cfg_(std::move(cfg)) {
    cfg_.validate();
    proj_w_ = init_weight(cfg_.input_dim, cfg_.hidden, rng);
    proj_b_ = init_bias(cfg_.hidden);
    const auto dils = cfg_.dilation_schedule();
    layers_.reserve(static_cast<std::size_t>(cfg_.num_layers));
    for (int i = 0; i < cfg_.num_layers; ++i) {
        TemporalLayerConfig lc;
        lc.channels = cfg_.hidden;
        lc.window = cfg_.window;
        lc.dilation = dils[static_cast<std::size_t>(i)];
        lc.maxpool_window = cfg_.maxpool_window;
        lc.ffn_expansion = cfg_.ffn_expansion;
        layers_.emplace_back(lc, rng);
    }
}

Tensor GatedTemporalEncoder::forward(const Tensor& features) const {
    features.validate_finite("encoder input");
    if (features.cols() != cfg_.input_dim) throw ShapeError("encoder: feature dim mismatch");
    Tensor x = pointwise_conv1d(features, proj_w_, proj_b_);
    for (const auto& layer : layers_) x = layer.forward(x);
    return x;
}

void GatedTemporalEncoder::collect_params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".proj.w", proj_w_);
    out.emplace_back(prefix + ".proj.b", proj_b_);
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i].collect_params(prefix + ".l" + std::to_string(i), out);
}

}  // namespace tasdiff
