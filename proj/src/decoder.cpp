#include "tasdiff/decoder.hpp"

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

Tensor init_gain(int n) {
    Tensor g = Tensor::full({1, n}, 1.0);
    g.set_requires_grad(true);
    return g;
}

}  // namespace

void DecoderConfig::validate() const {
    if (num_classes < 2) throw ConfigError("decoder needs >= 2 classes");
    if (cond_dim < 1 || hidden < 1) throw ConfigError("decoder dims must be positive");
    if (num_blocks < 1) throw ConfigError("decoder needs >= 1 block");
    if (heads < 1 || hidden % heads != 0) throw ConfigError("heads must divide hidden");
    if (window % 2 == 0) throw ConfigError("decoder window must be odd");
    if (ffn_expansion < 1) throw ConfigError("ffn expansion must be positive");
    if (step_dim < 0 || (step_dim > 0 && step_dim % 2 != 0))
        throw ConfigError("step_dim must be even");
    if (!dilations.empty() && static_cast<int>(dilations.size()) != num_blocks)
        throw ConfigError("decoder dilation schedule length mismatch");
}

std::vector<int> DecoderConfig::dilation_schedule() const {
    if (!dilations.empty()) return dilations;
    std::vector<int> out(static_cast<std::size_t>(num_blocks));
    int d = 1;
    for (int i = 0; i < num_blocks; ++i) {
        out[static_cast<std::size_t>(i)] = d;
        d *= 2;
    }
    return out;
}

Tensor sinusoidal_step_code(int s, int dim) {
    if (dim < 2 || dim % 2 != 0) throw ConfigError("sinusoidal dim must be even");
    Tensor t({1, dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        t.data()[2 * i] = std::sin(s * freq);
        t.data()[2 * i + 1] = std::cos(s * freq);
    }
    return t;
}

DenoisingDecoder::DenoisingDecoder(DecoderConfig cfg, std::mt19937_64& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int h = cfg_.hidden, sd = cfg_.effective_step_dim();
    step_w1_ = init_weight(sd, h, rng);
    step_b1_ = init_bias(h);
    step_w2_ = init_weight(h, h, rng);
    step_b2_ = init_bias(h);
    in_proj_w_ = init_weight(cfg_.num_classes + cfg_.cond_dim, h, rng);
    in_proj_b_ = init_bias(h);

    const auto dils = cfg_.dilation_schedule();
    blocks_.reserve(static_cast<std::size_t>(cfg_.num_blocks));
    for (int i = 0; i < cfg_.num_blocks; ++i) {
        Block b;
        b.dilation = dils[static_cast<std::size_t>(i)];
        b.norm1_gain = init_gain(h);
        b.norm1_bias = init_bias(h);
        b.conv_dw = Tensor::randn({cfg_.window, h}, rng, 1.0 / std::sqrt(static_cast<double>(cfg_.window)), true);
        b.conv_pw_w = init_weight(h, h, rng);
        b.conv_pw_b = init_bias(h);
        b.norm2_gain = init_gain(h);
        b.norm2_bias = init_bias(h);
        b.q_w = init_weight(h, h, rng);
        b.q_b = init_bias(h);
        b.k_w = init_weight(cfg_.cond_dim, h, rng);
        b.k_b = init_bias(h);
        b.v_w = init_weight(cfg_.cond_dim, h, rng);
        b.v_b = init_bias(h);
        b.norm3_gain = init_gain(h);
        b.norm3_bias = init_bias(h);
        b.ffn_w1 = init_weight(h, h * cfg_.ffn_expansion, rng);
        b.ffn_b1 = init_bias(h * cfg_.ffn_expansion);
        b.ffn_w2 = init_weight(h * cfg_.ffn_expansion, h, rng);
        b.ffn_b2 = init_bias(h);
        blocks_.push_back(std::move(b));
    }
    head_w_ = init_weight(h, cfg_.num_classes, rng);
    head_b_ = init_bias(cfg_.num_classes);
}

Tensor DenoisingDecoder::embed_step(int s) const {
    Tensor raw = sinusoidal_step_code(s, cfg_.effective_step_dim());
    return linear(relu(linear(raw, step_w1_, step_b1_)), step_w2_, step_b2_);
}

Tensor DenoisingDecoder::attention(const Tensor& q, const Tensor& k, const Tensor& v) const {
    if (cfg_.heads == 1) return scaled_dot_attention(q, k, v);
    const int hd = cfg_.hidden / cfg_.heads;
    Tensor out;
    for (int i = 0; i < cfg_.heads; ++i) {
        Tensor part = scaled_dot_attention(slice_channels(q, i * hd, (i + 1) * hd),
                                           slice_channels(k, i * hd, (i + 1) * hd),
                                           slice_channels(v, i * hd, (i + 1) * hd));
        out = i == 0 ? part : concat_channels(out, part);
    }
    return out;
}

Tensor DenoisingDecoder::forward(const Tensor& noisy_labels, int s, const Tensor& cond,
                                 const ConditionMask& mask) const {
    if (noisy_labels.rank() != 2 || cond.rank() != 2 || noisy_labels.rows() != cond.rows())
        throw ShapeError("decoder: noisy labels and condition length differ");
    if (noisy_labels.cols() != cfg_.num_classes) throw ShapeError("decoder: class dim mismatch");
    if (cond.cols() != cfg_.cond_dim) throw ShapeError("decoder: condition dim mismatch");
    const int len = noisy_labels.rows();

    Tensor cond_masked = apply_mask(cond, mask);
    Tensor x = pointwise_conv1d(concat_channels(noisy_labels, cond_masked), in_proj_w_, in_proj_b_);
    x = add(x, broadcast_time(embed_step(s), len));

    for (const auto& b : blocks_) {
        Tensor t = instance_norm_time(x, b.norm1_gain, b.norm1_bias);
        x = add(x, pointwise_conv1d(depthwise_conv1d(t, b.conv_dw, b.dilation), b.conv_pw_w, b.conv_pw_b));

        t = instance_norm_time(x, b.norm2_gain, b.norm2_bias);
        Tensor q = linear(t, b.q_w, b.q_b);
        Tensor k = linear(cond_masked, b.k_w, b.k_b);
        Tensor v = linear(cond_masked, b.v_w, b.v_b);
        x = add(x, attention(q, k, v));

        t = instance_norm_time(x, b.norm3_gain, b.norm3_bias);
        x = add(x, linear(relu(linear(t, b.ffn_w1, b.ffn_b1)), b.ffn_w2, b.ffn_b2));
    }
    return softmax_channels(linear(x, head_w_, head_b_));
}

void DenoisingDecoder::collect_params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".step.w1", step_w1_);
    out.emplace_back(prefix + ".step.b1", step_b1_);
    out.emplace_back(prefix + ".step.w2", step_w2_);
    out.emplace_back(prefix + ".step.b2", step_b2_);
    out.emplace_back(prefix + ".in_proj.w", in_proj_w_);
    out.emplace_back(prefix + ".in_proj.b", in_proj_b_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& b = blocks_[i];
        const std::string p = prefix + ".b" + std::to_string(i);
        out.emplace_back(p + ".norm1.gain", b.norm1_gain);
        out.emplace_back(p + ".norm1.bias", b.norm1_bias);
        out.emplace_back(p + ".conv.dw", b.conv_dw);
        out.emplace_back(p + ".conv.pw_w", b.conv_pw_w);
        out.emplace_back(p + ".conv.pw_b", b.conv_pw_b);
        out.emplace_back(p + ".norm2.gain", b.norm2_gain);
        out.emplace_back(p + ".norm2.bias", b.norm2_bias);
        out.emplace_back(p + ".attn.q_w", b.q_w);
        out.emplace_back(p + ".attn.q_b", b.q_b);
        out.emplace_back(p + ".attn.k_w", b.k_w);
        out.emplace_back(p + ".attn.k_b", b.k_b);
        out.emplace_back(p + ".attn.v_w", b.v_w);
        out.emplace_back(p + ".attn.v_b", b.v_b);
        out.emplace_back(p + ".norm3.gain", b.norm3_gain);
        out.emplace_back(p + ".norm3.bias", b.norm3_bias);
        out.emplace_back(p + ".ffn.w1", b.ffn_w1);
        out.emplace_back(p + ".ffn.b1", b.ffn_b1);
        out.emplace_back(p + ".ffn.w2", b.ffn_w2);
        out.emplace_back(p + ".ffn.b2", b.ffn_b2);
    }
    out.emplace_back(prefix + ".head.w", head_w_);
    out.emplace_back(prefix + ".head.b", head_b_);
}

}  // namespace tasdiff
