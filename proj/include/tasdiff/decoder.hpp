#pragma once

#include <random>
#include <vector>

#include "tasdiff/encoder.hpp"
#include "tasdiff/masking.hpp"
#include "tasdiff/tensor.hpp"

namespace tasdiff {

struct DecoderConfig {
    int num_classes = 0;
    int cond_dim = 64;  // encoder hidden width
    int hidden = 64;
    int num_blocks = 4;
    int heads = 1;
    int window = 3;
    int ffn_expansion = 2;
    int step_dim = 0;            // sinusoidal dim; 0 -> hidden
    std::vector<int> dilations;  // empty -> 1, 2, 4, ...

    void validate() const;
    std::vector<int> dilation_schedule() const;
    int effective_step_dim() const { return step_dim > 0 ? step_dim : hidden; }
};

// Raw sinusoidal position code of a diffusion step (pre-learned-map).
Tensor sinusoidal_step_code(int s, int dim);

// Denoiser head: projects [noisy labels ; masked condition] to the hidden
// width, adds a learned step embedding, then runs blocks of dilated separable
// conv, cross-attention against the masked condition, and a feedforward, each
// residual with its own instance norm. A pointwise map plus channel softmax
// produces per-frame class probabilities.
class DenoisingDecoder {
public:
    DenoisingDecoder(DecoderConfig cfg, std::mt19937_64& rng);

    Tensor forward(const Tensor& noisy_labels, int s, const Tensor& cond,
                   const ConditionMask& mask) const;
    Tensor embed_step(int s) const;  // 1 x hidden, learned two-layer map

    void collect_params(const std::string& prefix, NamedParams& out) const;
    const DecoderConfig& config() const { return cfg_; }

private:
    struct Block {
        Tensor norm1_gain, norm1_bias;
        Tensor conv_dw, conv_pw_w, conv_pw_b;
        Tensor norm2_gain, norm2_bias;
        Tensor q_w, q_b, k_w, k_b, v_w, v_b;
        Tensor norm3_gain, norm3_bias;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        int dilation = 1;
    };

    Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) const;

    DecoderConfig cfg_;
    Tensor step_w1_, step_b1_, step_w2_, step_b2_;
    Tensor in_proj_w_, in_proj_b_;
    std::vector<Block> blocks_;
    Tensor head_w_, head_b_;
};

}  // namespace tasdiff
