#pragma once

#include <cstdint>

#include "tasdiff/decoder.hpp"
#include "tasdiff/encoder.hpp"

namespace tasdiff {

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;

    void validate() const {
        encoder.validate();
        decoder.validate();
        if (decoder.cond_dim != encoder.hidden)
            throw ConfigError("decoder cond_dim must equal encoder hidden");
    }
};

// Conditioning encoder plus denoising decoder with a shared parameter list.
class SegModel {
public:
    SegModel(ModelConfig cfg, std::uint64_t seed);

    Tensor encode(const Tensor& features) const { return encoder_.forward(features); }
    Tensor decode(const Tensor& noisy_labels, int s, const Tensor& cond,
                  const ConditionMask& mask) const {
        return decoder_.forward(noisy_labels, s, cond, mask);
    }

    NamedParams named_params() const;
    std::vector<Tensor> params() const;

    const ModelConfig& config() const { return cfg_; }
    const GatedTemporalEncoder& encoder() const { return encoder_; }
    const DenoisingDecoder& decoder() const { return decoder_; }

private:
    ModelConfig cfg_;
    GatedTemporalEncoder encoder_;
    DenoisingDecoder decoder_;
};

}  // namespace tasdiff
