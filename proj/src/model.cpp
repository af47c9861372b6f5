#include "tasdiff/model.hpp"

namespace {
tasdiff::ModelConfig validated(tasdiff::ModelConfig cfg) {
    cfg.validate();
    return cfg;
}
std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed); }
}  // namespace

namespace tasdiff {

SegModel::SegModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(validated(std::move(cfg))),
      encoder_([this, seed]() {
          auto rng = seeded(seed);
          return GatedTemporalEncoder(cfg_.encoder, rng);
      }()),
      decoder_([this, seed]() {
          auto rng = seeded(seed ^ 0x9e3779b97f4a7c15ULL);
          return DenoisingDecoder(cfg_.decoder, rng);
      }()) {}

NamedParams SegModel::named_params() const {
    NamedParams out;
    encoder_.collect_params("enc", out);
    decoder_.collect_params("dec", out);
    return out;
}

std::vector<Tensor> SegModel::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

}  // namespace tasdiff
