// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_MODELS_H_
#define NITCG_MODELS_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "nitcg/ops.h"
#include "nitcg/optim.h"

namespace nitcg::models {

struct GeneratorSpec {
  std::size_t in_rows = 0;            // F + N + 1 (NIT) or F (baseline)
  std::size_t base_channels = 16;
  std::size_t n_residual_blocks = 2;
  std::size_t downsample_factor = 4;  // power of two; one strided block per factor 2

  void validate() const;
  std::size_t downsample_blocks() const;
  bool operator==(const GeneratorSpec&) const = default;
};

struct DiscriminatorSpec {
  std::size_t in_rows = 0;
  std::size_t base_channels = 16;
  std::size_t n_layers = 4;

  void validate() const;
  // Patch grid produced for a rows x frames input.
  std::pair<std::size_t, std::size_t> grid(std::size_t rows, std::size_t frames) const;
  bool operator==(const DiscriminatorSpec&) const = default;
};

// Conditional generator over extended features treated as a one-channel
// image (rows x frames):
//   conv 5x5 + GLU -> strided conv + IN + GLU (x log2 factor)
//   -> residual GLU blocks -> conv + pixel shuffle x2 + IN + SiLU (x log2 factor)
//   -> linear 5x5 conv head, cropped back to the input size.
// Output rows [0, N] are the predicted label, the rest converted features.
class Generator : public ad::ParameterSet {
 public:
  Generator(const GeneratorSpec& spec, std::mt19937_64& rng);

  // [B, R, T] -> [B, R, T].
  ad::Tensor forward(const ad::Tensor& ext) const;
  ad::Tensor operator()(const ad::Tensor& ext) const { return forward(ext); }
  const GeneratorSpec& spec() const { return spec_; }

 private:
  struct Conv {
    std::size_t weight, bias;
    ad::Conv2dOptions options;
  };
  struct Norm {
    std::size_t gamma, beta;
  };

  Conv add_conv(const std::string& name, std::size_t c_in, std::size_t c_out, std::size_t k,
                std::size_t stride, std::mt19937_64& rng);
  Norm add_norm(const std::string& name, std::size_t channels);
  ad::Tensor conv(const Conv& c, const ad::Tensor& x) const;
  ad::Tensor norm(const Norm& n, const ad::Tensor& x) const;

  GeneratorSpec spec_;
  Conv stem_;
  std::vector<std::pair<Conv, Norm>> down_;
  struct Residual {
    Conv expand;
    Norm expand_norm;
    Conv project;
    Norm project_norm;
  };
  std::vector<Residual> residual_;
  std::vector<std::pair<Conv, Norm>> up_;
  Conv head_;
};

// Patch discriminator: strided conv + GLU blocks (instance norm after the
// first), a 1-channel conv and a sigmoid. Scores are clamped to
// [kScoreEps, 1 - kScoreEps].
class Discriminator : public ad::ParameterSet {
 public:
  static constexpr float kScoreEps = 1e-7f;

  Discriminator(const DiscriminatorSpec& spec, std::mt19937_64& rng);

  // [B, R, T] -> [B, gh, gw] score map.
  ad::Tensor forward(const ad::Tensor& ext) const;
  ad::Tensor operator()(const ad::Tensor& ext) const { return forward(ext); }
  // Pre-sigmoid logits of the same grid.
  ad::Tensor logits(const ad::Tensor& ext) const;
  const DiscriminatorSpec& spec() const { return spec_; }

  // Zeroes the final conv weight and bias (every score becomes 0.5).
  void zero_final_layer();
  // Adds `delta` to the final conv bias.
  void shift_final_bias(float delta);

 private:
  struct Block {
    std::size_t weight, bias;
    std::size_t gamma = 0, beta = 0;
    bool normed = false;
  };
  DiscriminatorSpec spec_;
  std::vector<Block> blocks_;
  std::size_t final_weight_ = 0, final_bias_ = 0;
};

}  // namespace nitcg::models

#endif  // NITCG_MODELS_H_
