// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_CHECKPOINT_H_
#define NITCG_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nitcg/dsp.h"
#include "nitcg/models.h"
#include "nitcg/optim.h"

namespace nitcg::models {

inline constexpr char kCheckpointMagic[] = "NITCG1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
  bool operator==(const NamedTensor&) const = default;
};

// Everything needed to resume training or run inference.
//
// File layout (little-endian): magic "NITCG1", u32 version, u32 metadata
// length + UTF-8 JSON, u32 tensor count, then per tensor: u32 name length,
// name bytes, u32 rank, u32 dims, f32 values.
struct Checkpoint {
  std::string mode = "nit";  // "nit" | "baseline"
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  std::vector<std::string> label_names;  // index order; [0] is "clean"
  dsp::StftConfig stft;
  dsp::FeatureConfig features;
  dsp::FeatureNorm norm;
  std::uint64_t epoch = 0;
  std::uint64_t global_step = 0;
  nlohmann::json train_config = nlohmann::json::object();
  nlohmann::json adam = nlohmann::json::object();  // per-prefix step/betas/eps
  std::vector<NamedTensor> tensors;

  // N + 1 in NIT mode, 0 in baseline mode.
  std::size_t label_dim() const { return mode == "nit" ? label_names.size() : 0; }

  const NamedTensor* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

// Stores every parameter of `set` under "<prefix>/<name>".
void export_parameters(const ad::ParameterSet& set, const std::string& prefix, Checkpoint& c);
// Copies tensors back; throws FormatError if any is missing or misshapen.
void import_parameters(const Checkpoint& c, const std::string& prefix, ad::ParameterSet& set);

void export_adam(const ad::AdamState& state, const ad::ParameterSet& set, const std::string& prefix,
                 Checkpoint& c);
ad::AdamState import_adam(const Checkpoint& c, const ad::ParameterSet& set, const std::string& prefix);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
std::vector<unsigned char> serialize_checkpoint(const Checkpoint& c);

// Rejects foreign/corrupt files. When `expected_label_dim` is given, a
// checkpoint with a different label dimension is rejected as well.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_label_dim = std::nullopt);
Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes, const std::string& origin);

}  // namespace nitcg::models

#endif  // NITCG_CHECKPOINT_H_
