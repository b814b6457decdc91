// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_TRAINING_H_
#define NITCG_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nitcg/checkpoint.h"
#include "nitcg/data.h"
#include "nitcg/dsp.h"
#include "nitcg/losses.h"
#include "nitcg/models.h"

namespace nitcg::training {

enum class Mode { kNit, kBaseline };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct TrainConfig {
  Mode mode = Mode::kNit;
  std::uint64_t seed = 0;
  std::size_t epochs = 600;
  std::size_t max_steps = 0;  // 0: no cap beyond epochs
  std::size_t batch_size = 1;
  std::size_t crop_frames = 64;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  losses::LossWeights weights;
  std::size_t idm_decay_epochs = 0;  // identity term off after this many epochs; 0 keeps it
  losses::AdversarialOptions adversarial;
  bool mask_label_rows = false;
  std::size_t checkpoint_every = 1;  // epochs
  std::size_t base_channels = 16;
  std::size_t residual_blocks = 2;
  std::size_t downsample_factor = 4;
  std::size_t d_base_channels = 16;
  std::size_t d_layers = 4;

  // Throws InputError on non-positive sizes, negative rates or bad weights.
  void validate() const;
  nlohmann::json to_json() const;
  // Keys missing from `j` keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

// Steps in one epoch: one pass over the larger pool.
std::size_t steps_per_epoch(std::size_t clean_pool, std::size_t noisy_pool, std::size_t batch);

// Models, optimiser states and counters of one run.
class Trainer {
 public:
  // `labels` is the manifest label list ([0] = "clean"); models are
  // initialised from config.seed.
  Trainer(const TrainConfig& config, std::vector<std::string> labels, std::size_t feature_rows);

  // One D-then-G update on an unpaired batch. A non-finite loss throws
  // NumericError with the offending terms before the phase's update.
  losses::LossReport step(const data::UnpairedBatch& batch);

  // The snapshot records `epoch` (completed epochs) and the step counter.
  models::Checkpoint checkpoint(std::uint64_t epoch, const dsp::StftConfig& stft,
                                const dsp::FeatureConfig& features, const dsp::FeatureNorm& norm) const;
  // Restores models, optimiser states and the step counter.
  void restore(const models::Checkpoint& c);

  const TrainConfig& config() const { return config_; }
  std::size_t label_rows() const { return label_rows_; }
  std::uint64_t global_step() const { return global_step_; }
  // Weight on the identity term for the given 1-based epoch.
  double identity_weight(std::uint64_t epoch) const;
  void set_epoch(std::uint64_t epoch) { epoch_ = epoch; }
  // Observer called with "d" after the discriminator update and "g" after
  // the generator update.
  void set_phase_hook(std::function<void(const std::string&)> hook) { phase_hook_ = std::move(hook); }

  models::Generator& g_ys() { return *g_ys_; }
  models::Generator& g_sy() { return *g_sy_; }
  models::Discriminator& d_s() { return *d_s_; }
  models::Discriminator& d_y() { return *d_y_; }

 private:
  TrainConfig config_;
  std::vector<std::string> labels_;
  std::size_t feature_rows_;
  std::size_t label_rows_;
  std::unique_ptr<models::Generator> g_ys_, g_sy_;
  std::unique_ptr<models::Discriminator> d_s_, d_y_;
  ad::AdamState adam_g_ys_, adam_g_sy_, adam_d_s_, adam_d_y_;
  std::uint64_t global_step_ = 0;
  std::uint64_t epoch_ = 1;
  std::function<void(const std::string&)> phase_hook_;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  // Called after every step with (1-based step, 1-based epoch, report).
  std::function<void(std::uint64_t, std::uint64_t, const losses::LossReport&)> on_step;
  bool quiet = false;  // suppress per-epoch progress on stderr
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::uint64_t steps = 0;         // global steps completed
  std::uint64_t epochs = 0;        // completed epochs
  std::vector<losses::LossReport> history;  // this invocation only
};

// Writes <out>/losses.csv, <out>/run_config.json, ckpt_epoch_XXXX.bin at the
// checkpoint cadence and last.bin at the end.
TrainResult train(const TrainConfig& config, const data::CorpusManifest& manifest,
                  const std::filesystem::path& manifest_root, const TrainOptions& options);

// Read-only inference with G^{Y->S}: returns a waveform of the input length.
class Enhancer {
 public:
  explicit Enhancer(const models::Checkpoint& checkpoint);
  dsp::Waveform run(const dsp::Waveform& noisy) const;
  // Enhanced magnitude for a noisy spectrogram.
  Matrix enhance_magnitude(const dsp::Spectrogram& noisy) const;
  const models::Checkpoint& checkpoint() const { return ckpt_; }

 private:
  models::Checkpoint ckpt_;
  std::unique_ptr<models::Generator> g_ys_;
};

dsp::Waveform enhance(const models::Checkpoint& checkpoint, const dsp::Waveform& noisy);

}  // namespace nitcg::training

#endif  // NITCG_TRAINING_H_
