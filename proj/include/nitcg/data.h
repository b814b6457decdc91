// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_DATA_H_
#define NITCG_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nitcg/dsp.h"
#include "nitcg/matrix.h"
#include "nitcg/tensor.h"

namespace nitcg::data {

enum class SplitMode { kPaired, kDisjoint };

std::string to_string(SplitMode mode);
SplitMode parse_split_mode(const std::string& text);

struct UtteranceRecord {
  std::string id;
  std::string path;  // relative to the manifest directory
  std::string domain = "clean";  // "clean" or a noise name
  std::string pool = "clean";    // "clean" (P_S), "noisy" (P_Y) or "source" (reference only)
  std::string source_id;         // noisy: clean utterance mixed in
  std::string source_path;       // noisy: clean reference, relative
  std::optional<double> snr_db;  // noisy only
  std::string noise_file;        // noisy: noise name of the excerpt
  std::uint64_t noise_offset = 0;
  double gain = 1.0;  // anti-clipping scale applied to clean + noise
  std::string speaker;
  std::string split = "train";

  bool noisy() const { return domain != "clean"; }
  nlohmann::json to_json() const;
  static UtteranceRecord from_json(const nlohmann::json& j);
  bool operator==(const UtteranceRecord&) const = default;
};

struct CorpusManifest {
  std::vector<std::string> labels{"clean"};  // index order; noise names sorted
  std::vector<double> snrs;
  SplitMode split_mode = SplitMode::kPaired;
  std::uint64_t seed = 0;
  bool rendered = true;  // false for manifest-only synthesis
  dsp::StftConfig stft;
  dsp::FeatureConfig features;
  dsp::FeatureNorm norm;
  std::vector<UtteranceRecord> records;

  std::size_t n_noise() const { return labels.size() - 1; }
  std::size_t label_dim() const { return labels.size(); }
  // Label index of a domain name; throws InputError when unknown.
  std::size_t label_index(const std::string& domain) const;
  std::size_t count_pool(const std::string& pool) const;
  bool operator==(const CorpusManifest&) const = default;
};

// JSONL: one header object, then one record per line.
void write_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);
std::string manifest_text(const CorpusManifest& m);
CorpusManifest parse_manifest(const std::string& text, const std::string& origin);

struct SynthOptions {
  std::vector<std::filesystem::path> clean_files;
  std::vector<std::filesystem::path> noise_files;
  std::vector<double> snrs;
  SplitMode split_mode = SplitMode::kPaired;
  std::uint64_t seed = 0;
  bool random_noise_offset = true;
  bool manifest_only = false;  // records only, no audio read or written
  std::vector<std::string> test_speakers;
  dsp::StftConfig stft;
  dsp::FeatureConfig features;
  std::size_t threads = 0;  // 0: NITCG_THREADS or 1
};

// Writes clean/ and noisy/ below `out_dir` plus the manifest, and returns it.
// Unreadable inputs are collected and reported together as one InputError.
CorpusManifest synthesize_corpus(const SynthOptions& options, const std::filesystem::path& out_dir);

// Worker count from NITCG_THREADS (at least 1).
std::size_t default_threads();

struct ValidationIssue {
  std::string record_id;  // empty for manifest-level issues
  std::string check;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool pass() const { return issues.empty(); }
  nlohmann::json to_json() const;
};

// `root` is the manifest directory; file existence is checked when the
// manifest is rendered and root is nonempty.
ValidationReport validate_manifest(const CorpusManifest& m, const std::filesystem::path& root = {});

// Model-ready features of the training pools.
class FeatureStore {
 public:
  struct Item {
    std::string id;
    std::size_t label = 0;  // 0 for clean, noise index otherwise
    Matrix features;        // F x T, normalised
  };

  FeatureStore(std::size_t n_noise, std::size_t feature_rows) : n_noise_(n_noise), rows_(feature_rows) {}
  // Loads every train-split record of the clean and noisy pools.
  static FeatureStore load(const CorpusManifest& m, const std::filesystem::path& root);

  void add_clean(std::string id, Matrix features);
  void add_noisy(std::string id, std::size_t label, Matrix features);

  const std::vector<Item>& clean() const { return clean_; }
  const std::vector<Item>& noisy() const { return noisy_; }
  std::size_t n_noise() const { return n_noise_; }
  std::size_t feature_rows() const { return rows_; }

 private:
  std::size_t n_noise_;
  std::size_t rows_;
  std::vector<Item> clean_;
  std::vector<Item> noisy_;
};

struct BatchPlan {
  std::vector<std::size_t> clean_index;
  std::vector<std::size_t> noisy_index;
  std::vector<std::size_t> target_label;  // tn for the clean path, in 1..N (0 when N = 0)
  std::vector<std::size_t> clean_start;
  std::vector<std::size_t> noisy_start;
};

// Independent uniform draws; a pure function of (seed, step).
BatchPlan plan_unpaired_batch(const FeatureStore& store, std::size_t batch, std::size_t crop,
                              std::uint64_t seed, std::uint64_t step);

struct UnpairedBatch {
  ad::Tensor s;  // [B, F, crop] clean features
  ad::Tensor y;  // [B, F, crop] noisy features
  std::vector<std::size_t> s_target;  // tn per clean item
  std::vector<std::size_t> y_label;   // ground-truth noise per noisy item
  BatchPlan plan;
};

UnpairedBatch sample_unpaired_batch(const FeatureStore& store, std::size_t batch, std::size_t crop,
                                    std::uint64_t seed, std::uint64_t step);

// Columns [start, start + crop) of `m`, reflect-extended when m is shorter.
Matrix crop_frames(const Matrix& m, std::size_t start, std::size_t crop);

}  // namespace nitcg::data

#endif  // NITCG_DATA_H_
