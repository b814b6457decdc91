// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_METRICS_H_
#define NITCG_METRICS_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nitcg/dsp.h"

namespace nitcg::metrics {

enum class WssBands {
  kClassic,   // the 25-band table of the composite-measure literature (50 Hz .. 3.6 kHz centres)
  kBarkFull,  // 25 bands equally spaced in Bark from 0 to sample_rate / 2
};

struct MetricConfig {
  double frame_ms = 32.0;
  double hop_ms = 16.0;
  double seg_snr_min = -10.0;
  double seg_snr_max = 35.0;
  double seg_snr_gate_db = -40.0;  // frames this far below the loudest clean frame are ignored
  std::size_t lpc_order = 16;
  double trim = 0.95;  // LLR/WSS average the smallest fraction of frame values
  WssBands wss_bands = WssBands::kClassic;
  double wss_kmax = 20.0;
  double wss_klocmax = 1.0;

  std::size_t frame_length(int rate) const;
  std::size_t hop_length(int rate) const;
  void validate() const;
};

struct Measure {
  double value = 0.0;
  std::size_t frames = 0;   // frames that entered the average
  std::size_t skipped = 0;  // silent or degenerate frames
};

// Inputs are trimmed to the shorter length; an empty overlap or differing
// sample rates throw InputError.
Measure seg_snr(const dsp::Waveform& clean, const dsp::Waveform& processed, const MetricConfig& cfg = {});
Measure llr(const dsp::Waveform& clean, const dsp::Waveform& processed, const MetricConfig& cfg = {});
Measure wss(const dsp::Waveform& clean, const dsp::Waveform& processed, const MetricConfig& cfg = {});

// Autocorrelation lags 0..order of a frame.
std::vector<double> autocorrelation(const std::vector<double>& frame, std::size_t order);
// Levinson-Durbin: predictor [1, a1..ap]; nullopt when the recursion breaks
// down (silent frame).
std::optional<std::vector<double>> lpc(const std::vector<double>& r);
// log(a_p R_c a_p' / a_c R_c a_c') for one pair of windowed frames.
std::optional<double> llr_frame(const std::vector<double>& clean_frame, const std::vector<double>& processed_frame,
                                std::size_t order);

// Weighted slope distance of one frame given per-band energies in dB.
double wss_frame_distance(const std::vector<double>& clean_db, const std::vector<double>& processed_db,
                          double kmax = 20.0, double klocmax = 1.0);

struct BandLayout {
  std::vector<double> centre_hz;
  std::vector<double> bandwidth_hz;
};
BandLayout wss_band_layout(WssBands bands, int sample_rate);

// y = intercept + c_llr * llr + c_pesq * pesq + c_wss * wss + c_seg * seg_snr
struct Regression {
  double intercept = 0.0;
  double c_llr = 0.0;
  double c_pesq = 0.0;
  double c_wss = 0.0;
  double c_seg = 0.0;
  double apply(double llr_v, double wss_v, double seg_v, double pesq_v) const;
};

struct CompositeCoefficients {
  Regression csig{3.093, -1.029, 0.603, -0.009, 0.0};
  Regression cbak{1.634, 0.0, 0.478, -0.007, 0.063};
  Regression covl{1.594, -0.512, 0.805, -0.007, 0.0};
  double lo = 1.0;
  double hi = 5.0;
  nlohmann::json to_json() const;
  std::string describe() const;
};

struct Composite {
  double csig = 0.0;
  double cbak = 0.0;
  double covl = 0.0;
};

Composite composite_scores(double llr_v, double wss_v, double seg_snr_v, double pesq,
                           const CompositeCoefficients& coeff = {});

inline constexpr double kPesqMin = -0.5;
inline constexpr double kPesqMax = 4.5;

// External PESQ scores. Specs:
//   none            no scores (composites omitted)
//   const:<value>   the same score for every pair
//   csv:<path>      rows "id,pesq" (a header row is allowed); system rows
//                   are looked up as "<system>/<id>" first, then "<id>"
//   cmd:<command>   runs "<command> <clean.wav> <degraded.wav>", reads a
//                   decimal score from stdout
class PesqProvider {
 public:
  virtual ~PesqProvider() = default;
  // nullopt when the provider has no score; throws InputError on failures
  // and on scores outside [-0.5, 4.5].
  virtual std::optional<double> score(const std::string& key, const std::filesystem::path& clean,
                                      const std::filesystem::path& degraded) const = 0;
  virtual std::string describe() const = 0;
};

std::unique_ptr<PesqProvider> make_pesq_provider(const std::string& spec);

struct EvalItem {
  std::string id;
  std::string noise;
  double snr_db = 0.0;
  std::filesystem::path clean;
  std::filesystem::path noisy;
  std::filesystem::path enhanced;  // empty: noisy rows only
  double clean_gain = 1.0;         // scale applied to the clean reference
};

struct UtteranceScores {
  std::string id;
  std::string system;  // "noisy" or "enhanced"
  std::string noise;
  double snr_db = 0.0;
  double seg_snr = 0.0;
  double llr = 0.0;
  double wss = 0.0;
  std::optional<double> pesq;
  std::optional<Composite> composite;
  std::string error;  // nonempty rows are excluded from aggregates
};

struct Aggregate {
  std::string system;
  std::string noise;  // "all" for the overall row
  std::string snr;    // formatted dB or "all"
  std::size_t count = 0;
  double seg_snr = 0.0, llr = 0.0, wss = 0.0;
  std::optional<double> pesq, csig, cbak, covl;
};

struct MetricReport {
  std::vector<UtteranceScores> rows;  // sorted by (id, system)
  CompositeCoefficients coefficients;
  std::string pesq_source;

  // Per (system, noise, snr) means, then per system over everything.
  std::vector<Aggregate> by_condition() const;
  std::vector<Aggregate> summary() const;
  // per_utterance.csv, by_condition.csv and summary.csv; each starts with
  // a "# coefficients ..." comment line.
  void write_csvs(const std::filesystem::path& dir) const;
  static std::string per_utterance_header();
  static std::string aggregate_header();
};

MetricReport evaluate_pairs(const std::vector<EvalItem>& items, const PesqProvider& pesq,
                            const MetricConfig& cfg = {}, const CompositeCoefficients& coeff = {},
                            std::size_t threads = 0);

}  // namespace nitcg::metrics

#endif  // NITCG_METRICS_H_
