// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_DSP_H_
#define NITCG_DSP_H_

#include <cstddef>
#include <string>
#include <vector>

#include "nitcg/matrix.h"

namespace nitcg::dsp {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
};

// Analysis parameters. Defaults give 512-sample frames, 256-sample hop and
// 257 bins at 16 kHz.
struct StftConfig {
  int sample_rate = 16000;
  double frame_ms = 32.0;
  double hop_ms = 16.0;
  std::size_t fft_size = 512;
  std::string window = "hann";  // periodic "hann" or "rectangular"
  bool center = true;           // reflect-pad half a frame at both ends

  std::size_t frame_length() const;
  std::size_t hop_length() const;
  std::size_t bins() const { return fft_size / 2 + 1; }
  // Throws InputError on hop > frame, fft_size < frame or an unknown window.
  void validate() const;
  std::vector<double> window_samples() const;
  bool operator==(const StftConfig&) const = default;
};

struct Spectrogram {
  Matrix magnitude;  // bins x frames, >= 0
  Matrix phase;      // bins x frames, in (-pi, pi]
  StftConfig config;
  // Length of the analysed signal; 0 leaves istft output untrimmed.
  std::size_t signal_length = 0;

  std::size_t bins() const { return magnitude.rows; }
  std::size_t frames() const { return magnitude.cols; }
};

// Frame count for a signal of `length` samples under `config`.
std::size_t frame_count(std::size_t length, const StftConfig& config);

Spectrogram stft(const Waveform& wave, const StftConfig& config = {});

// Weighted overlap-add with squared-window normalisation. Untrimmed output
// has frame + (T - 1) * hop samples; with signal_length set the centre
// padding is removed and exactly signal_length samples are returned.
Waveform istft(const Spectrogram& spec);

Waveform reconstruct_with_noisy_phase(const Matrix& enhanced_magnitude, const Spectrogram& noisy);

double power(const std::vector<double>& x);

// clean + alpha * noise with alpha chosen so the mixture has `snr_db` SNR.
// The noise is read from `noise_offset` on, looping around its end.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                    std::size_t noise_offset = 0);

// 10 log10(P_clean / P_noise).
double snr_db(const std::vector<double>& clean, const std::vector<double>& noise);

// Model-facing feature domain: optional log compression then per-bin
// standardisation.
struct FeatureConfig {
  bool log_compress = true;
  float floor = 1e-5f;   // log(mag + floor)
  float clip_sigma = 4.0f;  // standardised outputs are clipped before inversion
  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureNorm {
  std::vector<float> mean;    // per bin
  std::vector<float> stddev;  // per bin, > 0
  bool empty() const { return mean.empty(); }
  bool operator==(const FeatureNorm&) const = default;
};

Matrix compress(const Matrix& magnitude, const FeatureConfig& fc);
Matrix expand(const Matrix& compressed, const FeatureConfig& fc);

// Standardises compressed features; an empty norm is the identity.
Matrix normalize(const Matrix& compressed, const FeatureNorm& norm);
// Inverse of normalize, clipping standardised values to +-clip_sigma first.
Matrix denormalize(const Matrix& features, const FeatureNorm& norm, float clip_sigma);

// magnitude -> model features, and back.
Matrix to_features(const Matrix& magnitude, const FeatureConfig& fc, const FeatureNorm& norm);
Matrix from_features(const Matrix& features, const FeatureConfig& fc, const FeatureNorm& norm);

// Streaming per-bin mean/variance over compressed frames (double sums).
class FeatureStats {
 public:
  void add(const Matrix& compressed);
  void merge(const FeatureStats& other);
  FeatureNorm finish() const;
  std::size_t frames() const { return frames_; }

 private:
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
  std::size_t frames_ = 0;
};

}  // namespace nitcg::dsp

#endif  // NITCG_DSP_H_
