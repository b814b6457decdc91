// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/dsp.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "nitcg/error.h"
#include "nitcg/fft.h"

namespace nitcg::dsp {

std::size_t StftConfig::frame_length() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_ms / 1000.0));
}

std::size_t StftConfig::hop_length() const {
  return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

void StftConfig::validate() const {
  if (sample_rate <= 0) throw InputError("sample rate must be positive");
  const std::size_t frame = frame_length();
  const std::size_t hop = hop_length();
  if (frame < 2 || hop == 0) throw InputError("STFT frame and hop must be positive");
  if (hop > frame) {
    throw InputError("STFT hop (" + std::to_string(hop) + ") exceeds frame (" +
                     std::to_string(frame) + ")");
  }
  if (fft_size < frame || fft_size % 2 != 0) {
    throw InputError("FFT size " + std::to_string(fft_size) + " must be even and >= frame " +
                     std::to_string(frame));
  }
  if (window != "hann" && window != "rectangular") {
    throw InputError("unknown analysis window '" + window + "'");
  }
}

std::vector<double> StftConfig::window_samples() const {
  const std::size_t n = frame_length();
  std::vector<double> w(n, 1.0);
  if (window == "hann") {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n));
    }
  }
  return w;
}

namespace {

std::size_t center_pad(const StftConfig& config) { return config.center ? config.frame_length() / 2 : 0; }

// Signal after the short-input and centre padding policies, extended with
// zeros so the last frame ends on the final sample.
std::vector<double> padded_signal(const std::vector<double>& x, const StftConfig& config) {
  const std::size_t frame = config.frame_length();
  const std::size_t hop = config.hop_length();
  std::vector<double> base = x;
  if (base.size() < frame) base.resize(frame, 0.0);
  const std::size_t pad = center_pad(config);
  std::vector<double> out(base.size() + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    out[pad - 1 - i] = base[std::min(i + 1, base.size() - 1)];
    out[pad + base.size() + i] = base[base.size() >= i + 2 ? base.size() - 2 - i : 0];
  }
  std::copy(base.begin(), base.end(), out.begin() + static_cast<long>(pad));
  const std::size_t hops = (out.size() - frame + hop - 1) / hop;
  out.resize(frame + hops * hop, 0.0);
  return out;
}

double wrap_phase(double p) {
  // atan2 yields [-pi, pi]; fold the closed end so values lie in (-pi, pi]
  // after the float cast as well.
  const float fp = static_cast<float>(p);
  if (fp <= -static_cast<float>(std::numbers::pi)) return std::numbers::pi;
  return p;
}

}  // namespace

std::size_t frame_count(std::size_t length, const StftConfig& config) {
  const std::size_t frame = config.frame_length();
  const std::size_t hop = config.hop_length();
  const std::size_t padded = std::max(length, frame) + 2 * center_pad(config);
  return 1 + (padded - frame + hop - 1) / hop;
}

Spectrogram stft(const Waveform& wave, const StftConfig& config) {
  config.validate();
  if (wave.sample_rate != config.sample_rate) {
    throw InputError("waveform at " + std::to_string(wave.sample_rate) + " Hz, STFT expects " +
                     std::to_string(config.sample_rate) + " Hz");
  }
  const std::size_t frame = config.frame_length();
  const std::size_t hop = config.hop_length();
  const std::size_t nfft = config.fft_size;
  const std::vector<double> x = padded_signal(wave.samples, config);
  const std::vector<double> w = config.window_samples();
  const std::size_t frames = 1 + (x.size() - frame) / hop;
  const std::size_t bins = config.bins();

  Spectrogram spec;
  spec.config = config;
  spec.signal_length = wave.samples.size();
  spec.magnitude = Matrix(bins, frames);
  spec.phase = Matrix(bins, frames);

  RealFft fft(nfft);
  std::vector<double> buf(nfft, 0.0);
  std::vector<std::complex<double>> out(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < frame; ++i) buf[i] = x[t * hop + i] * w[i];
    fft.forward(buf.data(), out.data());
    for (std::size_t k = 0; k < bins; ++k) {
      spec.magnitude(k, t) = static_cast<float>(std::abs(out[k]));
      spec.phase(k, t) = static_cast<float>(wrap_phase(std::arg(out[k])));
    }
  }
  return spec;
}

Waveform istft(const Spectrogram& spec) {
  const StftConfig& config = spec.config;
  config.validate();
  if (!spec.magnitude.same_shape(spec.phase)) {
    throw ShapeError("istft: magnitude and phase shapes differ");
  }
  if (spec.bins() != config.bins()) {
    throw ShapeError("istft: spectrogram has " + std::to_string(spec.bins()) + " bins, config " +
                     std::to_string(config.bins()));
  }
  if (spec.frames() == 0) throw ShapeError("istft: spectrogram has no frames");
  const std::size_t frame = config.frame_length();
  const std::size_t hop = config.hop_length();
  const std::size_t nfft = config.fft_size;
  const std::vector<double> w = config.window_samples();

  // Steady-state squared-window overlap must stay away from zero.
  double min_overlap = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < hop; ++n) {
    double s = 0.0;
    for (std::size_t k = n; k < frame; k += hop) s += w[k] * w[k];
    min_overlap = std::min(min_overlap, s);
  }
  if (!(min_overlap > 1e-6)) {
    throw InputError("istft: window/hop pair does not satisfy the overlap-add condition");
  }

  const std::size_t frames = spec.frames();
  const std::size_t length = frame + (frames - 1) * hop;
  std::vector<double> acc(length, 0.0);
  std::vector<double> norm(length, 0.0);
  RealFft fft(nfft);
  std::vector<std::complex<double>> bins(config.bins());
  std::vector<double> buf(nfft);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins.size(); ++k) {
      bins[k] = std::polar(static_cast<double>(spec.magnitude(k, t)),
                           static_cast<double>(spec.phase(k, t)));
    }
    fft.inverse(bins.data(), buf.data());
    for (std::size_t i = 0; i < frame; ++i) {
      acc[t * hop + i] += buf[i] * w[i];
      norm[t * hop + i] += w[i] * w[i];
    }
  }
  Waveform out;
  out.sample_rate = config.sample_rate;
  out.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    out.samples[i] = norm[i] > 1e-10 ? acc[i] / norm[i] : 0.0;
  }
  if (spec.signal_length > 0) {
    const std::size_t start = center_pad(config);
    const std::size_t end = std::min(length, start + spec.signal_length);
    std::vector<double> trimmed(out.samples.begin() + static_cast<long>(start),
                                out.samples.begin() + static_cast<long>(end));
    trimmed.resize(spec.signal_length, 0.0);
    out.samples = std::move(trimmed);
  }
  return out;
}

Waveform reconstruct_with_noisy_phase(const Matrix& enhanced_magnitude, const Spectrogram& noisy) {
  if (!enhanced_magnitude.same_shape(noisy.magnitude)) {
    throw ShapeError("enhanced magnitude is " + std::to_string(enhanced_magnitude.rows) + "x" +
                     std::to_string(enhanced_magnitude.cols) + ", noisy spectrogram is " +
                     std::to_string(noisy.bins()) + "x" + std::to_string(noisy.frames()));
  }
  Spectrogram spec = noisy;
  spec.magnitude = enhanced_magnitude;
  return istft(spec);
}

double power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

double snr_db(const std::vector<double>& clean, const std::vector<double>& noise) {
  return 10.0 * std::log10(power(clean) / power(noise));
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db_target,
                    std::size_t noise_offset) {
  if (clean.sample_rate != noise.sample_rate) {
    throw InputError("mix_at_snr: sample rates differ (" + std::to_string(clean.sample_rate) +
                     " vs " + std::to_string(noise.sample_rate) + ")");
  }
  if (noise.samples.empty() || clean.samples.empty()) {
    throw InputError("mix_at_snr: empty signal");
  }
  if (!std::isfinite(snr_db_target)) throw InputError("mix_at_snr: non-finite SNR");
  std::vector<double> aligned(clean.samples.size());
  const std::size_t n = noise.samples.size();
  for (std::size_t i = 0; i < aligned.size(); ++i) aligned[i] = noise.samples[(noise_offset + i) % n];
  const double p_clean = power(clean.samples);
  const double p_noise = power(aligned);
  if (!(p_clean > 0.0)) throw InputError("mix_at_snr: clean signal has zero power");
  if (!(p_noise > 0.0)) throw InputError("mix_at_snr: noise excerpt has zero power");
  const double alpha = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db_target / 10.0)));
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) out.samples[i] = clean.samples[i] + alpha * aligned[i];
  return out;
}

Matrix compress(const Matrix& magnitude, const FeatureConfig& fc) {
  if (!fc.log_compress) return magnitude;
  Matrix out = magnitude;
  for (auto& v : out.values) v = std::log(v + fc.floor);
  return out;
}

Matrix expand(const Matrix& compressed, const FeatureConfig& fc) {
  Matrix out = compressed;
  if (fc.log_compress) {
    for (auto& v : out.values) v = std::max(0.0f, std::exp(v) - fc.floor);
  } else {
    for (auto& v : out.values) v = std::max(0.0f, v);
  }
  return out;
}

Matrix normalize(const Matrix& compressed, const FeatureNorm& norm) {
  if (norm.empty()) return compressed;
  if (norm.mean.size() != compressed.rows || norm.stddev.size() != compressed.rows) {
    throw ShapeError("feature norm covers " + std::to_string(norm.mean.size()) + " bins, features have " +
                     std::to_string(compressed.rows));
  }
  Matrix out = compressed;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = (out(r, c) - norm.mean[r]) / norm.stddev[r];
  }
  return out;
}

Matrix denormalize(const Matrix& features, const FeatureNorm& norm, float clip_sigma) {
  Matrix out = features;
  for (auto& v : out.values) v = std::clamp(v, -clip_sigma, clip_sigma);
  if (norm.empty()) return out;
  if (norm.mean.size() != out.rows) {
    throw ShapeError("feature norm covers " + std::to_string(norm.mean.size()) + " bins, features have " +
                     std::to_string(out.rows));
  }
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = out(r, c) * norm.stddev[r] + norm.mean[r];
  }
  return out;
}

Matrix to_features(const Matrix& magnitude, const FeatureConfig& fc, const FeatureNorm& norm) {
  return normalize(compress(magnitude, fc), norm);
}

Matrix from_features(const Matrix& features, const FeatureConfig& fc, const FeatureNorm& norm) {
  return expand(denormalize(features, norm, fc.clip_sigma), fc);
}

void FeatureStats::add(const Matrix& compressed) {
  if (sum_.empty()) {
    sum_.assign(compressed.rows, 0.0);
    sum_sq_.assign(compressed.rows, 0.0);
  }
  if (compressed.rows != sum_.size()) throw ShapeError("FeatureStats: bin count changed");
  for (std::size_t r = 0; r < compressed.rows; ++r) {
    for (std::size_t c = 0; c < compressed.cols; ++c) {
      const double v = compressed(r, c);
      sum_[r] += v;
      sum_sq_[r] += v * v;
    }
  }
  frames_ += compressed.cols;
}

void FeatureStats::merge(const FeatureStats& other) {
  if (other.frames_ == 0) return;
  if (sum_.empty()) {
    *this = other;
    return;
  }
  if (other.sum_.size() != sum_.size()) throw ShapeError("FeatureStats: bin count changed");
  for (std::size_t r = 0; r < sum_.size(); ++r) {
    sum_[r] += other.sum_[r];
    sum_sq_[r] += other.sum_sq_[r];
  }
  frames_ += other.frames_;
}

FeatureNorm FeatureStats::finish() const {
  FeatureNorm norm;
  if (frames_ == 0) return norm;
  const double n = static_cast<double>(frames_);
  for (std::size_t r = 0; r < sum_.size(); ++r) {
    const double mu = sum_[r] / n;
    const double var = std::max(0.0, sum_sq_[r] / n - mu * mu);
    norm.mean.push_back(static_cast<float>(mu));
    norm.stddev.push_back(static_cast<float>(std::max(std::sqrt(var), 1e-3)));
  }
  return norm;
}

}  // namespace nitcg::dsp
