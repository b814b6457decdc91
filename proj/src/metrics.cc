// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/metrics.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "nitcg/data.h"
#include "nitcg/error.h"
#include "nitcg/fft.h"
#include "nitcg/wav.h"

namespace nitcg::metrics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Classic critical-band table (Hz).
constexpr double kClassicCentre[25] = {50.0,     120.0,    190.0,    260.0,    330.0,    400.0,    470.0,
                                       540.0,    617.372,  703.378,  798.717,  904.128,  1020.38,  1148.30,
                                       1288.72,  1442.54,  1610.70,  1794.16,  1993.93,  2211.08,  2446.71,
                                       2701.97,  2978.04,  3276.17,  3597.63};
constexpr double kClassicBandwidth[25] = {70.0,    70.0,    70.0,    70.0,    70.0,    70.0,    70.0,
                                          77.3724, 86.0056, 95.3398, 105.411, 116.256, 127.914, 140.423,
                                          153.823, 168.154, 183.457, 199.776, 217.153, 235.631, 255.255,
                                          276.072, 298.126, 321.465, 346.136};

double hz_to_bark(double f) { return 26.81 * f / (1960.0 + f) - 0.53; }
double bark_to_hz(double z) { return 1960.0 * (z + 0.53) / (26.28 - z); }

struct Pair {
  const std::vector<double>* clean;
  const std::vector<double>* processed;
  std::size_t length;
};

Pair align(const dsp::Waveform& clean, const dsp::Waveform& processed) {
  if (clean.sample_rate != processed.sample_rate) {
    throw InputError("metric inputs have different sample rates (" + std::to_string(clean.sample_rate) + " vs " +
                     std::to_string(processed.sample_rate) + ")");
  }
  const std::size_t n = std::min(clean.samples.size(), processed.samples.size());
  if (n == 0) throw InputError("metric inputs do not overlap");
  return {&clean.samples, &processed.samples, n};
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(n + 1)));
  }
  return w;
}

// Windowed frames [start, start + frame) for every start that fits; one
// short frame when the signal is shorter than a frame.
template <typename F>
void for_each_frame(const Pair& p, std::size_t frame, std::size_t hop, F&& body) {
  const std::size_t len = std::min(frame, p.length);
  const auto w = hann(len);
  std::vector<double> c(len), q(len);
  for (std::size_t start = 0; start + len <= p.length; start += hop) {
    for (std::size_t i = 0; i < len; ++i) {
      c[i] = (*p.clean)[start + i] * w[i];
      q[i] = (*p.processed)[start + i] * w[i];
    }
    body(c, q);
  }
}

double trimmed_mean(std::vector<double> v, double fraction) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t keep =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(v.size()))));
  double s = 0.0;
  for (std::size_t i = 0; i < keep; ++i) s += v[i];
  return s / static_cast<double>(keep);
}

double quad_form(const std::vector<double>& a, const std::vector<double>& r) {
  // a R a' with R the symmetric Toeplitz matrix of r.
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) s += a[i] * r[i > j ? i - j : j - i] * a[j];
  }
  return s;
}

std::vector<double> band_energies_db(const std::vector<double>& power, const std::vector<std::vector<double>>& bank) {
  std::vector<double> out(bank.size());
  for (std::size_t b = 0; b < bank.size(); ++b) {
    double e = 0.0;
    for (std::size_t j = 0; j < power.size(); ++j) e += power[j] * bank[b][j];
    out[b] = 10.0 * std::log10(std::max(e, 1e-10));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string snr_label(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr);
  return buf;
}

}  // namespace

std::size_t MetricConfig::frame_length(int rate) const {
  return static_cast<std::size_t>(std::llround(frame_ms * rate / 1000.0));
}

std::size_t MetricConfig::hop_length(int rate) const {
  return static_cast<std::size_t>(std::llround(hop_ms * rate / 1000.0));
}

void MetricConfig::validate() const {
  if (!(frame_ms > 0.0) || !(hop_ms > 0.0)) throw InputError("metric frame and hop must be positive");
  if (!(seg_snr_min < seg_snr_max)) throw InputError("segSNR clamp range is empty");
  if (lpc_order == 0) throw InputError("LPC order must be positive");
  if (!(trim > 0.0 && trim <= 1.0)) throw InputError("trim fraction must lie in (0, 1]");
  if (!(wss_kmax > 0.0) || !(wss_klocmax > 0.0)) throw InputError("WSS constants must be positive");
}

Measure seg_snr(const dsp::Waveform& clean, const dsp::Waveform& processed, const MetricConfig& cfg) {
  cfg.validate();
  const Pair p = align(clean, processed);
  std::vector<double> energy, snr;
  for_each_frame(p, cfg.frame_length(clean.sample_rate), cfg.hop_length(clean.sample_rate),
                 [&](const std::vector<double>& c, const std::vector<double>& q) {
                   double s = 0.0, e = 0.0;
                   for (std::size_t i = 0; i < c.size(); ++i) {
                     s += c[i] * c[i];
                     e += (c[i] - q[i]) * (c[i] - q[i]);
                   }
                   double v = cfg.seg_snr_max;
                   if (e > 0.0) v = s > 0.0 ? 10.0 * std::log10(s / e) : cfg.seg_snr_min;
                   energy.push_back(s);
                   snr.push_back(std::clamp(v, cfg.seg_snr_min, cfg.seg_snr_max));
                 });
  const double peak = *std::max_element(energy.begin(), energy.end());
  Measure m;
  double sum = 0.0;
  for (std::size_t i = 0; i < snr.size(); ++i) {
    const bool active = peak > 0.0 && energy[i] > 0.0 && 10.0 * std::log10(energy[i] / peak) >= cfg.seg_snr_gate_db;
    if (!active) {
      ++m.skipped;
      continue;
    }
    sum += snr[i];
    ++m.frames;
  }
  if (m.frames == 0) throw InputError("segSNR: clean signal is silent");
  m.value = sum / static_cast<double>(m.frames);
  return m;
}

std::vector<double> autocorrelation(const std::vector<double>& frame, std::size_t order) {
  std::vector<double> r(order + 1, 0.0);
  for (std::size_t k = 0; k <= order && k < frame.size(); ++k) {
    for (std::size_t i = k; i < frame.size(); ++i) r[k] += frame[i] * frame[i - k];
  }
  return r;
}

std::optional<std::vector<double>> lpc(const std::vector<double>& r) {
  const std::size_t p = r.size() - 1;
  if (!(r[0] > 0.0) || !std::isfinite(r[0])) return std::nullopt;
  std::vector<double> a(p + 1, 0.0), prev(p + 1, 0.0);
  a[0] = 1.0;
  double err = r[0];
  for (std::size_t i = 1; i <= p; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
    const double k = -acc / err;
    prev = a;
    for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= (1.0 - k * k);
    if (!(err > 0.0)) return std::nullopt;
  }
  return a;
}

std::optional<double> llr_frame(const std::vector<double>& clean_frame, const std::vector<double>& processed_frame,
                                std::size_t order) {
  const auto rc = autocorrelation(clean_frame, order);
  const auto rp = autocorrelation(processed_frame, order);
  const auto ac = lpc(rc);
  const auto ap = lpc(rp);
  if (!ac || !ap) return std::nullopt;
  const double num = quad_form(*ap, rc);
  const double den = quad_form(*ac, rc);
  if (!(den > 0.0) || !(num > 0.0)) return std::nullopt;
  return std::max(0.0, std::log(num / den));
}

Measure llr(const dsp::Waveform& clean, const dsp::Waveform& processed, const MetricConfig& cfg) {
  cfg.validate();
  const Pair p = align(clean, processed);
  std::vector<double> values;
  Measure m;
  for_each_frame(p, cfg.frame_length(clean.sample_rate), cfg.hop_length(clean.sample_rate),
                 [&](const std::vector<double>& c, const std::vector<double>& q) {
                   const auto v = llr_frame(c, q, cfg.lpc_order);
                   if (v) {
                     values.push_back(*v);
                   } else {
                     ++m.skipped;
                   }
                 });
  if (values.empty()) throw InputError("LLR: every frame is silent or degenerate");
  m.frames = values.size();
  m.value = trimmed_mean(values, cfg.trim);
  return m;
}

double wss_frame_distance(const std::vector<double>& clean_db, const std::vector<double>& processed_db, double kmax,
                          double klocmax) {
  const std::size_t nb = clean_db.size();
  if (nb < 2 || processed_db.size() != nb) throw ShapeError("wss: band energy vectors must match and hold >= 2 bands");
  auto analyse = [&](const std::vector<double>& e, std::vector<double>& slope, std::vector<double>& weight) {
    slope.resize(nb - 1);
    for (std::size_t i = 0; i + 1 < nb; ++i) slope[i] = e[i + 1] - e[i];
    const double db_max = *std::max_element(e.begin(), e.end());
    weight.resize(nb - 1);
    for (std::size_t i = 0; i + 1 < nb; ++i) {
      // Nearest local peak: follow the slope sign from band i.
      double peak;
      if (slope[i] > 0.0) {
        std::size_t n = i;
        while (n < nb - 1 && slope[n] > 0.0) ++n;
        peak = e[n - 1];
      } else {
        long n = static_cast<long>(i);
        while (n >= 0 && slope[static_cast<std::size_t>(n)] <= 0.0) --n;
        peak = e[static_cast<std::size_t>(n + 1)];
      }
      const double w_max = kmax / (kmax + db_max - e[i]);
      const double w_loc = klocmax / (klocmax + peak - e[i]);
      weight[i] = w_max * w_loc;
    }
  };
  std::vector<double> sc, wc, sp, wp;
  analyse(clean_db, sc, wc);
  analyse(processed_db, sp, wp);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < nb; ++i) {
    const double w = 0.5 * (wc[i] + wp[i]);
    num += w * (sc[i] - sp[i]) * (sc[i] - sp[i]);
    den += w;
  }
  return num / den;
}

BandLayout wss_band_layout(WssBands bands, int sample_rate) {
  BandLayout l;
  if (bands == WssBands::kClassic) {
    l.centre_hz.assign(std::begin(kClassicCentre), std::end(kClassicCentre));
    l.bandwidth_hz.assign(std::begin(kClassicBandwidth), std::end(kClassicBandwidth));
    return l;
  }
  const double z0 = hz_to_bark(0.0), z1 = hz_to_bark(sample_rate / 2.0);
  for (int k = 0; k < 25; ++k) {
    const double lo = z0 + (z1 - z0) * k / 25.0, hi = z0 + (z1 - z0) * (k + 1) / 25.0;
    l.centre_hz.push_back(bark_to_hz(0.5 * (lo + hi)));
    l.bandwidth_hz.push_back(bark_to_hz(hi) - bark_to_hz(lo));
  }
  return l;
}

Measure wss(const dsp::Waveform& clean, const dsp::Waveform& processed, const MetricConfig& cfg) {
  cfg.validate();
  const Pair p = align(clean, processed);
  const std::size_t frame = cfg.frame_length(clean.sample_rate);
  std::size_t n_fft = 1;
  while (n_fft < 2 * frame) n_fft *= 2;
  const std::size_t half = n_fft / 2;
  const double nyquist = clean.sample_rate / 2.0;

  // Gaussian-shaped critical-band filters over bins [0, n_fft / 2).
  const BandLayout layout = wss_band_layout(cfg.wss_bands, clean.sample_rate);
  const double bw_min = layout.bandwidth_hz[0];
  const double min_factor = std::exp(-30.0 / 2.303);
  std::vector<std::vector<double>> bank(layout.centre_hz.size(), std::vector<double>(half));
  for (std::size_t b = 0; b < bank.size(); ++b) {
    const double f0 = layout.centre_hz[b] / nyquist * static_cast<double>(half);
    const double bw = layout.bandwidth_hz[b] / nyquist * static_cast<double>(half);
    const double norm = std::log(bw_min) - std::log(layout.bandwidth_hz[b]);
    for (std::size_t j = 0; j < half; ++j) {
      const double x = (static_cast<double>(j) - std::floor(f0)) / bw;
      const double v = std::exp(-11.0 * x * x + norm);
      bank[b][j] = v > min_factor ? v : 0.0;
    }
  }

  const dsp::RealFft fft(n_fft);
  std::vector<double> buf(n_fft);
  std::vector<std::complex<double>> spec(half + 1);
  auto power = [&](const std::vector<double>& x) {
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(x.begin(), x.end(), buf.begin());
    fft.forward(buf.data(), spec.data());
    std::vector<double> pw(half);
    for (std::size_t j = 0; j < half; ++j) pw[j] = std::norm(spec[j]);
    return pw;
  };

  std::vector<double> values;
  Measure m;
  for_each_frame(p, frame, cfg.hop_length(clean.sample_rate),
                 [&](const std::vector<double>& c, const std::vector<double>& q) {
                   double ec = 0.0, eq = 0.0;
                   for (std::size_t i = 0; i < c.size(); ++i) {
                     ec += c[i] * c[i];
                     eq += q[i] * q[i];
                   }
                   if (!(ec > 0.0) || !(eq > 0.0)) {
                     ++m.skipped;
                     return;
                   }
                   values.push_back(wss_frame_distance(band_energies_db(power(c), bank),
                                                       band_energies_db(power(q), bank), cfg.wss_kmax,
                                                       cfg.wss_klocmax));
                 });
  if (values.empty()) throw InputError("WSS: every frame is silent");
  m.frames = values.size();
  m.value = trimmed_mean(values, cfg.trim);
  return m;
}

double Regression::apply(double llr_v, double wss_v, double seg_v, double pesq_v) const {
  return intercept + c_llr * llr_v + c_pesq * pesq_v + c_wss * wss_v + c_seg * seg_v;
}

json CompositeCoefficients::to_json() const {
  auto r = [](const Regression& g) {
    return json{{"intercept", g.intercept}, {"llr", g.c_llr}, {"pesq", g.c_pesq}, {"wss", g.c_wss}, {"seg_snr", g.c_seg}};
  };
  return {{"csig", r(csig)}, {"cbak", r(cbak)}, {"covl", r(covl)}, {"clamp", {lo, hi}}};
}

std::string CompositeCoefficients::describe() const {
  auto r = [](const char* name, const Regression& g) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s=%g%+g*llr%+g*pesq%+g*wss%+g*seg_snr", name, g.intercept, g.c_llr, g.c_pesq,
                  g.c_wss, g.c_seg);
    return std::string(buf);
  };
  char clamp[64];
  std::snprintf(clamp, sizeof clamp, " clamp=[%g,%g]", lo, hi);
  return r("csig", csig) + " " + r("cbak", cbak) + " " + r("covl", covl) + clamp;
}

Composite composite_scores(double llr_v, double wss_v, double seg_snr_v, double pesq, const CompositeCoefficients& k) {
  for (double v : {llr_v, wss_v, seg_snr_v, pesq}) {
    if (!std::isfinite(v)) throw InputError("composite_scores: non-finite input");
  }
  auto c = [&](const Regression& g) { return std::clamp(g.apply(llr_v, wss_v, seg_snr_v, pesq), k.lo, k.hi); };
  return {c(k.csig), c(k.cbak), c(k.covl)};
}

namespace {

double checked_pesq(double v, const std::string& where) {
  if (!std::isfinite(v) || v < kPesqMin || v > kPesqMax) {
    throw InputError(where + ": PESQ score " + std::to_string(v) + " outside [-0.5, 4.5]");
  }
  return v;
}

double parse_score(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InputError(where + ": cannot parse PESQ score '" + text + "'");
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size()) throw InputError(where + ": trailing text after PESQ score '" + text + "'");
  return checked_pesq(v, where);
}

class NoPesq : public PesqProvider {
 public:
  std::optional<double> score(const std::string&, const fs::path&, const fs::path&) const override {
    return std::nullopt;
  }
  std::string describe() const override { return "none"; }
};

class ConstPesq : public PesqProvider {
 public:
  explicit ConstPesq(double v) : v_(checked_pesq(v, "const PESQ")) {}
  std::optional<double> score(const std::string&, const fs::path&, const fs::path&) const override { return v_; }
  std::string describe() const override { return "const:" + snr_label(v_); }

 private:
  double v_;
};

class CsvPesq : public PesqProvider {
 public:
  explicit CsvPesq(const fs::path& path) : path_(path) {
    std::ifstream f(path);
    if (!f) throw InputError(path.string() + ": cannot open PESQ table");
    std::string line;
    std::size_t no = 0;
    while (std::getline(f, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw InputError(path.string() + ":" + std::to_string(no) + ": expected id,pesq");
      const std::string id = line.substr(0, comma), val = line.substr(comma + 1);
      if (no == 1 && id == "id") continue;
      scores_[id] = parse_score(val, path.string() + ":" + std::to_string(no));
    }
  }
  std::optional<double> score(const std::string& key, const fs::path&, const fs::path&) const override {
    if (auto it = scores_.find(key); it != scores_.end()) return it->second;
    const auto slash = key.find('/');
    if (slash != std::string::npos) {
      if (auto it = scores_.find(key.substr(slash + 1)); it != scores_.end()) return it->second;
    }
    return std::nullopt;
  }
  std::string describe() const override { return "csv:" + path_.string(); }

 private:
  fs::path path_;
  std::map<std::string, double> scores_;
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

class CommandPesq : public PesqProvider {
 public:
  explicit CommandPesq(std::string cmd) : cmd_(std::move(cmd)) {
    if (cmd_.empty()) throw InputError("cmd: PESQ provider needs a command");
  }
  std::optional<double> score(const std::string& key, const fs::path& clean,
                              const fs::path& degraded) const override {
    const std::string line = cmd_ + " " + shell_quote(clean.string()) + " " + shell_quote(degraded.string());
    FILE* pipe = ::popen(line.c_str(), "r");
    if (!pipe) throw InputError(key + ": cannot run PESQ command");
    std::string out;
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe)) out += buf;
    const int status = ::pclose(pipe);
    if (status != 0) throw InputError(key + ": PESQ command exited with status " + std::to_string(status));
    std::istringstream in(out);
    std::string last, l;
    while (std::getline(in, l)) {
      if (!l.empty()) last = l;
    }
    return parse_score(last, key + ": PESQ command");
  }
  std::string describe() const override { return "cmd:" + cmd_; }

 private:
  std::string cmd_;
};

}  // namespace

std::unique_ptr<PesqProvider> make_pesq_provider(const std::string& spec) {
  if (spec.empty() || spec == "none") return std::make_unique<NoPesq>();
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  if (kind == "const") return std::make_unique<ConstPesq>(parse_score(arg, "const PESQ"));
  if (kind == "csv") return std::make_unique<CsvPesq>(arg);
  if (kind == "cmd") return std::make_unique<CommandPesq>(arg);
  throw InputError("unknown PESQ source '" + spec + "' (expected none, const:, csv: or cmd:)");
}

std::vector<Aggregate> MetricReport::by_condition() const {
  std::map<std::tuple<std::string, std::string, double>, std::vector<const UtteranceScores*>> groups;
  for (const auto& r : rows) {
    if (r.error.empty()) groups[{r.system, r.noise, r.snr_db}].push_back(&r);
  }
  auto reduce = [](const std::vector<const UtteranceScores*>& g) {
    Aggregate a;
    a.count = g.size();
    double pesq = 0.0, csig = 0.0, cbak = 0.0, covl = 0.0;
    bool all_pesq = true, all_comp = true;
    for (const auto* r : g) {
      a.seg_snr += r->seg_snr;
      a.llr += r->llr;
      a.wss += r->wss;
      all_pesq &= r->pesq.has_value();
      all_comp &= r->composite.has_value();
      if (r->pesq) pesq += *r->pesq;
      if (r->composite) {
        csig += r->composite->csig;
        cbak += r->composite->cbak;
        covl += r->composite->covl;
      }
    }
    const double n = static_cast<double>(g.size());
    a.seg_snr /= n;
    a.llr /= n;
    a.wss /= n;
    if (all_pesq) a.pesq = pesq / n;
    if (all_comp) {
      a.csig = csig / n;
      a.cbak = cbak / n;
      a.covl = covl / n;
    }
    return a;
  };
  std::vector<Aggregate> out;
  for (const auto& [key, g] : groups) {
    Aggregate a = reduce(g);
    a.system = std::get<0>(key);
    a.noise = std::get<1>(key);
    a.snr = snr_label(std::get<2>(key));
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Aggregate> MetricReport::summary() const {
  std::map<std::string, std::vector<const UtteranceScores*>> groups;
  for (const auto& r : rows) {
    if (r.error.empty()) groups[r.system].push_back(&r);
  }
  std::vector<Aggregate> out;
  for (const auto& [system, g] : groups) {
    MetricReport sub;
    for (const auto* r : g) {
      UtteranceScores copy = *r;
      copy.noise = "all";
      copy.snr_db = 0.0;
      sub.rows.push_back(std::move(copy));
    }
    Aggregate a = sub.by_condition().front();
    a.snr = "all";
    out.push_back(std::move(a));
  }
  return out;
}

std::string MetricReport::per_utterance_header() {
  return "id,system,noise,snr_db,seg_snr,llr,wss,pesq,csig,cbak,covl,error";
}

std::string MetricReport::aggregate_header() {
  return "system,noise,snr_db,count,seg_snr,llr,wss,pesq,csig,cbak,covl";
}

void MetricReport::write_csvs(const fs::path& dir) const {
  fs::create_directories(dir);
  const std::string comment =
      "# coefficients " + coefficients.describe() + "; pesq_source=" + (pesq_source.empty() ? "none" : pesq_source) + "\n";
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::trunc);
    if (!f) throw InputError((dir / name).string() + ": cannot open for writing");
    f << comment;
    return f;
  };
  {
    auto f = open("per_utterance.csv");
    f << per_utterance_header() << '\n';
    for (const auto& r : rows) {
      const bool ok = r.error.empty();
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      f << r.id << ',' << r.system << ',' << r.noise << ',' << snr_label(r.snr_db) << ','
        << (ok ? fmt(r.seg_snr) : "") << ',' << (ok ? fmt(r.llr) : "") << ',' << (ok ? fmt(r.wss) : "") << ','
        << fmt_opt(r.pesq) << ',' << (r.composite ? fmt(r.composite->csig) : "") << ','
        << (r.composite ? fmt(r.composite->cbak) : "") << ',' << (r.composite ? fmt(r.composite->covl) : "") << ','
        << err << '\n';
    }
  }
  auto write_aggs = [&](const char* name, const std::vector<Aggregate>& aggs) {
    auto f = open(name);
    f << aggregate_header() << '\n';
    for (const auto& a : aggs) {
      f << a.system << ',' << a.noise << ',' << a.snr << ',' << a.count << ',' << fmt(a.seg_snr) << ',' << fmt(a.llr)
        << ',' << fmt(a.wss) << ',' << fmt_opt(a.pesq) << ',' << fmt_opt(a.csig) << ',' << fmt_opt(a.cbak) << ','
        << fmt_opt(a.covl) << '\n';
    }
  };
  write_aggs("by_condition.csv", by_condition());
  write_aggs("summary.csv", summary());
}

MetricReport evaluate_pairs(const std::vector<EvalItem>& items, const PesqProvider& pesq, const MetricConfig& cfg,
                            const CompositeCoefficients& coeff, std::size_t threads) {
  cfg.validate();
  struct Job {
    const EvalItem* item;
    std::string system;
    fs::path degraded;
  };
  std::vector<Job> jobs;
  for (const auto& it : items) {
    jobs.push_back({&it, "noisy", it.noisy});
    if (!it.enhanced.empty()) jobs.push_back({&it, "enhanced", it.enhanced});
  }
  std::vector<UtteranceScores> rows(jobs.size());
  auto run = [&](std::size_t i) {
    const Job& j = jobs[i];
    UtteranceScores& r = rows[i];
    r.id = j.item->id;
    r.system = j.system;
    r.noise = j.item->noise;
    r.snr_db = j.item->snr_db;
    try {
      auto clean = dsp::read_wav(j.item->clean, 0);
      for (auto& v : clean.samples) v *= j.item->clean_gain;
      const auto degraded = dsp::read_wav(j.degraded, 0);
      if (clean.samples.size() != degraded.samples.size()) {
        throw InputError("length mismatch: clean " + std::to_string(clean.samples.size()) + " vs " + j.system + " " +
                         std::to_string(degraded.samples.size()) + " samples");
      }
      r.seg_snr = seg_snr(clean, degraded, cfg).value;
      r.llr = llr(clean, degraded, cfg).value;
      r.wss = wss(clean, degraded, cfg).value;
      r.pesq = pesq.score(j.system + "/" + r.id, j.item->clean, j.degraded);
      if (r.pesq) r.composite = composite_scores(r.llr, r.wss, r.seg_snr, *r.pesq, coeff);
    } catch (const Error& e) {
      r.error = e.what();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads ? threads : data::default_threads(), jobs.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < jobs.size(); i += workers) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.id, a.system) < std::tie(b.id, b.system);
  });
  MetricReport rep;
  rep.rows = std::move(rows);
  rep.coefficients = coeff;
  rep.pesq_source = pesq.describe();
  return rep;
}

}  // namespace nitcg::metrics
