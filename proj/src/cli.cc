// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/cli.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nitcg/checkpoint.h"
#include "nitcg/config_json.h"
#include "nitcg/data.h"
#include "nitcg/error.h"
#include "nitcg/metrics.h"
#include "nitcg/training.h"
#include "nitcg/wav.h"

namespace nitcg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kSubcommands = {"synth-data", "train", "enhance", "eval", "plot"};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Rejects keys of `j` that are not in `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end()) {
      throw InputError(where + ": unknown key '" + k + "'");
    }
  }
}

void merge_into(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw InputError(where + ": expected a JSON object");
  for (const auto& [k, v] : patch.items()) {
    const std::string path = where + "." + k;
    if (!base.contains(k)) throw InputError("unknown config key '" + path + "'");
    if (base[k].is_object() && v.is_object()) {
      merge_into(base[k], v, path);
    } else {
      base[k] = v;
    }
  }
}

// ---- typed sections -------------------------------------------------------

json metric_config_json(const metrics::MetricConfig& c) {
  return {{"frame_ms", c.frame_ms},
          {"hop_ms", c.hop_ms},
          {"seg_snr_min", c.seg_snr_min},
          {"seg_snr_max", c.seg_snr_max},
          {"seg_snr_gate_db", c.seg_snr_gate_db},
          {"lpc_order", c.lpc_order},
          {"trim", c.trim},
          {"wss_bands", c.wss_bands == metrics::WssBands::kClassic ? "classic" : "bark_full"},
          {"wss_kmax", c.wss_kmax},
          {"wss_klocmax", c.wss_klocmax}};
}

metrics::MetricConfig metric_config_from_json(const json& j) {
  check_keys(j,
             {"frame_ms", "hop_ms", "seg_snr_min", "seg_snr_max", "seg_snr_gate_db", "lpc_order", "trim", "wss_bands",
              "wss_kmax", "wss_klocmax"},
             "eval.metrics");
  metrics::MetricConfig c;
  c.frame_ms = j.value("frame_ms", c.frame_ms);
  c.hop_ms = j.value("hop_ms", c.hop_ms);
  c.seg_snr_min = j.value("seg_snr_min", c.seg_snr_min);
  c.seg_snr_max = j.value("seg_snr_max", c.seg_snr_max);
  c.seg_snr_gate_db = j.value("seg_snr_gate_db", c.seg_snr_gate_db);
  c.lpc_order = j.value("lpc_order", c.lpc_order);
  c.trim = j.value("trim", c.trim);
  const std::string bands = j.value("wss_bands", std::string("classic"));
  if (bands == "classic") {
    c.wss_bands = metrics::WssBands::kClassic;
  } else if (bands == "bark_full") {
    c.wss_bands = metrics::WssBands::kBarkFull;
  } else {
    throw InputError("eval.metrics.wss_bands: expected 'classic' or 'bark_full', got '" + bands + "'");
  }
  c.wss_kmax = j.value("wss_kmax", c.wss_kmax);
  c.wss_klocmax = j.value("wss_klocmax", c.wss_klocmax);
  c.validate();
  return c;
}

struct SynthSection {
  std::vector<double> snrs{-5.0, 0.0, 5.0};
  std::string split = "paired";
  std::uint64_t seed = 0;
  bool random_noise_offset = true;
  bool manifest_only = false;
  std::vector<std::string> test_speakers;
  dsp::StftConfig stft;
  dsp::FeatureConfig features;

  json to_json() const {
    return {{"snrs", snrs},
            {"split", split},
            {"seed", seed},
            {"random_noise_offset", random_noise_offset},
            {"manifest_only", manifest_only},
            {"test_speakers", test_speakers},
            {"stft", dsp::stft_json(stft)},
            {"features", dsp::features_json(features)}};
  }
  static SynthSection from_json(const json& j) {
    check_keys(j, {"snrs", "split", "seed", "random_noise_offset", "manifest_only", "test_speakers", "stft", "features"},
               "synth-data");
    SynthSection s;
    s.snrs = j.at("snrs").get<std::vector<double>>();
    s.split = j.at("split").get<std::string>();
    data::parse_split_mode(s.split);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.random_noise_offset = j.at("random_noise_offset").get<bool>();
    s.manifest_only = j.at("manifest_only").get<bool>();
    s.test_speakers = j.at("test_speakers").get<std::vector<std::string>>();
    s.stft = dsp::stft_from_json(j.at("stft"));
    s.features = dsp::features_from_json(j.at("features"));
    if (s.snrs.empty()) throw InputError("synth-data.snrs: at least one SNR is required");
    return s;
  }
};

struct EvalSection {
  std::string pesq = "none";
  std::string split = "test";
  metrics::MetricConfig metrics;

  json to_json() const { return {{"pesq", pesq}, {"split", split}, {"metrics", metric_config_json(metrics)}}; }
  static EvalSection from_json(const json& j) {
    check_keys(j, {"pesq", "split", "metrics"}, "eval");
    EvalSection s;
    s.pesq = j.at("pesq").get<std::string>();
    s.split = j.at("split").get<std::string>();
    s.metrics = metric_config_from_json(j.at("metrics"));
    return s;
  }
};

struct PlotSection {
  std::string metric = "pesq";
  std::string title;
  int width = 640;
  int height = 360;

  json to_json() const { return {{"metric", metric}, {"title", title}, {"width", width}, {"height", height}}; }
  static PlotSection from_json(const json& j) {
    check_keys(j, {"metric", "title", "width", "height"}, "plot");
    PlotSection s;
    s.metric = j.at("metric").get<std::string>();
    s.title = j.at("title").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    static const std::set<std::string> known = {"seg_snr", "llr", "wss", "pesq", "csig", "cbak", "covl"};
    if (!known.count(s.metric)) throw InputError("plot.metric: unknown metric '" + s.metric + "'");
    if (s.width < 200 || s.height < 150) throw InputError("plot: figure must be at least 200 x 150");
    return s;
  }
};

void check_split(const std::string& split, const std::string& where) {
  if (split != "train" && split != "test" && split != "all") {
    throw InputError(where + ": expected 'train', 'test' or 'all', got '" + split + "'");
  }
}

void write_echo(const fs::path& out_dir, const std::string& subcommand, const json& section) {
  fs::create_directories(out_dir);
  const json echo = {{"subcommand", subcommand}, {subcommand, section}};
  std::ofstream f(out_dir / "effective_config.json", std::ios::trunc);
  if (!f) throw InputError((out_dir / "effective_config.json").string() + ": cannot open for writing");
  f << echo.dump(2) << '\n';
}

std::vector<fs::path> wav_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError(dir.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InputError(dir.string() + ": no .wav files");
  return out;
}

bool wanted(const data::UtteranceRecord& r, const std::string& split) {
  return r.noisy() && r.pool != "source" && (split == "all" || r.split == split);
}

// ---- CSV reading for plot ------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& where) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError(where + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError(path.string() + ": cannot open");
  CsvTable t;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError(path.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw InputError(path.string() + ": empty table");
  return t;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// ---- subcommands ---------------------------------------------------------

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

int cmd_synth(const Common& c, const json& cfg, const std::string& clean_dir, const std::string& noise_dir,
              std::ostream& out) {
  const auto s = SynthSection::from_json(cfg);
  data::SynthOptions o;
  o.clean_files = wav_files(clean_dir);
  o.noise_files = wav_files(noise_dir);
  o.snrs = s.snrs;
  o.split_mode = data::parse_split_mode(s.split);
  o.seed = s.seed;
  o.random_noise_offset = s.random_noise_offset;
  o.manifest_only = s.manifest_only;
  o.test_speakers = s.test_speakers;
  o.stft = s.stft;
  o.features = s.features;
  write_echo(c.out, "synth-data", s.to_json());
  const auto m = data::synthesize_corpus(o, c.out);
  const auto report = data::validate_manifest(m, m.rendered ? fs::path(c.out) : fs::path());

  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& r : m.records) {
    if (r.pool == "noisy") counts[{r.domain, fmt("%+g", *r.snr_db)}]++;
  }
  out << "manifest: " << (fs::path(c.out) / "manifest.jsonl").string() << '\n';
  out << "clean pool: " << m.count_pool("clean") << ", sources: " << m.count_pool("source")
      << ", noisy pool: " << m.count_pool("noisy") << '\n';
  out << "noise,snr_db,count\n";
  for (const auto& [k, n] : counts) out << k.first << ',' << k.second << ',' << n << '\n';
  if (!report.pass()) {
    for (const auto& i : report.issues) out << "invalid: " << i.record_id << " [" << i.check << "] " << i.message << '\n';
    throw InputError("synthesised manifest failed validation");
  }
  out << "validation: pass\n";
  return kExitOk;
}

int cmd_train(const Common& c, const json& cfg, const std::string& manifest_path, const std::string& resume,
              bool quiet, std::ostream& out) {
  const auto config = training::TrainConfig::from_json(cfg);
  config.validate();
  const auto manifest = data::read_manifest(manifest_path);
  write_echo(c.out, "train", config.to_json());
  training::TrainOptions o;
  o.out_dir = c.out;
  if (!resume.empty()) o.resume = fs::path(resume);
  o.quiet = quiet;
  const auto r = training::train(config, manifest, fs::path(manifest_path).parent_path(), o);
  out << "mode: " << training::to_string(config.mode) << '\n';
  out << "steps: " << r.steps << ", epochs: " << r.epochs << '\n';
  out << "checkpoint: " << r.final_checkpoint.string() << '\n';
  out << "losses: " << (fs::path(c.out) / "losses.csv").string() << '\n';
  return kExitOk;
}

int cmd_enhance(const Common& c, const json& cfg, const std::string& checkpoint, const std::string& input,
                const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  check_keys(cfg, {"split"}, "enhance");
  const std::string split = cfg.at("split").get<std::string>();
  check_split(split, "enhance.split");
  if (input.empty() == manifest_path.empty()) throw InputError("enhance needs exactly one of --input or --manifest");

  std::vector<std::pair<fs::path, fs::path>> jobs;  // input, output
  const fs::path out_dir = c.out;
  if (!input.empty()) {
    if (fs::is_directory(input)) {
      for (const auto& p : wav_files(input)) jobs.emplace_back(p, out_dir / p.filename());
    } else {
      if (!fs::is_regular_file(input)) throw InputError(input + ": no such file");
      jobs.emplace_back(input, out_dir / fs::path(input).filename());
    }
  } else {
    const auto m = data::read_manifest(manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();
    for (const auto& r : m.records) {
      if (wanted(r, split)) jobs.emplace_back(root / r.path, out_dir / (r.id + ".wav"));
    }
    if (jobs.empty()) throw InputError(manifest_path + ": no noisy records in split '" + split + "'");
  }

  const training::Enhancer enhancer(models::load_checkpoint(checkpoint));
  write_echo(out_dir, "enhance", cfg);
  std::size_t done = 0;
  for (const auto& [in, dst] : jobs) {
    try {
      const auto wave = dsp::read_wav(in, 0);
      dsp::write_wav(dst, enhancer.run(wave));
      ++done;
    } catch (const InputError& e) {
      err << "warning: skipping " << in.string() << ": " << e.what() << '\n';
    }
  }
  out << "enhanced " << done << " of " << jobs.size() << " file(s) into " << out_dir.string() << '\n';
  if (done == 0) throw InputError("no input could be enhanced");
  return kExitOk;
}

int cmd_eval(const Common& c, const json& cfg, const std::string& manifest_path, const std::string& enhanced_dir,
             std::ostream& out, std::ostream& err) {
  const auto s = EvalSection::from_json(cfg);
  check_split(s.split, "eval.split");
  const auto pesq = metrics::make_pesq_provider(s.pesq);
  const auto m = data::read_manifest(manifest_path);
  if (!m.rendered) throw InputError(manifest_path + ": manifest was written without audio");
  const fs::path root = fs::path(manifest_path).parent_path();
  std::vector<metrics::EvalItem> items;
  for (const auto& r : m.records) {
    if (!wanted(r, s.split)) continue;
    metrics::EvalItem it;
    it.id = r.id;
    it.noise = r.domain;
    it.snr_db = r.snr_db.value_or(0.0);
    it.clean = root / r.source_path;
    it.noisy = root / r.path;
    if (!enhanced_dir.empty()) it.enhanced = fs::path(enhanced_dir) / (r.id + ".wav");
    it.clean_gain = r.gain;
    items.push_back(std::move(it));
  }
  if (items.empty()) throw InputError(manifest_path + ": no noisy records in split '" + s.split + "'");
  write_echo(c.out, "eval", s.to_json());
  if (s.pesq == "none") err << "notice: no PESQ source configured; PESQ, CSIG, CBAK and COVL are omitted\n";

  const auto report = metrics::evaluate_pairs(items, *pesq, s.metrics);
  report.write_csvs(c.out);
  std::size_t failed = 0;
  for (const auto& r : report.rows) {
    if (r.error.empty()) continue;
    ++failed;
    err << "warning: " << r.system << '/' << r.id << ": " << r.error << '\n';
  }
  out << metrics::MetricReport::aggregate_header() << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? fmt("%.3f", *v) : std::string(); };
  for (const auto& a : report.summary()) {
    out << a.system << ',' << a.noise << ',' << a.snr << ',' << a.count << ',' << fmt("%.3f", a.seg_snr) << ','
        << fmt("%.3f", a.llr) << ',' << fmt("%.3f", a.wss) << ',' << opt(a.pesq) << ',' << opt(a.csig) << ','
        << opt(a.cbak) << ',' << opt(a.covl) << '\n';
  }
  if (failed == report.rows.size()) throw InputError("every evaluation row failed");
  return kExitOk;
}

int cmd_plot(const Common& c, const json& cfg, const std::vector<std::string>& evals, std::ostream& out) {
  const auto s = PlotSection::from_json(cfg);
  // (system, snr) -> (sum, count), systems in first-seen order
  std::vector<std::string> systems;
  std::map<std::pair<std::string, double>, std::pair<double, std::size_t>> acc;
  std::set<double> snrs;
  std::set<std::string> names;
  bool have_noisy = false;
  for (const auto& spec : evals) {
    std::string name = "enhanced";
    fs::path dir = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos) {
      name = spec.substr(0, eq);
      dir = spec.substr(eq + 1);
      if (name.empty() || name == "noisy") throw InputError("--eval: bad system name in '" + spec + "'");
    }
    if (!names.insert(name).second) throw InputError("--eval: duplicate system name '" + name + "'");
    const fs::path path = dir / "per_utterance.csv";
    const auto t = read_csv(path);
    const auto c_sys = t.column("system", path.string()), c_snr = t.column("snr_db", path.string()),
               c_val = t.column(s.metric, path.string()), c_err = t.column("error", path.string());
    const bool take_noisy = !have_noisy;
    for (const auto& row : t.rows) {
      if (!row[c_err].empty()) continue;
      std::string sys = row[c_sys];
      if (sys == "noisy") {
        if (!take_noisy) continue;
      } else if (sys == "enhanced") {
        sys = name;
      } else {
        continue;
      }
      if (row[c_val].empty()) {
        throw InputError(path.string() + ": column '" + s.metric + "' is empty (was a PESQ source configured?)");
      }
      double snr = 0.0, v = 0.0;
      try {
        snr = std::stod(row[c_snr]);
        v = std::stod(row[c_val]);
      } catch (const std::exception&) {
        throw InputError(path.string() + ": non-numeric value in row of '" + row[0] + "'");
      }
      if (std::find(systems.begin(), systems.end(), sys) == systems.end()) systems.push_back(sys);
      snrs.insert(snr);
      auto& a = acc[{sys, snr}];
      a.first += v;
      a.second += 1;
    }
    have_noisy = true;
  }
  if (systems.empty()) throw InputError("plot: no usable rows");
  // "noisy" first, then evaluations in argument order
  std::stable_partition(systems.begin(), systems.end(), [](const std::string& n) { return n == "noisy"; });

  fs::create_directories(c.out);
  write_echo(c.out, "plot", s.to_json());
  std::vector<std::string> groups;
  for (double snr : snrs) groups.push_back(fmt("%g", snr) + " dB");
  std::vector<BarSeries> series;
  std::ofstream csv(fs::path(c.out) / "figure.csv", std::ios::trunc);
  if (!csv) throw InputError((fs::path(c.out) / "figure.csv").string() + ": cannot open for writing");
  csv << "system,snr_db,count," << s.metric << '\n';
  for (const auto& sys : systems) {
    BarSeries b{sys, {}};
    for (double snr : snrs) {
      const auto it = acc.find({sys, snr});
      if (it == acc.end()) throw InputError("plot: system '" + sys + "' has no rows at " + fmt("%g", snr) + " dB");
      const double mean = it->second.first / static_cast<double>(it->second.second);
      csv << sys << ',' << fmt("%g", snr) << ',' << it->second.second << ',' << fmt("%.6f", mean) << '\n';
      b.values.push_back(mean);
    }
    series.push_back(std::move(b));
  }
  std::ofstream svg(fs::path(c.out) / "figure.svg", std::ios::trunc);
  svg << bar_chart_svg(s.title.empty() ? s.metric + " by SNR" : s.title, s.metric, groups, series, s.width, s.height);
  out << "figure: " << (fs::path(c.out) / "figure.svg").string() << " (" << systems.size() << " system(s), "
      << groups.size() << " SNR group(s))\n";
  return kExitOk;
}

}  // namespace

json default_section(const std::string& subcommand) {
  if (subcommand == "synth-data") return SynthSection{}.to_json();
  if (subcommand == "train") return training::TrainConfig{}.to_json();
  if (subcommand == "enhance") return {{"split", "test"}};
  if (subcommand == "eval") return EvalSection{}.to_json();
  if (subcommand == "plot") return PlotSection{}.to_json();
  throw InputError("unknown subcommand '" + subcommand + "'");
}

void apply_override(json& section, const std::string& dotted, const json& value) {
  json* node = &section;
  std::size_t pos = 0;
  while (true) {
    const auto dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty() || !node->is_object() || !node->contains(key)) {
      throw InputError("unknown config key '" + dotted + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  *node = value;
}

json resolve_config(const std::string& subcommand, const fs::path& config_file,
                    const std::vector<std::string>& overrides) {
  json section = default_section(subcommand);
  if (!config_file.empty()) {
    std::ifstream f(config_file);
    if (!f) throw InputError(config_file.string() + ": cannot open config file");
    json file;
    try {
      file = json::parse(f);
    } catch (const json::parse_error& e) {
      throw InputError(config_file.string() + ": " + e.what());
    }
    if (!file.is_object()) throw InputError(config_file.string() + ": expected a JSON object");
    for (const auto& [k, v] : file.items()) {
      if (k == "subcommand") {
        if (v != subcommand) throw InputError(config_file.string() + ": written for subcommand " + v.dump());
      } else if (std::find(kSubcommands.begin(), kSubcommands.end(), k) == kSubcommands.end()) {
        throw InputError(config_file.string() + ": unknown key '" + k + "'");
      }
    }
    if (file.contains(subcommand)) merge_into(section, file[subcommand], subcommand);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("override '" + o + "' is not key=value");
    std::string key = o.substr(0, eq);
    if (key.rfind(subcommand + ".", 0) == 0) key = key.substr(subcommand.size() + 1);
    const std::string text = o.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    apply_override(section, key, value);
  }
  return section;
}

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<std::string>& groups,
                          const std::vector<BarSeries>& series, int width, int height) {
  static const char* const kColours[] = {"#7f7f7f", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  const double left = 60, right = 150, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  const double span = hi - lo;
  hi += 0.05 * span;
  if (lo < 0.0) lo -= 0.05 * span;
  auto y_of = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt("%.1f", left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  // axes and ticks
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << fmt("%.1f", y_of(0.0)) << "\" x2=\"" << left + pw << "\" y2=\""
    << fmt("%.1f", y_of(0.0)) << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    o << "<text x=\"" << left - 6 << "\" y=\"" << fmt("%.1f", y_of(v) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt("%.2f", v) << "</text>\n";
  }
  o << "<text x=\"16\" y=\"" << fmt("%.1f", top + ph / 2) << "\" transform=\"rotate(-90 16 "
    << fmt("%.1f", top + ph / 2) << ")\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(y_label)
    << "</text>\n";
  const double gw = pw / std::max<std::size_t>(groups.size(), 1);
  const double bw = 0.8 * gw / std::max<std::size_t>(series.size(), 1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + g * gw + 0.1 * gw;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = series[s].values.at(g);
      const double y0 = y_of(std::max(v, 0.0)), y1 = y_of(std::min(v, 0.0));
      o << "<rect class=\"bar\" data-system=\"" << xml_escape(series[s].system) << "\" data-group=\""
        << xml_escape(groups[g]) << "\" x=\"" << fmt("%.2f", gx + s * bw) << "\" y=\"" << fmt("%.2f", y0)
        << "\" width=\"" << fmt("%.2f", bw) << "\" height=\"" << fmt("%.2f", y1 - y0) << "\" fill=\""
        << kColours[s % 6] << "\"><title>" << fmt("%.3f", v) << "</title></rect>\n";
    }
    o << "<text x=\"" << fmt("%.1f", left + (g + 0.5) * gw) << "\" y=\"" << fmt("%.1f", top + ph + 20)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(groups[g]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double ly = top + 10 + 20.0 * s;
    o << "<rect x=\"" << fmt("%.1f", left + pw + 15) << "\" y=\"" << fmt("%.1f", ly) << "\" width=\"12\" height=\"12\" fill=\""
      << kColours[s % 6] << "\"/>\n";
    o << "<text x=\"" << fmt("%.1f", left + pw + 32) << "\" y=\"" << fmt("%.1f", ly + 10) << "\" font-size=\"12\">"
      << xml_escape(series[s].system) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-informed CycleGAN speech enhancement", "nitcg"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "Override a config key: key.path=value (repeatable)");
    auto* o = sub->add_option("--out", common.out, "Output directory");
    if (out_required) o->required();
  };

  std::string clean_dir, noise_dir, split_flag;
  std::vector<double> snrs;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth-data", "Mix clean speech with noise into a training corpus");
  add_common(synth, true);
  synth->add_option("--clean-dir", clean_dir, "Directory of clean .wav files")->required();
  synth->add_option("--noise-dir", noise_dir, "Directory of noise .wav files")->required();
  auto* o_snrs = synth->add_option("--snrs", snrs, "Comma-separated SNRs in dB")->delimiter(',')->allow_extra_args(false);
  auto* o_split = synth->add_option("--split", split_flag, "paired or disjoint");
  auto* o_seed_s = synth->add_option("--seed", seed, "Mixing seed");
  auto* o_monly = synth->add_flag("--manifest-only", "Write only the manifest, no audio");

  std::string manifest, resume, mode;
  std::size_t epochs = 0, max_steps = 0;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train the generators and discriminators");
  add_common(train, true);
  train->add_option("--manifest", manifest, "Corpus manifest")->required();
  auto* o_mode = train->add_option("--mode", mode, "nit or baseline");
  auto* o_epochs = train->add_option("--epochs", epochs, "Epochs");
  auto* o_max = train->add_option("--max-steps", max_steps, "Stop after this many steps (0: no cap)");
  auto* o_seed_t = train->add_option("--seed", seed, "Training seed");
  train->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_flag("--quiet", quiet, "No per-epoch progress");

  std::string checkpoint, input, enh_manifest;
  auto* enhance = app.add_subcommand("enhance", "Enhance noisy recordings with a trained checkpoint");
  add_common(enhance, true);
  enhance->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  enhance->add_option("--input", input, "A .wav file or a directory of them");
  enhance->add_option("--manifest", enh_manifest, "Enhance the noisy records of a manifest");
  auto* o_split_e = enhance->add_option("--split", split_flag, "Manifest split: train, test or all");

  std::string enhanced_dir, pesq_spec;
  auto* eval = app.add_subcommand("eval", "Score noisy and enhanced recordings against clean references");
  add_common(eval, true);
  eval->add_option("--manifest", manifest, "Corpus manifest")->required();
  eval->add_option("--enhanced", enhanced_dir, "Directory of <id>.wav outputs from enhance");
  auto* o_pesq = eval->add_option("--pesq", pesq_spec, "PESQ source: none, const:<v>, csv:<path>, cmd:<command>");
  auto* o_split_v = eval->add_option("--split", split_flag, "Manifest split: train, test or all");

  std::vector<std::string> evals;
  std::string metric;
  auto* plot = app.add_subcommand("plot", "Per-SNR grouped bars from eval outputs");
  add_common(plot, true);
  plot->add_option("--eval", evals, "Eval output directory, optionally NAME=DIR (repeatable)")->required();
  auto* o_metric = plot->add_option("--metric", metric, "seg_snr, llr, wss, pesq, csig, cbak or covl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::vector<std::string> flags;
    auto flag = [&](const std::string& key, const json& v) { flags.push_back(key + "=" + v.dump()); };
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (sub == synth) {
      if (o_snrs->count()) flag("snrs", snrs);
      if (o_split->count()) flag("split", split_flag);
      if (o_seed_s->count()) flag("seed", seed);
      if (o_monly->count()) flag("manifest_only", true);
    } else if (sub == train) {
      if (o_mode->count()) flag("mode", mode);
      if (o_epochs->count()) flag("epochs", epochs);
      if (o_max->count()) flag("max_steps", max_steps);
      if (o_seed_t->count()) flag("seed", seed);
    } else if (sub == enhance) {
      if (o_split_e->count()) flag("split", split_flag);
    } else if (sub == eval) {
      if (o_pesq->count()) flag("pesq", pesq_spec);
      if (o_split_v->count()) flag("split", split_flag);
    } else if (sub == plot) {
      if (o_metric->count()) flag("metric", metric);
    }
    // Flags sit between the config file and explicit --set overrides.
    flags.insert(flags.end(), common.overrides.begin(), common.overrides.end());
    const json cfg = resolve_config(name, common.config, flags);

    if (sub == synth) return cmd_synth(common, cfg, clean_dir, noise_dir, out);
    if (sub == train) return cmd_train(common, cfg, manifest, resume, quiet, out);
    if (sub == enhance) return cmd_enhance(common, cfg, checkpoint, input, enh_manifest, out, err);
    if (sub == eval) return cmd_eval(common, cfg, manifest, enhanced_dir, out, err);
    return cmd_plot(common, cfg, evals, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const json::exception& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"nitcg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace nitcg::cli
