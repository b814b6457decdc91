// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "nitcg/config_json.h"
#include "nitcg/error.h"
#include "nitcg/wav.h"

namespace nitcg::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kManifestFormat[] = "nitcg-manifest";
constexpr int kManifestVersion = 1;
// Peak allowed in a rendered mixture before both components are scaled.
constexpr double kPeakLimit = 0.99;

std::string snr_tag(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+gdB", snr);
  return buf;
}

std::string speaker_of(const std::string& id) {
  const auto pos = id.find('_');
  return pos == std::string::npos ? id : id.substr(0, pos);
}

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

std::string to_string(SplitMode mode) { return mode == SplitMode::kPaired ? "paired" : "disjoint"; }

SplitMode parse_split_mode(const std::string& text) {
  if (text == "paired") return SplitMode::kPaired;
  if (text == "disjoint") return SplitMode::kDisjoint;
  throw InputError("unknown split mode '" + text + "' (expected paired or disjoint)");
}

json UtteranceRecord::to_json() const {
  json j = {{"id", id},     {"path", path},   {"domain", domain},
            {"pool", pool}, {"split", split}, {"speaker", speaker}};
  if (noisy()) {
    j["source_id"] = source_id;
    j["source_path"] = source_path;
    j["snr_db"] = snr_db ? json(*snr_db) : json(nullptr);
    j["noise_file"] = noise_file;
    j["noise_offset"] = noise_offset;
    j["gain"] = gain;
  }
  return j;
}

UtteranceRecord UtteranceRecord::from_json(const json& j) {
  static const std::set<std::string> known{"id",          "path",     "domain",     "pool",
                                           "split",       "speaker",  "source_id",  "source_path",
                                           "snr_db",      "noise_file", "noise_offset", "gain"};
  if (!j.is_object()) throw InputError("record is not an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw InputError("record has unknown key '" + k + "'");
  }
  UtteranceRecord r;
  r.id = j.at("id").get<std::string>();
  r.path = j.at("path").get<std::string>();
  r.domain = j.at("domain").get<std::string>();
  r.pool = j.at("pool").get<std::string>();
  r.split = j.value("split", std::string("train"));
  r.speaker = j.value("speaker", std::string());
  r.source_id = j.value("source_id", std::string());
  r.source_path = j.value("source_path", std::string());
  if (j.contains("snr_db") && !j.at("snr_db").is_null()) r.snr_db = j.at("snr_db").get<double>();
  r.noise_file = j.value("noise_file", std::string());
  r.noise_offset = j.value("noise_offset", std::uint64_t{0});
  r.gain = j.value("gain", 1.0);
  return r;
}

std::size_t CorpusManifest::label_index(const std::string& domain) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == domain) return i;
  }
  throw InputError("unknown domain '" + domain + "'");
}

std::size_t CorpusManifest::count_pool(const std::string& pool) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.pool == pool; }));
}

std::string manifest_text(const CorpusManifest& m) {
  json header = {{"format", kManifestFormat},
                 {"version", kManifestVersion},
                 {"labels", m.labels},
                 {"snrs", m.snrs},
                 {"split_mode", to_string(m.split_mode)},
                 {"seed", m.seed},
                 {"rendered", m.rendered},
                 {"stft", dsp::stft_json(m.stft)},
                 {"features", dsp::features_json(m.features)},
                 {"norm", dsp::norm_json(m.norm)}};
  std::string out = header.dump() + "\n";
  for (const auto& r : m.records) out += r.to_json().dump() + "\n";
  return out;
}

CorpusManifest parse_manifest(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  CorpusManifest m;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("format", std::string()) != kManifestFormat) {
          throw InputError(where + ": not a corpus manifest");
        }
        if (j.at("version").get<int>() != kManifestVersion) {
          throw InputError(where + ": unsupported manifest version");
        }
        m.labels = j.at("labels").get<std::vector<std::string>>();
        m.snrs = j.at("snrs").get<std::vector<double>>();
        m.split_mode = parse_split_mode(j.at("split_mode").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.rendered = j.at("rendered").get<bool>();
        m.stft = dsp::stft_from_json(j.at("stft"));
        m.features = dsp::features_from_json(j.at("features"));
        const json& nj = j.at("norm");
        if (!nj.at("mean").empty()) m.norm = dsp::norm_from_json(nj);
        have_header = true;
      } else {
        m.records.push_back(UtteranceRecord::from_json(j));
      }
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    } catch (const FormatError&) {
      throw;
    } catch (const InputError& e) {
      const std::string msg = e.what();
      throw InputError(msg.rfind(origin, 0) == 0 ? msg : where + ": " + msg);
    }
  }
  if (!have_header) throw InputError(origin + ": empty manifest");
  if (m.labels.empty() || m.labels[0] != "clean") {
    throw InputError(origin + ": label list must start with 'clean'");
  }
  return m;
}

void write_manifest(const CorpusManifest& m, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError(path.string() + ": cannot open for writing");
  f << manifest_text(m);
  if (!f) throw InputError(path.string() + ": write failed");
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError(path.string() + ": cannot open manifest");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_manifest(ss.str(), path.string());
}

std::size_t default_threads() {
  if (const char* env = std::getenv("NITCG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

CorpusManifest synthesize_corpus(const SynthOptions& o, const fs::path& out_dir) {
  o.stft.validate();
  if (o.clean_files.empty()) throw InputError("synthesize_corpus: no clean files");
  if (o.noise_files.empty()) throw InputError("synthesize_corpus: no noise files");
  if (o.snrs.empty()) throw InputError("synthesize_corpus: no SNR levels");
  for (double s : o.snrs) {
    if (!std::isfinite(s)) throw InputError("synthesize_corpus: non-finite SNR");
  }

  // Ids are file stems; both lists are processed in sorted id order.
  std::map<std::string, fs::path> clean, noise;
  for (const auto& p : o.clean_files) {
    if (!clean.emplace(p.stem().string(), p).second) {
      throw InputError("duplicate clean utterance id '" + p.stem().string() + "'");
    }
  }
  for (const auto& p : o.noise_files) {
    const std::string name = p.stem().string();
    if (name == "clean") throw InputError("a noise type may not be named 'clean'");
    if (!noise.emplace(name, p).second) throw InputError("duplicate noise name '" + name + "'");
  }

  CorpusManifest m;
  m.snrs = o.snrs;
  m.split_mode = o.split_mode;
  m.seed = o.seed;
  m.rendered = !o.manifest_only;
  m.stft = o.stft;
  m.features = o.features;
  for (const auto& [name, p] : noise) m.labels.push_back(name);

  std::vector<std::string> ids;
  for (const auto& [id, p] : clean) ids.push_back(id);
  std::set<std::string> test_speakers(o.test_speakers.begin(), o.test_speakers.end());
  auto split_of = [&](const std::string& id) {
    return test_speakers.count(speaker_of(id)) ? std::string("test") : std::string("train");
  };

  // Disjoint: the first half (rounded up) of the sorted ids supplies noisy
  // mixtures, the second half forms the clean pool.
  std::vector<std::string> sources = ids, pool = ids;
  if (o.split_mode == SplitMode::kDisjoint) {
    if (ids.size() < 2) throw InputError("disjoint split needs at least two clean utterances");
    const std::size_t half = (ids.size() + 1) / 2;
    sources.assign(ids.begin(), ids.begin() + static_cast<long>(half));
    pool.assign(ids.begin() + static_cast<long>(half), ids.end());
  }
  std::set<std::string> pool_set(pool.begin(), pool.end());

  for (const auto& id : ids) {
    UtteranceRecord r;
    r.id = id;
    r.path = "clean/" + id + ".wav";
    r.domain = "clean";
    r.pool = pool_set.count(id) ? "clean" : "source";
    r.speaker = speaker_of(id);
    r.split = split_of(id);
    m.records.push_back(std::move(r));
  }
  const std::size_t n_clean_records = m.records.size();
  for (const auto& id : sources) {
    for (const auto& [name, p] : noise) {
      for (double snr : o.snrs) {
        UtteranceRecord r;
        r.id = id + "__" + name + "__" + snr_tag(snr);
        r.path = "noisy/" + name + "/" + snr_tag(snr) + "/" + id + ".wav";
        r.domain = name;
        r.pool = "noisy";
        r.source_id = id;
        r.source_path = "clean/" + id + ".wav";
        r.snr_db = snr;
        r.noise_file = name;
        r.speaker = speaker_of(id);
        r.split = split_of(id);
        m.records.push_back(std::move(r));
      }
    }
  }
  if (o.manifest_only) return m;

  const std::size_t threads = o.threads ? o.threads : default_threads();
  std::mutex err_mu;
  std::vector<std::string> errors;
  auto record_error = [&](const std::string& what) {
    std::lock_guard<std::mutex> lock(err_mu);
    errors.push_back(what);
  };

  // Inputs.
  std::vector<std::string> noise_names(noise.size());
  std::vector<dsp::Waveform> noise_waves(noise.size());
  {
    std::size_t k = 0;
    for (const auto& [name, p] : noise) noise_names[k++] = name;
  }
  parallel_for(noise_names.size(), threads, [&](std::size_t i) {
    try {
      noise_waves[i] = dsp::read_wav(noise.at(noise_names[i]), o.stft.sample_rate);
      if (noise_waves[i].samples.empty()) throw InputError(noise.at(noise_names[i]).string() + ": empty");
    } catch (const Error& e) {
      record_error(e.what());
    }
  });
  std::vector<dsp::Waveform> clean_waves(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    try {
      clean_waves[i] = dsp::read_wav(clean.at(ids[i]), o.stft.sample_rate);
      if (clean_waves[i].samples.empty()) throw InputError(clean.at(ids[i]).string() + ": empty");
    } catch (const Error& e) {
      record_error(e.what());
    }
  });
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    std::string msg = std::to_string(errors.size()) + " input file(s) failed:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InputError(msg);
  }

  // Offsets are drawn sequentially in record order so they do not depend on
  // the worker count.
  std::mt19937_64 rng(o.seed);
  std::map<std::string, std::size_t> noise_slot, clean_slot;
  for (std::size_t i = 0; i < noise_names.size(); ++i) noise_slot[noise_names[i]] = i;
  for (std::size_t i = 0; i < ids.size(); ++i) clean_slot[ids[i]] = i;
  for (std::size_t i = n_clean_records; i < m.records.size(); ++i) {
    auto& r = m.records[i];
    const std::uint64_t draw = rng();
    if (o.random_noise_offset) r.noise_offset = draw % noise_waves[noise_slot[r.noise_file]].samples.size();
  }

  fs::create_directories(out_dir / "clean");
  for (const auto& [name, p] : noise) {
    for (double snr : o.snrs) fs::create_directories(out_dir / "noisy" / name / snr_tag(snr));
  }

  std::vector<dsp::FeatureStats> stats(m.records.size());
  parallel_for(m.records.size(), threads, [&](std::size_t i) {
    auto& r = m.records[i];
    try {
      dsp::Waveform wave;
      if (!r.noisy()) {
        wave = clean_waves[clean_slot[r.id]];
      } else {
        const auto& c = clean_waves[clean_slot[r.source_id]];
        const auto& n = noise_waves[noise_slot[r.noise_file]];
        wave = dsp::mix_at_snr(c, n, *r.snr_db, r.noise_offset);
        double peak = 0.0;
        for (double v : wave.samples) peak = std::max(peak, std::abs(v));
        if (peak > kPeakLimit) {
          r.gain = kPeakLimit / peak;
          for (auto& v : wave.samples) v *= r.gain;
        }
      }
      dsp::write_wav(out_dir / r.path, wave);
      if (r.split == "train" && r.pool != "source") {
        // Statistics use the written (quantised) signal.
        const auto stored = dsp::read_wav(out_dir / r.path, o.stft.sample_rate);
        stats[i].add(dsp::compress(dsp::stft(stored, o.stft).magnitude, o.features));
      }
    } catch (const Error& e) {
      record_error(r.id + ": " + e.what());
    }
  });
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    std::string msg = std::to_string(errors.size()) + " utterance(s) failed:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InputError(msg);
  }

  dsp::FeatureStats total;
  for (const auto& s : stats) total.merge(s);
  if (total.frames() > 0) m.norm = total.finish();
  write_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

json ValidationReport::to_json() const {
  json issues_json = json::array();
  for (const auto& i : issues) {
    issues_json.push_back({{"record", i.record_id}, {"check", i.check}, {"message", i.message}});
  }
  return {{"pass", pass()}, {"issue_count", issues.size()}, {"issues", issues_json}};
}

ValidationReport validate_manifest(const CorpusManifest& m, const fs::path& root) {
  ValidationReport rep;
  auto issue = [&](const std::string& id, const std::string& check, const std::string& msg) {
    rep.issues.push_back({id, check, msg});
  };

  if (m.labels.empty() || m.labels[0] != "clean") issue("", "labels", "label list must start with 'clean'");
  std::set<std::string> names;
  for (const auto& l : m.labels) {
    if (!names.insert(l).second) issue("", "labels", "duplicate label '" + l + "'");
  }
  if (!std::is_sorted(m.labels.begin() + (m.labels.empty() ? 0 : 1), m.labels.end())) {
    issue("", "labels", "noise names are not sorted");
  }
  if (!m.norm.empty() && m.norm.mean.size() != m.stft.bins()) {
    issue("", "norm", "normalisation length differs from the bin count");
  }

  std::set<std::string> ids;
  std::set<std::string> pool_clean, sources;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) issue(r.id, "unique_id", "duplicate record id");
    if (r.split != "train" && r.split != "test") issue(r.id, "split", "unknown split '" + r.split + "'");
    if (!names.count(r.domain)) issue(r.id, "domain", "domain '" + r.domain + "' is not a label");
    if (r.noisy()) {
      if (r.pool != "noisy") issue(r.id, "pool", "noisy record outside the noisy pool");
      if (!r.snr_db) {
        issue(r.id, "snr", "missing SNR");
      } else if (std::find(m.snrs.begin(), m.snrs.end(), *r.snr_db) == m.snrs.end()) {
        issue(r.id, "snr", "SNR not in the configured set");
      }
      if (r.source_id.empty()) issue(r.id, "source", "missing source utterance");
      if (r.noise_file != r.domain) issue(r.id, "noise", "noise file differs from the domain");
      if (!(r.gain > 0.0 && r.gain <= 1.0)) issue(r.id, "gain", "gain outside (0, 1]");
      sources.insert(r.source_id);
    } else {
      if (r.pool != "clean" && r.pool != "source") issue(r.id, "pool", "clean record in pool '" + r.pool + "'");
      if (r.snr_db) issue(r.id, "snr", "clean record carries an SNR");
      if (r.pool == "clean") pool_clean.insert(r.id);
    }
    if (m.rendered && !root.empty()) {
      if (!fs::exists(root / r.path)) issue(r.id, "file", "missing file " + r.path);
      if (r.noisy() && !r.source_path.empty() && !fs::exists(root / r.source_path)) {
        issue(r.id, "file", "missing clean reference " + r.source_path);
      }
    }
  }
  if (m.split_mode == SplitMode::kDisjoint) {
    for (const auto& s : sources) {
      if (pool_clean.count(s)) issue(s, "disjoint", "utterance is in the clean pool and a noisy source");
    }
  }
  return rep;
}

void FeatureStore::add_clean(std::string id, Matrix features) {
  if (features.rows != rows_ || features.cols == 0) throw ShapeError("clean item '" + id + "' has a wrong shape");
  clean_.push_back({std::move(id), 0, std::move(features)});
}

void FeatureStore::add_noisy(std::string id, std::size_t label, Matrix features) {
  if (features.rows != rows_ || features.cols == 0) throw ShapeError("noisy item '" + id + "' has a wrong shape");
  if (label == 0 || label > n_noise_) throw InputError("noisy item '" + id + "' has label out of range");
  noisy_.push_back({std::move(id), label, std::move(features)});
}

FeatureStore FeatureStore::load(const CorpusManifest& m, const fs::path& root) {
  if (!m.rendered) throw InputError("manifest was written without audio");
  std::vector<const UtteranceRecord*> todo;
  for (const auto& r : m.records) {
    if (r.split == "train" && (r.pool == "clean" || r.pool == "noisy")) todo.push_back(&r);
  }
  std::vector<Matrix> feats(todo.size());
  std::mutex mu;
  std::vector<std::string> errors;
  parallel_for(todo.size(), default_threads(), [&](std::size_t i) {
    try {
      const auto wave = dsp::read_wav(root / todo[i]->path, m.stft.sample_rate);
      feats[i] = dsp::to_features(dsp::stft(wave, m.stft).magnitude, m.features, m.norm);
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lock(mu);
      errors.push_back(todo[i]->id + ": " + e.what());
    }
  });
  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    std::string msg = "cannot load features:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InputError(msg);
  }
  FeatureStore store(m.n_noise(), m.stft.bins());
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (todo[i]->pool == "clean") {
      store.add_clean(todo[i]->id, std::move(feats[i]));
    } else {
      store.add_noisy(todo[i]->id, m.label_index(todo[i]->domain), std::move(feats[i]));
    }
  }
  if (store.clean().empty() || store.noisy().empty()) {
    throw InputError("training needs a nonempty clean pool and noisy pool");
  }
  return store;
}

Matrix crop_frames(const Matrix& m, std::size_t start, std::size_t crop) {
  Matrix out(m.rows, crop);
  const long n = static_cast<long>(m.cols);
  for (std::size_t t = 0; t < crop; ++t) {
    const std::size_t src = reflect_index(static_cast<long>(start + t), n);
    for (std::size_t r = 0; r < m.rows; ++r) out(r, t) = m(r, src);
  }
  return out;
}

BatchPlan plan_unpaired_batch(const FeatureStore& store, std::size_t batch, std::size_t crop,
                              std::uint64_t seed, std::uint64_t step) {
  if (batch == 0 || crop == 0) throw InputError("batch size and crop length must be positive");
  if (store.clean().empty() || store.noisy().empty()) throw InputError("empty training pool");
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  std::mt19937_64 rng(sq);
  auto uniform = [&](std::size_t n) {  // [0, n)
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  auto start_for = [&](std::size_t frames) {
    return frames > crop ? uniform(frames - crop + 1) : std::size_t{0};
  };
  BatchPlan p;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t ci = uniform(store.clean().size());
    const std::size_t ni = uniform(store.noisy().size());
    p.clean_index.push_back(ci);
    p.noisy_index.push_back(ni);
    p.target_label.push_back(store.n_noise() > 0 ? 1 + uniform(store.n_noise()) : 0);
    p.clean_start.push_back(start_for(store.clean()[ci].features.cols));
    p.noisy_start.push_back(start_for(store.noisy()[ni].features.cols));
  }
  return p;
}

UnpairedBatch sample_unpaired_batch(const FeatureStore& store, std::size_t batch, std::size_t crop,
                                    std::uint64_t seed, std::uint64_t step) {
  UnpairedBatch out;
  out.plan = plan_unpaired_batch(store, batch, crop, seed, step);
  const std::size_t f = store.feature_rows();
  std::vector<float> s(batch * f * crop), y(batch * f * crop);
  for (std::size_t b = 0; b < batch; ++b) {
    const Matrix cs = crop_frames(store.clean()[out.plan.clean_index[b]].features, out.plan.clean_start[b], crop);
    const auto& noisy = store.noisy()[out.plan.noisy_index[b]];
    const Matrix ns = crop_frames(noisy.features, out.plan.noisy_start[b], crop);
    std::copy(cs.values.begin(), cs.values.end(), s.begin() + static_cast<long>(b * f * crop));
    std::copy(ns.values.begin(), ns.values.end(), y.begin() + static_cast<long>(b * f * crop));
    out.y_label.push_back(noisy.label);
  }
  out.s = ad::Tensor::from({batch, f, crop}, std::move(s));
  out.y = ad::Tensor::from({batch, f, crop}, std::move(y));
  out.s_target = out.plan.target_label;
  return out;
}

}  // namespace nitcg::data
