// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "nitcg/data.h"
#include "nitcg/error.h"
#include "nitcg/wav.h"
#include "signals.h"

using namespace nitcg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nitcg_test_data_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Four clean utterances of unequal length and two noises.
data::SynthOptions toy_inputs(const fs::path& dir) {
  fs::create_directories(dir / "in");
  data::SynthOptions o;
  for (int i = 0; i < 4; ++i) {
    const std::size_t n = 6000 + 1700 * static_cast<std::size_t>(i);
    dsp::Waveform w = signals::sine(n, 220.0 * (i + 1), 0.3 + 0.1 * i);
    const auto extra = signals::white(n, 40 + i, 0.01);
    for (std::size_t k = 0; k < n; ++k) w.samples[k] += extra.samples[k];
    const fs::path p = dir / "in" / ("spk" + std::to_string(i % 2) + "_utt" + std::to_string(i) + ".wav");
    dsp::write_wav(p, w);
    o.clean_files.push_back(p);
  }
  dsp::write_wav(dir / "in" / "hum.wav", signals::sine(5000, 97.0, 0.4));
  dsp::write_wav(dir / "in" / "hiss.wav", signals::white(23000, 9, 0.2));
  o.noise_files = {dir / "in" / "hiss.wav", dir / "in" / "hum.wav"};
  o.snrs = {0.0, 5.0};
  o.seed = 11;
  return o;
}

}  // namespace

TEST_CASE("record counts follow the pool laws") {
  data::SynthOptions o;
  for (int i = 0; i < 1194; ++i) o.clean_files.push_back("clean/u" + std::to_string(10000 + i) + ".wav");
  for (const char* n : {"babble", "car", "street", "cafe", "white"}) o.noise_files.push_back(std::string(n) + ".wav");
  o.snrs = {0.0, 5.0, 10.0};
  o.manifest_only = true;

  const auto paired = data::synthesize_corpus(o, "unused");
  CHECK(paired.count_pool("noisy") == 17910);
  CHECK(paired.count_pool("clean") == 1194);
  CHECK(paired.labels == std::vector<std::string>{"clean", "babble", "cafe", "car", "street", "white"});
  CHECK_FALSE(paired.rendered);

  o.split_mode = data::SplitMode::kDisjoint;
  const auto disjoint = data::synthesize_corpus(o, "unused");
  CHECK(disjoint.count_pool("noisy") == 8955);
  CHECK(disjoint.count_pool("clean") == 597);
  CHECK(disjoint.count_pool("source") == 597);
  CHECK(data::validate_manifest(disjoint).pass());
  CHECK_FALSE(fs::exists("unused"));
}

TEST_CASE("rendered corpus: SNR, validation and manifest round trip") {
  TempDir tmp("render");
  auto o = toy_inputs(tmp.path);
  const fs::path out = tmp.path / "corpus";
  const auto m = data::synthesize_corpus(o, out);

  CHECK(m.count_pool("noisy") == 4 * 2 * 2);
  CHECK(m.count_pool("clean") == 4);
  CHECK(m.norm.mean.size() == 257);
  CHECK(data::validate_manifest(m, out).pass());
  CHECK(data::read_manifest(out / "manifest.jsonl") == m);

  std::map<std::string, dsp::Waveform> noises;
  for (const auto& p : o.noise_files) noises[p.stem().string()] = dsp::read_wav(p);
  std::size_t checked = 0;
  for (const auto& r : m.records) {
    if (!r.noisy()) continue;
    const auto noisy = dsp::read_wav(out / r.path);
    const auto clean = dsp::read_wav(out / r.source_path);
    REQUIRE(noisy.samples.size() == clean.samples.size());
    std::vector<double> ref(clean.samples.size()), resid(clean.samples.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref[i] = r.gain * clean.samples[i];
      resid[i] = noisy.samples[i] - ref[i];
    }
    CHECK(std::abs(dsp::snr_db(ref, resid) - *r.snr_db) < 1e-3);
    CHECK(r.noise_offset < noises.at(r.noise_file).samples.size());
    ++checked;
  }
  CHECK(checked == 16);
}

TEST_CASE("synthesis output does not depend on the worker count") {
  TempDir tmp("threads");
  auto o = toy_inputs(tmp.path);
  o.split_mode = data::SplitMode::kDisjoint;
  o.threads = 1;
  const auto a = data::synthesize_corpus(o, tmp.path / "a");
  o.threads = 3;
  const auto b = data::synthesize_corpus(o, tmp.path / "b");
  CHECK(slurp(tmp.path / "a" / "manifest.jsonl") == slurp(tmp.path / "b" / "manifest.jsonl"));
  for (const auto& r : a.records) CHECK(slurp(tmp.path / "a" / r.path) == slurp(tmp.path / "b" / r.path));

  o.seed = 12;
  const auto c = data::synthesize_corpus(o, tmp.path / "c");
  bool offsets_differ = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    offsets_differ |= a.records[i].noise_offset != c.records[i].noise_offset;
  }
  CHECK(offsets_differ);
}

TEST_CASE("disjoint validation catches a corrupted manifest") {
  TempDir tmp("disjoint");
  auto o = toy_inputs(tmp.path);
  o.split_mode = data::SplitMode::kDisjoint;
  auto m = data::synthesize_corpus(o, tmp.path / "corpus");
  REQUIRE(data::validate_manifest(m, tmp.path / "corpus").pass());

  std::string source;
  for (const auto& r : m.records) {
    if (r.noisy()) source = r.source_id;
  }
  for (auto& r : m.records) {
    if (r.id == source) r.pool = "clean";
  }
  const auto rep = data::validate_manifest(m, tmp.path / "corpus");
  CHECK_FALSE(rep.pass());
  const auto j = rep.to_json();
  CHECK(j.at("pass") == false);
  bool found = false;
  for (const auto& i : j.at("issues")) found |= i.at("check") == "disjoint" && i.at("record") == source;
  CHECK(found);

  fs::remove(tmp.path / "corpus" / m.records.back().path);
  bool missing = false;
  for (const auto& i : data::validate_manifest(m, tmp.path / "corpus").issues) missing |= i.check == "file";
  CHECK(missing);
}

TEST_CASE("unreadable inputs are reported together") {
  TempDir tmp("errors");
  auto o = toy_inputs(tmp.path);
  o.clean_files.push_back(tmp.path / "in" / "missing_a.wav");
  std::ofstream(tmp.path / "in" / "junk_b.wav") << "not a wav file";
  o.clean_files.push_back(tmp.path / "in" / "junk_b.wav");
  try {
    data::synthesize_corpus(o, tmp.path / "corpus");
    FAIL("expected an InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2 input file(s) failed") != std::string::npos);
    CHECK(msg.find("missing_a.wav") != std::string::npos);
    CHECK(msg.find("junk_b.wav") != std::string::npos);
  }
}

TEST_CASE("manifest parser rejects malformed input") {
  data::CorpusManifest m;
  m.labels = {"clean", "hum"};
  m.snrs = {0.0};
  data::UtteranceRecord r;
  r.id = "a";
  r.path = "clean/a.wav";
  m.records.push_back(r);
  const std::string text = data::manifest_text(m);
  CHECK(data::parse_manifest(text, "m") == m);
  CHECK_THROWS_AS(data::parse_manifest("", "m"), InputError);
  CHECK_THROWS_AS(data::parse_manifest("{\"format\":\"other\"}\n", "m"), InputError);
  CHECK_THROWS_AS(data::parse_manifest(text + "{\"id\":\"b\",\"bogus\":1}\n", "m"), InputError);
  CHECK_THROWS_AS(data::parse_manifest(text + "{not json\n", "m"), InputError);
  CHECK_THROWS_AS(data::parse_split_mode("mixed"), InputError);
}

TEST_CASE("feature store loads the training pools") {
  TempDir tmp("store");
  auto o = toy_inputs(tmp.path);
  o.test_speakers = {"spk1"};
  const auto m = data::synthesize_corpus(o, tmp.path / "corpus");
  const auto store = data::FeatureStore::load(m, tmp.path / "corpus");
  CHECK(store.clean().size() == 2);
  CHECK(store.noisy().size() == 2 * 2 * 2);
  CHECK(store.feature_rows() == 257);
  for (const auto& it : store.noisy()) {
    CHECK(it.label >= 1);
    CHECK(it.label <= 2);
    CHECK(it.features.rows == 257);
  }
}

TEST_CASE("crop_frames reflects short utterances") {
  Matrix m(2, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    m(0, t) = static_cast<float>(t);
    m(1, t) = static_cast<float>(10 + t);
  }
  const Matrix c = data::crop_frames(m, 0, 7);
  const std::vector<float> want{0, 1, 2, 1, 0, 1, 2};
  for (std::size_t t = 0; t < 7; ++t) {
    CHECK(c(0, t) == want[t]);
    CHECK(c(1, t) == want[t] + 10);
  }
  const Matrix w = data::crop_frames(m, 1, 2);
  CHECK(w(0, 0) == 1.0f);
  CHECK(w(0, 1) == 2.0f);
  const Matrix one = data::crop_frames(Matrix(1, 1, 4.0f), 0, 3);
  CHECK(one.values == std::vector<float>{4, 4, 4});
}

TEST_CASE("unpaired sampling is uniform and a function of (seed, step)") {
  data::FeatureStore store(5, 3);
  for (int i = 0; i < 7; ++i) store.add_clean("c" + std::to_string(i), Matrix(3, 10 + i, static_cast<float>(i)));
  for (int i = 0; i < 20; ++i) {
    store.add_noisy("n" + std::to_string(i), 1 + i % 5, Matrix(3, 8 + i, static_cast<float>(100 + i)));
  }
  std::map<std::size_t, int> noisy_label, target;
  for (std::uint64_t step = 0; step < 10000; ++step) {
    const auto p = data::plan_unpaired_batch(store, 1, 12, 3, step);
    noisy_label[store.noisy()[p.noisy_index[0]].label]++;
    target[p.target_label[0]]++;
    CHECK(p.clean_start[0] + 12 <= std::max<std::size_t>(12, store.clean()[p.clean_index[0]].features.cols));
  }
  for (std::size_t l = 1; l <= 5; ++l) {
    CHECK(std::abs(noisy_label[l] - 2000) <= 100);
    CHECK(std::abs(target[l] - 2000) <= 100);
  }

  const auto a = data::sample_unpaired_batch(store, 4, 12, 3, 17);
  const auto b = data::sample_unpaired_batch(store, 4, 12, 3, 17);
  const auto c = data::sample_unpaired_batch(store, 4, 12, 3, 18);
  CHECK(a.s.shape() == ad::Shape{4, 3, 12});
  CHECK(std::equal(a.s.data().begin(), a.s.data().end(), b.s.data().begin()));
  CHECK(a.plan.noisy_index == b.plan.noisy_index);
  CHECK(a.plan.clean_index != c.plan.clean_index);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.y_label[i] == store.noisy()[a.plan.noisy_index[i]].label);
    CHECK(a.y.at(i * 36) == 100.0f + static_cast<float>(a.plan.noisy_index[i]));
  }
  CHECK_THROWS_AS(data::plan_unpaired_batch(store, 0, 12, 3, 0), InputError);
}
