// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "nitcg/error.h"
#include "nitcg/training.h"
#include "nitcg/wav.h"
#include "signals.h"
#include "smoke.h"

using namespace nitcg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nitcg_test_training_" + tag + "_" + std::to_string(::getpid()));
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

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  std::string l;
  while (std::getline(f, l)) out.push_back(l);
  return out;
}

// `clean` short utterances mixed with `noises` noise types at one SNR.
data::CorpusManifest toy_corpus(const fs::path& dir, int clean, int noises) {
  fs::create_directories(dir / "in");
  std::mt19937_64 rng(5);
  data::SynthOptions o;
  for (int i = 0; i < clean; ++i) {
    const fs::path p = dir / "in" / ("utt" + std::to_string(i) + ".wav");
    dsp::write_wav(p, smoke::multitone(4000 + 700 * static_cast<std::size_t>(i), rng));
    o.clean_files.push_back(p);
  }
  for (int k = 0; k < noises; ++k) {
    const fs::path p = dir / "in" / ("noise" + std::to_string(k) + ".wav");
    dsp::write_wav(p, smoke::filtered_noise(9000, 600.0 + 3000.0 * k, 0.9, 30 + k));
    o.noise_files.push_back(p);
  }
  o.snrs = {5.0};
  o.seed = 3;
  return data::synthesize_corpus(o, dir / "corpus");
}

training::TrainConfig tiny_config(training::Mode mode = training::Mode::kNit) {
  training::TrainConfig c;
  c.mode = mode;
  c.seed = 21;
  c.epochs = 1;
  c.crop_frames = 16;
  c.base_channels = 4;
  c.residual_blocks = 1;
  c.downsample_factor = 2;
  c.d_base_channels = 4;
  c.d_layers = 2;
  return c;
}

std::vector<std::vector<float>> snapshot(const ad::ParameterSet& set) {
  std::vector<std::vector<float>> out;
  for (const auto& p : set.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

training::TrainOptions quiet_options(const fs::path& out) {
  training::TrainOptions o;
  o.out_dir = out;
  o.quiet = true;
  return o;
}

}  // namespace

TEST_CASE("train config defaults, JSON round trip and rejection") {
  const training::TrainConfig d;
  CHECK(d.epochs == 600);
  CHECK(d.lr_g == 2e-4);
  CHECK(d.lr_d == 1e-4);
  CHECK(d.beta1 == 0.5);
  CHECK(d.beta2 == 0.999);
  CHECK(d.weights.lambda_cyc == 10.0);
  CHECK(d.weights.lambda_idm == 5.0);

  auto c = tiny_config(training::Mode::kBaseline);
  c.adversarial.objective = losses::GanObjective::kLeastSquares;
  c.mask_label_rows = true;
  CHECK(training::TrainConfig::from_json(c.to_json()) == c);
  CHECK(training::TrainConfig::from_json({{"epochs", 3}}).epochs == 3);
  CHECK_THROWS_AS(training::TrainConfig::from_json({{"epoch", 3}}), InputError);
  CHECK_THROWS_AS(training::TrainConfig::from_json({{"mode", "hybrid"}}), InputError);
  CHECK_THROWS_AS(training::TrainConfig::from_json({{"batch_size", 0}}), InputError);
  CHECK_THROWS_AS(training::TrainConfig::from_json({{"lr_g", -1.0}}), InputError);
  CHECK_THROWS_AS(training::TrainConfig::from_json({{"epochs", "many"}}), InputError);
}

TEST_CASE("steps per epoch follow the larger pool") {
  CHECK(training::steps_per_epoch(4, 4, 1) == 4);
  CHECK(training::steps_per_epoch(8, 32, 1) == 32);
  CHECK(training::steps_per_epoch(8, 32, 5) == 7);
  CHECK(training::steps_per_epoch(597, 8955, 16) == 560);
  CHECK_THROWS_AS(training::steps_per_epoch(1, 1, 0), InputError);
}

TEST_CASE("one epoch over a 4-utterance corpus logs exactly 4 steps") {
  TempDir tmp("epoch");
  const auto m = toy_corpus(tmp.path, 4, 1);
  REQUIRE(m.count_pool("noisy") == 4);
  const auto r = training::train(tiny_config(), m, tmp.path / "corpus", quiet_options(tmp.path / "run"));
  CHECK(r.steps == 4);
  CHECK(r.epochs == 1);
  const auto rows = lines(tmp.path / "run" / "losses.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == losses::LossReport::csv_header());
  for (int i = 1; i <= 4; ++i) CHECK(rows[i].rfind(std::to_string(i) + ",1,", 0) == 0);
  CHECK(fs::exists(tmp.path / "run" / "ckpt_epoch_0001.bin"));
  CHECK(fs::exists(tmp.path / "run" / "last.bin"));
  const auto run = nlohmann::json::parse(slurp(tmp.path / "run" / "run_config.json"));
  CHECK(run.at("steps_per_epoch") == 4);
  CHECK(training::TrainConfig::from_json(run.at("train")) == tiny_config());
}

TEST_CASE("equal seeds give bit-identical reports for 100 steps") {
  data::FeatureStore store(2, 257);
  std::mt19937_64 rng(2);
  std::normal_distribution<float> nd;
  for (int i = 0; i < 3; ++i) {
    Matrix a(257, 20 + i), b(257, 18 + i);
    for (auto& v : a.values) v = nd(rng);
    for (auto& v : b.values) v = nd(rng);
    store.add_clean("c" + std::to_string(i), a);
    store.add_noisy("n" + std::to_string(i), 1 + i % 2, b);
  }
  const std::vector<std::string> labels{"clean", "a", "b"};
  training::Trainer t1(tiny_config(), labels, 257), t2(tiny_config(), labels, 257);
  for (std::uint64_t step = 0; step < 100; ++step) {
    const auto batch = data::sample_unpaired_batch(store, 2, 16, 9, step);
    const auto r1 = t1.step(batch);
    const auto r2 = t2.step(batch);
    REQUIRE(r1.csv_row(step, 1) == r2.csv_row(step, 1));
  }
  CHECK(snapshot(t1.g_ys()) == snapshot(t2.g_ys()));
  CHECK(snapshot(t1.d_y()) == snapshot(t2.d_y()));
  CHECK(t1.global_step() == 100);
}

TEST_CASE("zero learning rates freeze parameters and losses") {
  data::FeatureStore store(1, 257);
  Matrix a(257, 16, 0.3f), b(257, 16, -0.2f);
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += 0.01f * static_cast<float>(i % 13);
  store.add_clean("c", a);
  store.add_noisy("n", 1, b);
  auto c = tiny_config();
  c.lr_g = c.lr_d = 0.0;
  training::Trainer t(c, {"clean", "hum"}, 257);
  const auto g0 = snapshot(t.g_sy()), d0 = snapshot(t.d_s());
  std::string first;
  for (std::uint64_t step = 0; step < 5; ++step) {
    const auto row = t.step(data::sample_unpaired_batch(store, 1, 16, 1, step)).csv_row(0, 0);
    if (step == 0) first = row;
    CHECK(row == first);
  }
  CHECK(snapshot(t.g_sy()) == g0);
  CHECK(snapshot(t.d_s()) == d0);
}

TEST_CASE("each phase updates only its own models") {
  data::FeatureStore store(2, 257);
  std::mt19937_64 rng(4);
  std::normal_distribution<float> nd;
  Matrix a(257, 16), b(257, 16);
  for (auto& v : a.values) v = nd(rng);
  for (auto& v : b.values) v = nd(rng);
  store.add_clean("c", a);
  store.add_noisy("n", 2, b);
  training::Trainer t(tiny_config(), {"clean", "a", "b"}, 257);
  auto g0 = snapshot(t.g_ys()), g1 = snapshot(t.g_sy()), d0 = snapshot(t.d_s()), d1 = snapshot(t.d_y());
  int calls = 0;
  t.set_phase_hook([&](const std::string& phase) {
    ++calls;
    if (phase == "d") {
      CHECK(snapshot(t.g_ys()) == g0);
      CHECK(snapshot(t.g_sy()) == g1);
      CHECK(snapshot(t.d_s()) != d0);
      CHECK(snapshot(t.d_y()) != d1);
      d0 = snapshot(t.d_s());
      d1 = snapshot(t.d_y());
    } else {
      CHECK(snapshot(t.d_s()) == d0);
      CHECK(snapshot(t.d_y()) == d1);
      CHECK(snapshot(t.g_ys()) != g0);
      CHECK(snapshot(t.g_sy()) != g1);
      g0 = snapshot(t.g_ys());
      g1 = snapshot(t.g_sy());
    }
  });
  for (std::uint64_t step = 0; step < 3; ++step) t.step(data::sample_unpaired_batch(store, 1, 16, 2, step));
  CHECK(calls == 6);
}

TEST_CASE("non-finite inputs abort the step") {
  data::FeatureStore store(1, 257);
  Matrix a(257, 16, 0.1f);
  a(3, 4) = std::numeric_limits<float>::quiet_NaN();
  store.add_clean("c", a);
  store.add_noisy("n", 1, Matrix(257, 16, 0.2f));
  training::Trainer t(tiny_config(), {"clean", "hum"}, 257);
  const auto d0 = snapshot(t.d_s());
  try {
    t.step(data::sample_unpaired_batch(store, 1, 16, 0, 0));
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("discriminator phase") != std::string::npos);
  }
  CHECK(snapshot(t.d_s()) == d0);
  CHECK(t.global_step() == 0);
}

TEST_CASE("malformed batches are rejected") {
  training::Trainer t(tiny_config(), {"clean", "a"}, 257);
  data::UnpairedBatch b;
  b.s = ad::Tensor::zeros({1, 256, 16});
  b.y = ad::Tensor::zeros({1, 256, 16});
  CHECK_THROWS_AS(t.step(b), ShapeError);
  b.s = ad::Tensor::zeros({1, 257, 16});
  b.y = ad::Tensor::zeros({1, 257, 16});
  b.s_target = {1};
  b.y_label = {};
  CHECK_THROWS_AS(t.step(b), ShapeError);
  b.y_label = {3};
  CHECK_THROWS_AS(t.step(b), InputError);
}

TEST_CASE("resume continues the loss CSV without gaps or repeats") {
  TempDir tmp("resume");
  const auto m = toy_corpus(tmp.path, 3, 1);
  auto c = tiny_config();
  c.epochs = 3;
  training::train(c, m, tmp.path / "corpus", quiet_options(tmp.path / "full"));

  auto c2 = c;
  c2.epochs = 2;
  training::train(c2, m, tmp.path / "corpus", quiet_options(tmp.path / "part"));
  // Rows past the checkpoint, as left by an interrupted run, are dropped.
  fs::copy_file(tmp.path / "full" / "losses.csv", tmp.path / "part" / "losses.csv",
                fs::copy_options::overwrite_existing);
  auto opts = quiet_options(tmp.path / "part");
  opts.resume = tmp.path / "part" / "ckpt_epoch_0002.bin";
  const auto r = training::train(c, m, tmp.path / "corpus", opts);
  CHECK(r.history.size() == 3);
  CHECK(r.epochs == 3);
  CHECK(slurp(tmp.path / "part" / "losses.csv") == slurp(tmp.path / "full" / "losses.csv"));
  CHECK(slurp(tmp.path / "part" / "last.bin") == slurp(tmp.path / "full" / "last.bin"));
  const auto rows = lines(tmp.path / "full" / "losses.csv");
  REQUIRE(rows.size() == 10);
  for (int i = 1; i <= 9; ++i) CHECK(rows[i].rfind(std::to_string(i) + "," + std::to_string((i - 1) / 3 + 1) + ",", 0) == 0);

  auto wrong = c;
  wrong.mode = training::Mode::kBaseline;
  CHECK_THROWS_AS(training::train(wrong, m, tmp.path / "corpus", opts), InputError);
}

TEST_CASE("baseline and NIT runs diverge") {
  TempDir tmp("modes");
  const auto m = toy_corpus(tmp.path, 3, 2);
  const auto nit = training::train(tiny_config(), m, tmp.path / "corpus", quiet_options(tmp.path / "nit"));
  const auto base = training::train(tiny_config(training::Mode::kBaseline), m, tmp.path / "corpus",
                                    quiet_options(tmp.path / "base"));
  REQUIRE(nit.history.size() == base.history.size());
  for (std::size_t i = 1; i < nit.history.size(); ++i) {
    CHECK(nit.history[i].csv_row(0, 0) != base.history[i].csv_row(0, 0));
  }
  const auto ck = models::load_checkpoint(tmp.path / "base" / "last.bin");
  CHECK(ck.mode == "baseline");
  CHECK(ck.label_dim() == 0);
  CHECK(ck.generator.in_rows == 257);
}

TEST_CASE("enhance keeps the length, stays finite and leaves the checkpoint alone") {
  TempDir tmp("enhance");
  const auto m = toy_corpus(tmp.path, 2, 2);
  const auto r = training::train(tiny_config(), m, tmp.path / "corpus", quiet_options(tmp.path / "run"));
  const std::string before = slurp(r.final_checkpoint);
  const auto ck = models::load_checkpoint(r.final_checkpoint);
  const training::Enhancer e(ck);
  for (std::size_t n : {300, 511, 512, 4000, 7777}) {
    const auto noisy = signals::white(n, 17, 0.2);
    const auto out = e.run(noisy);
    CHECK(out.samples.size() == n);
    bool finite = true;
    double peak = 0.0;
    for (double v : out.samples) {
      finite &= std::isfinite(v);
      peak = std::max(peak, std::abs(v));
    }
    CHECK(finite);
    CHECK(peak < 100.0);
  }
  CHECK(e.checkpoint() == ck);
  CHECK(slurp(r.final_checkpoint) == before);

  dsp::Waveform other = signals::white(1000, 17, 0.2);
  other.sample_rate = 8000;
  CHECK_THROWS_AS(e.run(other), InputError);
  CHECK_THROWS_AS(e.run(dsp::Waveform{}), InputError);

  auto broken = ck;
  broken.norm = {};
  CHECK_THROWS_AS(training::Enhancer{broken}, FormatError);
}
