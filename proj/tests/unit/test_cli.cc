// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "nitcg/cli.h"
#include "nitcg/data.h"
#include "nitcg/error.h"
#include "nitcg/wav.h"
#include "signals.h"
#include "smoke.h"

using namespace nitcg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nitcg_test_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_files(const fs::path& dir, const std::string& ext = ".wav") {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file() && e.path().extension() == ext;
  return n;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Clean tones named spk<k>_tone<i> and one or two noise files.
void toy_inputs(const fs::path& dir, std::size_t n_clean, std::size_t n_noise) {
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "noise");
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < n_clean; ++i) {
    dsp::write_wav(dir / "clean" / ("spk" + std::to_string(i % 2) + "_tone" + std::to_string(i) + ".wav"),
                   smoke::multitone(8000 + 1000 * i, rng));
  }
  const char* names[] = {"hum", "hiss"};
  for (std::size_t k = 0; k < n_noise; ++k) {
    dsp::write_wav(dir / "noise" / (std::string(names[k]) + ".wav"),
                   smoke::filtered_noise(24000, k ? 5000.0 : 600.0, 0.9, 3 + k));
  }
}

const std::vector<std::string> kTiny = {"--set", "base_channels=4",  "--set", "residual_blocks=1",
                                        "--set", "downsample_factor=2", "--set", "d_base_channels=4",
                                        "--set", "d_layers=2",        "--set", "crop_frames=16"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit 64 and help exits 0") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
  for (const char* sub : {"synth-data", "train", "enhance", "eval", "plot"}) {
    CAPTURE(sub);
    const auto r = run({sub, "--help"});
    CHECK(r.code == cli::kExitOk);
    CHECK(r.out.find("--out") != std::string::npos);
    CHECK(run({sub, "--no-such-flag"}).code == cli::kExitUsage);
  }
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"synth-data", "--clean-dir", "a", "--noise-dir", "b", "--out", "c", "--snrs", "x,y"}).code ==
        cli::kExitUsage);
}

TEST_CASE("config resolution: file, flags, overrides and unknown keys") {
  TempDir tmp("config");
  const auto d = cli::resolve_config("train", {}, {});
  CHECK(d == cli::default_section("train"));

  std::ofstream(tmp.path / "c.json") << R"({"train": {"lr_g": 0.001, "epochs": 3}, "eval": {"pesq": "const:2"}})";
  const auto c = cli::resolve_config("train", tmp.path / "c.json", {"epochs=5", "train.mode=baseline"});
  CHECK(c["lr_g"] == 0.001);
  CHECK(c["epochs"] == 5);
  CHECK(c["mode"] == "baseline");
  CHECK(cli::resolve_config("eval", tmp.path / "c.json", {"metrics.lpc_order=10"})["metrics"]["lpc_order"] == 10);

  CHECK_THROWS_AS(cli::resolve_config("train", {}, {"lr_gg=1"}), InputError);
  CHECK_THROWS_AS(cli::resolve_config("eval", {}, {"metrics.nope=1"}), InputError);
  CHECK_THROWS_AS(cli::resolve_config("train", {}, {"novalue"}), InputError);
  std::ofstream(tmp.path / "bad.json") << R"({"train": {"lr_gg": 1}})";
  CHECK_THROWS_AS(cli::resolve_config("train", tmp.path / "bad.json", {}), InputError);
  std::ofstream(tmp.path / "bad2.json") << R"({"trian": {}})";
  CHECK_THROWS_AS(cli::resolve_config("train", tmp.path / "bad2.json", {}), InputError);
  std::ofstream(tmp.path / "bad3.json") << "{not json";
  CHECK_THROWS_AS(cli::resolve_config("train", tmp.path / "bad3.json", {}), InputError);
  // A string value needs no JSON quoting.
  CHECK(cli::resolve_config("eval", {}, {"pesq=const:3"})["pesq"] == "const:3");
}

TEST_CASE("synth-data: count law, missing input and disjoint split") {
  TempDir tmp("synth");
  toy_inputs(tmp.path, 2, 1);
  const auto r = run({"synth-data", "--clean-dir", (tmp.path / "clean").string(), "--noise-dir",
                      (tmp.path / "noise").string(), "--out", (tmp.path / "corpus").string(), "--snrs", "-5,0,5"});
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(count_files(tmp.path / "corpus" / "noisy") == 6);
  CHECK(r.out.find("hum,-5,2") != std::string::npos);
  CHECK(r.out.find("validation: pass") != std::string::npos);

  // The echo re-parses to the same configuration.
  const auto echo = nlohmann::json::parse(slurp(tmp.path / "corpus" / "effective_config.json"));
  CHECK(cli::resolve_config("synth-data", tmp.path / "corpus" / "effective_config.json", {}) == echo["synth-data"]);
  CHECK(echo["synth-data"]["snrs"] == nlohmann::json::array({-5.0, 0.0, 5.0}));

  const auto missing = run({"synth-data", "--clean-dir", (tmp.path / "clean").string(), "--noise-dir",
                            (tmp.path / "nowhere").string(), "--out", (tmp.path / "c2").string()});
  CHECK(missing.code == cli::kExitInput);
  CHECK(missing.err.find((tmp.path / "nowhere").string()) != std::string::npos);

  TempDir tmp4("synth4");
  toy_inputs(tmp4.path, 4, 1);
  const auto dj = run({"synth-data", "--clean-dir", (tmp4.path / "clean").string(), "--noise-dir",
                       (tmp4.path / "noise").string(), "--out", (tmp4.path / "corpus").string(), "--split",
                       "disjoint", "--set", "snrs=[0]"});
  INFO(dj.err);
  REQUIRE(dj.code == 0);
  const auto m = data::read_manifest(tmp4.path / "corpus" / "manifest.jsonl");
  CHECK(m.count_pool("source") == 2);
  CHECK(m.count_pool("clean") == 2);
  CHECK(data::validate_manifest(m, tmp4.path / "corpus").pass());
}

TEST_CASE("train, enhance, eval and plot on a toy corpus") {
  TempDir tmp("pipeline");
  toy_inputs(tmp.path, 4, 2);
  const fs::path corpus = tmp.path / "corpus";
  REQUIRE(run({"synth-data", "--clean-dir", (tmp.path / "clean").string(), "--noise-dir", (tmp.path / "noise").string(),
               "--out", corpus.string(), "--snrs", "-5,0,5", "--set", "test_speakers=[\"spk1\"]"})
              .code == 0);
  const auto m = data::read_manifest(corpus / "manifest.jsonl");
  // train pool: 2 clean, 2 x 2 x 3 = 12 noisy
  const std::size_t steps = 12;

  const std::string manifest = (corpus / "manifest.jsonl").string();
  auto train = [&](const fs::path& out, std::vector<std::string> extra, const std::string& epochs = "1") {
    return run(cat(cat({"train", "--manifest", manifest, "--out", out.string(), "--epochs", epochs, "--mode", "nit",
                        "--seed", "3", "--quiet"},
                       kTiny),
                   extra));
  };
  const auto t1 = train(tmp.path / "run1", {});
  INFO(t1.err);
  REQUIRE(t1.code == 0);
  const std::string csv1 = slurp(tmp.path / "run1" / "losses.csv");
  CHECK(count_lines(csv1) == steps + 1);
  REQUIRE(train(tmp.path / "run2", {}).code == 0);
  CHECK(slurp(tmp.path / "run2" / "losses.csv") == csv1);
  CHECK(cli::resolve_config("train", tmp.path / "run1" / "effective_config.json", {}) ==
        nlohmann::json::parse(slurp(tmp.path / "run1" / "effective_config.json"))["train"]);

  SUBCASE("resume continues epoch numbering") {
    const auto t = train(tmp.path / "run1", {"--resume", (tmp.path / "run1" / "last.bin").string()}, "2");
    INFO(t.err);
    REQUIRE(t.code == 0);
    const std::string csv = slurp(tmp.path / "run1" / "losses.csv");
    CHECK(count_lines(csv) == 2 * steps + 1);
    CHECK(csv.find("\n" + std::to_string(steps + 1) + ",2,") != std::string::npos);
    CHECK(fs::exists(tmp.path / "run1" / "ckpt_epoch_0002.bin"));
  }

  SUBCASE("non-finite loss exits 2") {
    const auto t = train(tmp.path / "run_nan", {"--set", "lambda_cyc=1e39"});
    CHECK(t.code == cli::kExitNumeric);
    CHECK(t.err.find("non-finite") != std::string::npos);
  }

  SUBCASE("enhance files, directories and rate mismatches") {
    const std::string ckpt = (tmp.path / "run1" / "last.bin").string();
    fs::create_directories(tmp.path / "in");
    for (int i = 0; i < 3; ++i) {
      dsp::write_wav(tmp.path / "in" / ("n" + std::to_string(i) + ".wav"), signals::white(7000 + 333 * i, i, 0.1));
    }
    const auto one = run({"enhance", "--checkpoint", ckpt, "--input", (tmp.path / "in" / "n1.wav").string(), "--out",
                          (tmp.path / "e1").string()});
    REQUIRE(one.code == 0);
    CHECK(dsp::read_wav(tmp.path / "e1" / "n1.wav").samples.size() == 7333);

    REQUIRE(run({"enhance", "--checkpoint", ckpt, "--input", (tmp.path / "in").string(), "--out",
                 (tmp.path / "e2").string()})
                .code == 0);
    REQUIRE(run({"enhance", "--checkpoint", ckpt, "--input", (tmp.path / "in").string(), "--out",
                 (tmp.path / "e3").string()})
                .code == 0);
    CHECK(count_files(tmp.path / "e2") == 3);
    for (int i = 0; i < 3; ++i) {
      const std::string f = "n" + std::to_string(i) + ".wav";
      CHECK(slurp(tmp.path / "e2" / f) == slurp(tmp.path / "e3" / f));
    }

    dsp::Waveform narrow = signals::white(4000, 9, 0.1);
    narrow.sample_rate = 8000;
    dsp::write_wav(tmp.path / "in" / "narrow.wav", narrow);
    const auto mixed = run({"enhance", "--checkpoint", ckpt, "--input", (tmp.path / "in").string(), "--out",
                            (tmp.path / "e4").string()});
    CHECK(mixed.code == 0);
    CHECK(mixed.err.find("narrow.wav") != std::string::npos);
    CHECK(count_files(tmp.path / "e4") == 3);
    const auto only_bad = run({"enhance", "--checkpoint", ckpt, "--input", (tmp.path / "in" / "narrow.wav").string(),
                               "--out", (tmp.path / "e5").string()});
    CHECK(only_bad.code == cli::kExitInput);
    CHECK(run({"enhance", "--checkpoint", ckpt, "--out", (tmp.path / "e6").string()}).code == cli::kExitInput);
  }

  SUBCASE("eval and plot from the manifest") {
    const std::string ckpt = (tmp.path / "run1" / "last.bin").string();
    REQUIRE(run({"enhance", "--checkpoint", ckpt, "--manifest", manifest, "--out", (tmp.path / "enh").string()}).code ==
            0);
    std::size_t test_noisy = 0;
    for (const auto& r : m.records) test_noisy += r.noisy() && r.split == "test";
    CHECK(test_noisy == 12);
    CHECK(count_files(tmp.path / "enh") == test_noisy);

    const auto ev = run({"eval", "--manifest", manifest, "--enhanced", (tmp.path / "enh").string(), "--out",
                         (tmp.path / "eval").string()});
    INFO(ev.err);
    REQUIRE(ev.code == 0);
    CHECK(ev.err.find("notice: no PESQ source") != std::string::npos);
    const std::string per = slurp(tmp.path / "eval" / "per_utterance.csv");
    CHECK(count_lines(per) == 2 + 2 * test_noisy);

    // The summary seg_snr of each system equals the mean of its rows.
    std::istringstream rows(per);
    std::string line;
    std::map<std::string, std::pair<double, int>> acc;
    while (std::getline(rows, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      acc[cells[1]].first += std::stod(cells[4]);
      acc[cells[1]].second += 1;
    }
    std::istringstream summary(slurp(tmp.path / "eval" / "summary.csv"));
    int checked = 0;
    while (std::getline(summary, line)) {
      if (line.rfind("noisy,", 0) != 0 && line.rfind("enhanced,", 0) != 0) continue;
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      const auto& a = acc[cells[0]];
      CHECK(std::abs(std::stod(cells[4]) - a.first / a.second) < 1e-5);
      ++checked;
    }
    CHECK(checked == 2);

    const auto no_pesq = run({"plot", "--eval", (tmp.path / "eval").string(), "--out", (tmp.path / "p0").string()});
    CHECK(no_pesq.code == cli::kExitInput);

    REQUIRE(run({"eval", "--manifest", manifest, "--enhanced", (tmp.path / "enh").string(), "--pesq", "const:2.5",
                 "--out", (tmp.path / "eval2").string()})
                .code == 0);
    const auto pl = run({"plot", "--eval", "NIT=" + (tmp.path / "eval2").string(), "--eval",
                         "Other=" + (tmp.path / "eval").string(), "--metric", "seg_snr", "--out",
                         (tmp.path / "plot").string()});
    INFO(pl.err);
    REQUIRE(pl.code == 0);
    const std::string fig = slurp(tmp.path / "plot" / "figure.csv");
    CHECK(fig.rfind("system,snr_db,count,seg_snr\n", 0) == 0);
    CHECK(count_lines(fig) == 1 + 3 * 3);
    CHECK(fig.find("noisy,-5,") != std::string::npos);
    CHECK(fig.find("NIT,5,") != std::string::npos);
    const std::string svg = slurp(tmp.path / "plot" / "figure.svg");
    std::size_t bars = 0;
    for (auto p = svg.find("class=\"bar\""); p != std::string::npos; p = svg.find("class=\"bar\"", p + 1)) ++bars;
    CHECK(bars == 9);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(run({"plot", "--eval", "A=" + (tmp.path / "eval").string(), "--eval", "A=" + (tmp.path / "eval2").string(),
               "--metric", "llr", "--out", (tmp.path / "p1").string()})
              .code == cli::kExitInput);
  }
}
