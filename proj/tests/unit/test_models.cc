// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "doctest.h"
#include "nitcg/checkpoint.h"
#include "nitcg/conditioning.h"
#include "nitcg/error.h"
#include "nitcg/models.h"
#include "nitcg/ops.h"
#include "reference.h"

using namespace nitcg;
using ad::Tensor;
using models::Discriminator;
using models::DiscriminatorSpec;
using models::Generator;
using models::GeneratorSpec;

namespace {

using Params = std::map<std::string, ref::T>;

Params snapshot(const ad::ParameterSet& set) {
  Params p;
  for (const auto& q : set.parameters()) p[q.name] = ref::from(q.tensor);
  return p;
}

ref::T conv(const Params& p, const std::string& name, const ref::T& x, std::size_t stride, std::size_t pad) {
  return ref::conv2d(x, p.at(name + ".weight"), &p.at(name + ".bias"), stride, stride, pad, pad);
}

ref::T silu(const ref::T& x) { return ref::map(x, [](double v) { return v * ref::sigmoid(v); }); }

// Independent double-precision forward of the generator layer stack.
ref::T generator_ref(const Params& p, const GeneratorSpec& spec, const ref::T& ext) {
  const std::size_t B = ext.shape[0], R = ext.shape[1], T = ext.shape[2];
  ref::T h{{B, 1, R, T}, ext.v};
  h = ref::glu(conv(p, "stem.conv", h, 1, 2));
  for (std::size_t i = 1; i <= spec.downsample_blocks(); ++i) {
    const std::string n = "down" + std::to_string(i);
    h = ref::glu(ref::instance_norm(conv(p, n + ".conv", h, 2, 1), p.at(n + ".norm.gamma"), p.at(n + ".norm.beta")));
  }
  for (std::size_t i = 1; i <= spec.n_residual_blocks; ++i) {
    const std::string n = "res" + std::to_string(i);
    ref::T t = ref::glu(
        ref::instance_norm(conv(p, n + ".expand", h, 1, 1), p.at(n + ".expand_norm.gamma"), p.at(n + ".expand_norm.beta")));
    t = ref::instance_norm(conv(p, n + ".project", t, 1, 1), p.at(n + ".project_norm.gamma"),
                           p.at(n + ".project_norm.beta"));
    h = ref::add(h, t);
  }
  for (std::size_t i = 1; i <= spec.downsample_blocks(); ++i) {
    const std::string n = "up" + std::to_string(i);
    h = silu(ref::instance_norm(ref::pixel_shuffle(conv(p, n + ".conv", h, 1, 1), 2), p.at(n + ".norm.gamma"),
                                p.at(n + ".norm.beta")));
  }
  h = ref::crop(conv(p, "head.conv", h, 1, 2), R, T);
  return {{B, R, T}, h.v};
}

ref::T discriminator_ref(const Params& p, const DiscriminatorSpec& spec, const ref::T& ext) {
  const std::size_t B = ext.shape[0];
  ref::T h{{B, 1, ext.shape[1], ext.shape[2]}, ext.v};
  for (std::size_t i = 1; i <= spec.n_layers; ++i) {
    const std::string n = "block" + std::to_string(i);
    h = conv(p, n + ".conv", h, 2, 1);
    if (i > 1) h = ref::instance_norm(h, p.at(n + ".norm.gamma"), p.at(n + ".norm.beta"));
    h = ref::glu(h);
  }
  h = conv(p, "final.conv", h, 1, 1);
  return ref::map({{B, h.shape[2], h.shape[3]}, h.v}, ref::sigmoid);
}

double max_rel(std::span<const float> got, const ref::T& want) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-12);
}

// Perturbs every parameter of `set` (and the input) around the snapshot and
// compares the finite difference of <f(x), c> with the engine gradient.
template <typename Model, typename Oracle>
void check_model_gradients(Model& model, const Oracle& oracle, const ref::T& x, std::uint64_t seed) {
  Params p = snapshot(model);
  const ref::T y = oracle(p, x);
  std::mt19937_64 rng(seed);
  const ref::T cot = ref::randn(y.shape, rng);

  model.zero_grad();
  const Tensor xt = ref::to_tensor(x, true);
  const Tensor out = model(xt);
  CHECK(max_rel(out.data(), y) < 1e-5);
  ad::sum(ad::mul(out, ref::to_tensor(cot))).backward();

  const auto fd_x = ref::numeric_grad([&](const ref::T& xx) { return ref::dot(oracle(p, xx), cot); }, x);
  CHECK(ref::grad_error(xt.grad(), fd_x) < 1e-4);

  // Relative error over the concatenated parameter gradient. Blocks whose
  // exact gradient vanishes (a bias feeding instance norm) are held to the
  // same bound measured against the whole-model scale.
  std::vector<float> all_ad;
  std::vector<double> all_fd;
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& q : model.parameters()) {
    const auto fd = ref::numeric_grad(
        [&](const ref::T& v) {
          Params moved = p;
          moved[q.name] = v;
          return ref::dot(oracle(moved, x), cot);
        },
        p.at(q.name));
    spans.emplace_back(all_fd.size(), fd.size());
    all_fd.insert(all_fd.end(), fd.begin(), fd.end());
    all_ad.insert(all_ad.end(), q.tensor.grad().begin(), q.tensor.grad().end());
  }
  CHECK(ref::grad_error(all_ad, all_fd) < 1e-4);
  double scale = 0;
  for (double v : all_fd) scale += v * v;
  scale = std::sqrt(scale);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto [off, n] = spans[k];
    double num = 0, den = 0;
    for (std::size_t i = off; i < off + n; ++i) {
      num += (all_ad[i] - all_fd[i]) * (all_ad[i] - all_fd[i]);
      den += all_fd[i] * all_fd[i];
    }
    INFO(model.parameters()[k].name << " |fd| " << std::sqrt(den) << " err " << std::sqrt(num));
    CHECK(std::sqrt(num) < 1e-4 * std::max(std::sqrt(den), 1e-3 * scale));
  }
}

Tensor standard_normal(ad::Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ref::to_tensor(ref::randn(std::move(s), rng));
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nitcg_test_models_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

models::Checkpoint make_checkpoint(std::size_t n_noise, std::uint64_t seed) {
  models::Checkpoint c;
  c.mode = "nit";
  c.label_names = {"clean"};
  for (std::size_t i = 1; i <= n_noise; ++i) c.label_names.push_back("noise" + std::to_string(i));
  c.generator = {257 + n_noise + 1, 2, 1, 2};
  c.discriminator = {257 + n_noise + 1, 2, 2};
  std::mt19937_64 rng(seed);
  Generator g(c.generator, rng);
  Discriminator d(c.discriminator, rng);
  models::export_parameters(g, "g_ys", c);
  models::export_parameters(d, "d_s", c);
  ad::AdamState st = ad::AdamState::for_parameters(g.parameters(), 0.5, 0.999);
  st.step = 3;
  st.m[0][0] = 0.125f;
  models::export_adam(st, g, "g_ys", c);
  c.norm.mean.assign(257, 0.5f);
  c.norm.stddev.assign(257, 2.0f);
  c.epoch = 2;
  c.global_step = 17;
  c.train_config = {{"seed", 7}};
  return c;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("generator is shape preserving and finite") {
  std::mt19937_64 rng(1);
  const GeneratorSpec spec{263};
  Generator g(spec, rng);
  for (std::size_t t : {16u, 33u, 64u}) {
    const Tensor x = standard_normal({1, 263, t}, t);
    const Tensor y = g(x);
    CHECK(y.shape() == x.shape());
    for (float v : y.data()) REQUIRE(std::isfinite(v));
  }
  const Tensor batch = standard_normal({2, 263, 8}, 3);
  CHECK(g(batch).shape() == batch.shape());
  CHECK_THROWS_AS(g(standard_normal({1, 262, 8}, 1)), ShapeError);
}

TEST_CASE("generator output depends on the input label rows") {
  std::mt19937_64 rng(2);
  Generator g({263}, rng);
  ad::NoGradGuard no_grad;
  const Tensor feats = standard_normal({1, 257, 32}, 4);
  const Tensor tn = cond::append_label_rows(feats, cond::label_rows_tensor({cond::make_label(3, 5)}, 32));
  const Tensor tc = cond::append_label_rows(feats, cond::label_rows_tensor({cond::make_label(0, 5)}, 32));
  const Tensor a = cond::feature_rows(g(tn), 6), b = cond::feature_rows(g(tc), 6);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::fabs(a.at(i) - b.at(i));
  CHECK(diff > 0.0);
}

TEST_CASE("initialisation follows the documented scheme") {
  std::mt19937_64 rng(3);
  Generator g({263}, rng);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& p : g.parameters()) {
    CHECK(p.tensor.requires_grad());
    if (p.name.ends_with(".bias") || p.name.ends_with(".beta")) {
      for (float v : p.tensor.data()) CHECK(v == 0.0f);
    } else if (p.name.ends_with(".gamma")) {
      for (float v : p.tensor.data()) CHECK(v == 1.0f);
    } else {
      for (float v : p.tensor.data()) {
        sum += v;
        sq += static_cast<double>(v) * v;
        ++n;
      }
    }
  }
  const double mean = sum / static_cast<double>(n);
  CHECK(std::fabs(mean) < 1e-3);
  CHECK(std::fabs(std::sqrt(sq / static_cast<double>(n) - mean * mean) - 0.02) < 1e-3);
}

TEST_CASE("generator forward and gradients match the double reference") {
  std::mt19937_64 rng(4);
  GeneratorSpec spec{6, 2, 1, 2};
  Generator g(spec, rng);
  // Larger weights than the default init keep the FD signal well above noise.
  for (auto& p : g.parameters()) {
    if (p.name.ends_with(".weight")) {
      for (auto& v : p.tensor.mutable_data()) v *= 15.0f;
    }
  }
  std::mt19937_64 xr(5);
  const ref::T x = ref::randn({1, 6, 4}, xr);
  check_model_gradients(g, [&](const Params& p, const ref::T& e) { return generator_ref(p, spec, e); }, x, 6);
}

TEST_CASE("discriminator forward and gradients match the double reference") {
  std::mt19937_64 rng(7);
  DiscriminatorSpec spec{12, 2, 3};
  Discriminator d(spec, rng);
  for (auto& p : d.parameters()) {
    if (p.name.ends_with(".weight")) {
      for (auto& v : p.tensor.mutable_data()) v *= 15.0f;
    }
  }
  std::mt19937_64 xr(8);
  const ref::T x = ref::randn({2, 12, 16}, xr);
  check_model_gradients(d, [&](const Params& p, const ref::T& e) { return discriminator_ref(p, spec, e); }, x, 9);
}

TEST_CASE("discriminator scores") {
  std::mt19937_64 rng(9);
  const DiscriminatorSpec spec{263};
  Discriminator d(spec, rng);
  const Tensor x = standard_normal({1, 263, 64}, 10);
  const Tensor s = d(x);
  CHECK(spec.grid(263, 64) == std::pair<std::size_t, std::size_t>{17, 4});
  CHECK(s.shape() == ad::Shape{1, 17, 4});
  CHECK(spec.grid(260, 64) == std::pair<std::size_t, std::size_t>{17, 4});
  for (float v : s.data()) {
    CHECK(v >= Discriminator::kScoreEps);
    CHECK(v <= 1.0f - Discriminator::kScoreEps);
  }

  const Tensor before = d.logits(x);
  d.shift_final_bias(2.5f);
  const Tensor after = d(x);
  for (std::size_t i = 0; i < after.size(); ++i) CHECK(after.at(i) > s.at(i));

  d.shift_final_bias(1e4f);
  const Tensor saturated = d(x);
  for (float v : saturated.data()) CHECK(v == 1.0f - Discriminator::kScoreEps);

  d.zero_final_layer();
  const Tensor neutral = d(x);
  for (float v : neutral.data()) CHECK(v == 0.5f);
  CHECK(before.shape() == s.shape());
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(GeneratorSpec({0}).validate(), InputError);
  CHECK_THROWS_AS(GeneratorSpec({10, 16, 2, 3}).validate(), InputError);
  CHECK_THROWS_AS(DiscriminatorSpec({10, 16, 0}).validate(), InputError);
  CHECK(GeneratorSpec({10, 16, 2, 4}).downsample_blocks() == 2);
  CHECK(GeneratorSpec({10, 16, 2, 1}).downsample_blocks() == 0);
}

TEST_CASE("checkpoint save, load, save is byte-identical") {
  const auto dir = temp_dir("roundtrip");
  const models::Checkpoint c = make_checkpoint(5, 11);
  models::save_checkpoint(c, dir / "a.bin");
  const models::Checkpoint loaded = models::load_checkpoint(dir / "a.bin");
  CHECK(loaded == c);
  models::save_checkpoint(loaded, dir / "b.bin");
  CHECK(read_bytes(dir / "a.bin") == read_bytes(dir / "b.bin"));

  std::mt19937_64 rng(99);
  Generator g(c.generator, rng);
  models::import_parameters(loaded, "g_ys", g);
  models::Checkpoint again;
  models::export_parameters(g, "g_ys", again);
  CHECK(again.tensors.front() == *c.find("g_ys/" + g.parameters().front().name));
  const ad::AdamState st = models::import_adam(loaded, g, "g_ys");
  CHECK(st.step == 3);
  CHECK(st.m[0][0] == 0.125f);
  CHECK_THROWS_AS(models::import_parameters(loaded, "g_sy", g), FormatError);
}

TEST_CASE("foreign and corrupt checkpoints are rejected") {
  const auto dir = temp_dir("corrupt");
  models::save_checkpoint(make_checkpoint(2, 12), dir / "ok.bin");
  auto bytes = read_bytes(dir / "ok.bin");

  auto write = [&](const std::string& name, const std::vector<unsigned char>& b) {
    std::ofstream f(dir / name, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return dir / name;
  };
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(models::load_checkpoint(write("magic.bin", magic)), FormatError);
  auto version = bytes;
  version[6] = 9;
  CHECK_THROWS_AS(models::load_checkpoint(write("version.bin", version)), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  CHECK_THROWS_AS(models::load_checkpoint(write("trunc.bin", truncated)), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(models::load_checkpoint(write("trail.bin", trailing)), FormatError);
  CHECK_THROWS_AS(models::load_checkpoint(dir / "absent.bin"), InputError);
}

TEST_CASE("an N=5 checkpoint is rejected by an N=2 session") {
  const auto dir = temp_dir("labeldim");
  models::save_checkpoint(make_checkpoint(5, 13), dir / "n5.bin");
  models::save_checkpoint(make_checkpoint(2, 14), dir / "n2.bin");
  CHECK_NOTHROW(models::load_checkpoint(dir / "n2.bin", 3));
  try {
    models::load_checkpoint(dir / "n5.bin", 3);
    FAIL("expected a label-dimension error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("label dimension 6") != std::string::npos);
  }
}
