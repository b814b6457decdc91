// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/models.h"

#include <string>

#include "nitcg/error.h"

namespace nitcg::models {

namespace {

constexpr float kInitStddev = 0.02f;

std::size_t ceil_half(std::size_t n) { return (n + 1) / 2; }

void require_rows(const ad::Tensor& ext, std::size_t rows, const char* who) {
  if (ext.rank() != 3 || ext.dim(1) != rows) {
    throw ShapeError(std::string(who) + ": expected [B, " + std::to_string(rows) + ", T], got " +
                     ad::shape_str(ext.shape()));
  }
}

}  // namespace

void GeneratorSpec::validate() const {
  if (in_rows == 0 || base_channels == 0 || downsample_factor == 0) {
    throw InputError("generator spec fields must be positive");
  }
  if ((downsample_factor & (downsample_factor - 1)) != 0) {
    throw InputError("generator downsample factor must be a power of two");
  }
}

std::size_t GeneratorSpec::downsample_blocks() const {
  std::size_t k = 0;
  for (std::size_t f = downsample_factor; f > 1; f /= 2) ++k;
  return k;
}

void DiscriminatorSpec::validate() const {
  if (in_rows == 0 || base_channels == 0 || n_layers == 0) {
    throw InputError("discriminator spec fields must be positive");
  }
}

std::pair<std::size_t, std::size_t> DiscriminatorSpec::grid(std::size_t rows,
                                                            std::size_t frames) const {
  for (std::size_t i = 0; i < n_layers; ++i) {
    rows = ceil_half(rows);
    frames = ceil_half(frames);
  }
  return {rows, frames};
}

Generator::Conv Generator::add_conv(const std::string& name, std::size_t c_in, std::size_t c_out,
                                    std::size_t k, std::size_t stride, std::mt19937_64& rng) {
  Conv c;
  c.weight = parameters().size();
  add_parameter(name + ".weight", ad::randn({c_out, c_in, k, k}, kInitStddev, rng));
  c.bias = parameters().size();
  add_parameter(name + ".bias", ad::Tensor::zeros({c_out}));
  c.options = {stride, stride, k / 2, k / 2};
  return c;
}

Generator::Norm Generator::add_norm(const std::string& name, std::size_t channels) {
  Norm n;
  n.gamma = parameters().size();
  add_parameter(name + ".gamma", ad::Tensor::full({channels}, 1.0f));
  n.beta = parameters().size();
  add_parameter(name + ".beta", ad::Tensor::zeros({channels}));
  return n;
}

ad::Tensor Generator::conv(const Conv& c, const ad::Tensor& x) const {
  return ad::conv2d(x, param(c.weight), param(c.bias), c.options);
}

ad::Tensor Generator::norm(const Norm& n, const ad::Tensor& x) const {
  return ad::instance_norm(x, param(n.gamma), param(n.beta));
}

Generator::Generator(const GeneratorSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  spec_.validate();
  const std::size_t b = spec_.base_channels;
  const std::size_t wide = 2 * b;
  stem_ = add_conv("stem.conv", 1, 2 * b, 5, 1, rng);
  std::size_t ch = b;
  for (std::size_t i = 0; i < spec_.downsample_blocks(); ++i) {
    const std::string name = "down" + std::to_string(i + 1);
    Conv c = add_conv(name + ".conv", ch, 2 * wide, 3, 2, rng);
    Norm n = add_norm(name + ".norm", 2 * wide);
    down_.emplace_back(c, n);
    ch = wide;
  }
  for (std::size_t i = 0; i < spec_.n_residual_blocks; ++i) {
    const std::string name = "res" + std::to_string(i + 1);
    Residual r;
    r.expand = add_conv(name + ".expand", ch, 2 * ch, 3, 1, rng);
    r.expand_norm = add_norm(name + ".expand_norm", 2 * ch);
    r.project = add_conv(name + ".project", ch, ch, 3, 1, rng);
    r.project_norm = add_norm(name + ".project_norm", ch);
    residual_.push_back(r);
  }
  for (std::size_t i = 0; i < spec_.downsample_blocks(); ++i) {
    const std::string name = "up" + std::to_string(i + 1);
    Conv c = add_conv(name + ".conv", ch, 4 * b, 3, 1, rng);
    Norm n = add_norm(name + ".norm", b);
    up_.emplace_back(c, n);
    ch = b;
  }
  head_ = add_conv("head.conv", ch, 1, 5, 1, rng);
}

ad::Tensor Generator::forward(const ad::Tensor& ext) const {
  require_rows(ext, spec_.in_rows, "generator");
  const std::size_t batch = ext.dim(0), rows = ext.dim(1), frames = ext.dim(2);
  ad::Tensor h = ad::reshape(ext, {batch, 1, rows, frames});
  h = ad::glu(conv(stem_, h), 1);
  for (const auto& [c, n] : down_) h = ad::glu(norm(n, conv(c, h)), 1);
  for (const auto& r : residual_) {
    ad::Tensor t = ad::glu(norm(r.expand_norm, conv(r.expand, h)), 1);
    t = norm(r.project_norm, conv(r.project, t));
    h = ad::add(h, t);
  }
  for (const auto& [c, n] : up_) h = ad::silu(norm(n, ad::pixel_shuffle(conv(c, h), 2)));
  h = conv(head_, h);
  if (h.dim(2) != rows) h = ad::slice(h, 2, 0, rows);
  if (h.dim(3) != frames) h = ad::slice(h, 3, 0, frames);
  return ad::reshape(h, {batch, rows, frames});
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  spec_.validate();
  std::size_t ch = 1;
  for (std::size_t i = 0; i < spec_.n_layers; ++i) {
    const std::size_t out = spec_.base_channels << std::min<std::size_t>(i, 2);
    const std::string name = "block" + std::to_string(i + 1);
    Block blk;
    blk.weight = parameters().size();
    add_parameter(name + ".conv.weight", ad::randn({2 * out, ch, 3, 3}, kInitStddev, rng));
    blk.bias = parameters().size();
    add_parameter(name + ".conv.bias", ad::Tensor::zeros({2 * out}));
    if (i > 0) {
      blk.normed = true;
      blk.gamma = parameters().size();
      add_parameter(name + ".norm.gamma", ad::Tensor::full({2 * out}, 1.0f));
      blk.beta = parameters().size();
      add_parameter(name + ".norm.beta", ad::Tensor::zeros({2 * out}));
    }
    blocks_.push_back(blk);
    ch = out;
  }
  final_weight_ = parameters().size();
  add_parameter("final.conv.weight", ad::randn({1, ch, 3, 3}, kInitStddev, rng));
  final_bias_ = parameters().size();
  add_parameter("final.conv.bias", ad::Tensor::zeros({1}));
}

ad::Tensor Discriminator::logits(const ad::Tensor& ext) const {
  require_rows(ext, spec_.in_rows, "discriminator");
  const std::size_t batch = ext.dim(0);
  ad::Tensor h = ad::reshape(ext, {batch, 1, ext.dim(1), ext.dim(2)});
  const ad::Conv2dOptions strided{2, 2, 1, 1};
  for (const auto& blk : blocks_) {
    h = ad::conv2d(h, param(blk.weight), param(blk.bias), strided);
    if (blk.normed) h = ad::instance_norm(h, param(blk.gamma), param(blk.beta));
    h = ad::glu(h, 1);
  }
  h = ad::conv2d(h, param(final_weight_), param(final_bias_), {1, 1, 1, 1});
  return ad::reshape(h, {batch, h.dim(2), h.dim(3)});
}

ad::Tensor Discriminator::forward(const ad::Tensor& ext) const {
  return ad::clamp(ad::sigmoid(logits(ext)), kScoreEps, 1.0f - kScoreEps);
}

void Discriminator::zero_final_layer() {
  for (std::size_t idx : {final_weight_, final_bias_}) {
    auto values = parameters()[idx].tensor.mutable_data();
    std::fill(values.begin(), values.end(), 0.0f);
  }
}

void Discriminator::shift_final_bias(float delta) {
  parameters()[final_bias_].tensor.mutable_data()[0] += delta;
}

}  // namespace nitcg::models
