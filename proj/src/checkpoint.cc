// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/checkpoint.h"

#include <cstring>
#include <fstream>
#include <iterator>

#include "nitcg/config_json.h"
#include "nitcg/error.h"

namespace nitcg::models {

using nlohmann::json;

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<unsigned char>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<long>(pos_), bytes_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(origin_ + ": " + why);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail("truncated checkpoint");
  }
  const std::vector<unsigned char>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

NamedTensor to_named(const std::string& name, const ad::Shape& shape, std::span<const float> values) {
  NamedTensor t;
  t.name = name;
  for (auto d : shape) t.shape.push_back(static_cast<std::uint32_t>(d));
  t.values.assign(values.begin(), values.end());
  return t;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void export_parameters(const ad::ParameterSet& set, const std::string& prefix, Checkpoint& c) {
  for (const auto& p : set.parameters()) {
    c.tensors.push_back(to_named(prefix + "/" + p.name, p.tensor.shape(), p.tensor.data()));
  }
}

void import_parameters(const Checkpoint& c, const std::string& prefix, ad::ParameterSet& set) {
  for (auto& p : set.parameters()) {
    const NamedTensor* t = c.find(prefix + "/" + p.name);
    if (!t) throw FormatError("checkpoint lacks tensor '" + prefix + "/" + p.name + "'");
    if (t->values.size() != p.tensor.size()) {
      throw FormatError("checkpoint tensor '" + t->name + "' has " + std::to_string(t->values.size()) +
                        " values, model expects " + std::to_string(p.tensor.size()));
    }
    auto dst = p.tensor.mutable_data();
    std::copy(t->values.begin(), t->values.end(), dst.begin());
  }
}

void export_adam(const ad::AdamState& state, const ad::ParameterSet& set, const std::string& prefix,
                 Checkpoint& c) {
  const auto& params = set.parameters();
  if (state.m.size() != params.size()) throw ShapeError("Adam state does not match parameter set");
  c.adam[prefix] = {{"step", state.step}, {"beta1", state.beta1}, {"beta2", state.beta2}, {"eps", state.eps}};
  for (std::size_t k = 0; k < params.size(); ++k) {
    c.tensors.push_back(to_named("adam/" + prefix + "/m/" + params[k].name, params[k].tensor.shape(), state.m[k]));
    c.tensors.push_back(to_named("adam/" + prefix + "/v/" + params[k].name, params[k].tensor.shape(), state.v[k]));
  }
}

ad::AdamState import_adam(const Checkpoint& c, const ad::ParameterSet& set, const std::string& prefix) {
  if (!c.adam.contains(prefix)) throw FormatError("checkpoint lacks optimizer state '" + prefix + "'");
  const json& meta = c.adam.at(prefix);
  ad::AdamState s = ad::AdamState::for_parameters(set.parameters(), meta.at("beta1").get<double>(),
                                                  meta.at("beta2").get<double>(),
                                                  meta.at("eps").get<double>());
  s.step = meta.at("step").get<std::uint64_t>();
  const auto& params = set.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (const char* which : {"m", "v"}) {
      const std::string name = "adam/" + prefix + "/" + which + "/" + params[k].name;
      const NamedTensor* t = c.find(name);
      if (!t || t->values.size() != params[k].tensor.size()) {
        throw FormatError("checkpoint optimizer tensor '" + name + "' missing or misshapen");
      }
      (which[0] == 'm' ? s.m[k] : s.v[k]) = t->values;
    }
  }
  return s;
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& c) {
  json meta = {
      {"mode", c.mode},
      {"generator",
       {{"in_rows", c.generator.in_rows},
        {"base_channels", c.generator.base_channels},
        {"n_residual_blocks", c.generator.n_residual_blocks},
        {"downsample_factor", c.generator.downsample_factor}}},
      {"discriminator",
       {{"in_rows", c.discriminator.in_rows},
        {"base_channels", c.discriminator.base_channels},
        {"n_layers", c.discriminator.n_layers}}},
      {"labels", c.label_names},
      {"stft", dsp::stft_json(c.stft)},
      {"features", dsp::features_json(c.features)},
      {"epoch", c.epoch},
      {"global_step", c.global_step},
      {"train_config", c.train_config},
      {"adam", c.adam},
  };
  const std::string text = meta.dump();

  std::vector<NamedTensor> tensors = c.tensors;
  if (!c.norm.empty()) {
    const ad::Shape shape{c.norm.mean.size()};
    tensors.push_back(to_named("norm/mean", shape, c.norm.mean));
    tensors.push_back(to_named("norm/stddev", shape, c.norm.stddev));
  }

  std::vector<unsigned char> out(kCheckpointMagic, kCheckpointMagic + 6);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u32(out, d);
    for (float v : t.values) put_f32(out, v);
  }
  return out;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(c);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw InputError(tmp.string() + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InputError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kCheckpointMagic, 6) != 0) {
    r.fail("not a checkpoint (bad magic)");
  }
  r.str(6);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  const std::string text = r.str(r.u32());
  Checkpoint c;
  try {
    const json meta = json::parse(text);
    c.mode = meta.at("mode").get<std::string>();
    const json& g = meta.at("generator");
    c.generator = {g.at("in_rows").get<std::size_t>(), g.at("base_channels").get<std::size_t>(),
                   g.at("n_residual_blocks").get<std::size_t>(),
                   g.at("downsample_factor").get<std::size_t>()};
    const json& d = meta.at("discriminator");
    c.discriminator = {d.at("in_rows").get<std::size_t>(), d.at("base_channels").get<std::size_t>(),
                       d.at("n_layers").get<std::size_t>()};
    c.label_names = meta.at("labels").get<std::vector<std::string>>();
    c.stft = dsp::stft_from_json(meta.at("stft"));
    c.features = dsp::features_from_json(meta.at("features"));
    c.epoch = meta.at("epoch").get<std::uint64_t>();
    c.global_step = meta.at("global_step").get<std::uint64_t>();
    c.train_config = meta.at("train_config");
    c.adam = meta.at("adam");
  } catch (const json::exception& e) {
    r.fail(std::string("malformed metadata: ") + e.what());
  } catch (const InputError& e) {
    r.fail(std::string("malformed metadata: ") + e.what());
  }
  if (c.mode != "nit" && c.mode != "baseline") r.fail("unknown mode '" + c.mode + "'");

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u32());
      n *= t.shape.back();
    }
    if (n > bytes.size()) r.fail("tensor '" + t.name + "' larger than file");
    t.values.resize(n);
    for (auto& v : t.values) v = r.f32();
    if (t.name == "norm/mean") {
      c.norm.mean = std::move(t.values);
    } else if (t.name == "norm/stddev") {
      c.norm.stddev = std::move(t.values);
    } else {
      c.tensors.push_back(std::move(t));
    }
  }
  if (!r.done()) r.fail("trailing bytes after tensor table");
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::size_t> expected_label_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open checkpoint");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint c = parse_checkpoint(bytes, path.string());
  if (expected_label_dim && *expected_label_dim != c.label_dim()) {
    throw FormatError(path.string() + ": checkpoint label dimension " + std::to_string(c.label_dim()) +
                      " does not match this session's " + std::to_string(*expected_label_dim));
  }
  return c;
}

}  // namespace nitcg::models
