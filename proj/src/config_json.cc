// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/config_json.h"

#include <set>
#include <string>

#include "nitcg/error.h"

namespace nitcg::dsp {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::set<std::string>& keys, const char* what) {
  if (!j.is_object()) throw InputError(std::string(what) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw InputError(std::string(what) + ": unknown key '" + k + "'");
  }
  for (const auto& k : keys) {
    if (!j.contains(k)) throw InputError(std::string(what) + ": missing key '" + k + "'");
  }
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json stft_json(const StftConfig& s) {
  return {{"sample_rate", s.sample_rate}, {"frame_ms", s.frame_ms}, {"hop_ms", s.hop_ms},
          {"fft_size", s.fft_size},       {"window", s.window},     {"center", s.center}};
}

StftConfig stft_from_json(const json& j) {
  require_keys(j, {"sample_rate", "frame_ms", "hop_ms", "fft_size", "window", "center"}, "stft");
  return guarded("stft", [&] {
    StftConfig s;
    s.sample_rate = j.at("sample_rate").get<int>();
    s.frame_ms = j.at("frame_ms").get<double>();
    s.hop_ms = j.at("hop_ms").get<double>();
    s.fft_size = j.at("fft_size").get<std::size_t>();
    s.window = j.at("window").get<std::string>();
    s.center = j.at("center").get<bool>();
    return s;
  });
}

json features_json(const FeatureConfig& f) {
  return {{"log_compress", f.log_compress}, {"floor", f.floor}, {"clip_sigma", f.clip_sigma}};
}

FeatureConfig features_from_json(const json& j) {
  require_keys(j, {"log_compress", "floor", "clip_sigma"}, "features");
  return guarded("features", [&] {
    FeatureConfig f;
    f.log_compress = j.at("log_compress").get<bool>();
    f.floor = j.at("floor").get<float>();
    f.clip_sigma = j.at("clip_sigma").get<float>();
    return f;
  });
}

json norm_json(const FeatureNorm& n) { return {{"mean", n.mean}, {"stddev", n.stddev}}; }

FeatureNorm norm_from_json(const json& j) {
  require_keys(j, {"mean", "stddev"}, "norm");
  FeatureNorm n = guarded("norm", [&] {
    FeatureNorm out;
    out.mean = j.at("mean").get<std::vector<float>>();
    out.stddev = j.at("stddev").get<std::vector<float>>();
    return out;
  });
  if (n.mean.size() != n.stddev.size()) throw InputError("norm: mean/stddev length mismatch");
  for (float s : n.stddev) {
    if (!(s > 0.0f)) throw InputError("norm: stddev must be positive");
  }
  return n;
}

}  // namespace nitcg::dsp
