// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_CONFIG_JSON_H_
#define NITCG_CONFIG_JSON_H_

#include "json.hpp"
#include "nitcg/dsp.h"

namespace nitcg::dsp {

// Readers reject missing and unknown keys with InputError.
nlohmann::json stft_json(const StftConfig& s);
StftConfig stft_from_json(const nlohmann::json& j);
nlohmann::json features_json(const FeatureConfig& f);
FeatureConfig features_from_json(const nlohmann::json& j);
nlohmann::json norm_json(const FeatureNorm& n);
FeatureNorm norm_from_json(const nlohmann::json& j);

}  // namespace nitcg::dsp

#endif  // NITCG_CONFIG_JSON_H_
