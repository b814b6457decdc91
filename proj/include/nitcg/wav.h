// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_WAV_H_
#define NITCG_WAV_H_

#include <filesystem>

#include "nitcg/dsp.h"

namespace nitcg::dsp {

// Reads RIFF/WAVE PCM 16-bit mono. A nonzero `required_rate` rejects other
// sample rates. Samples are scaled to [-1, 1).
Waveform read_wav(const std::filesystem::path& path, int required_rate = 16000);

// Writes PCM 16-bit mono; samples are clipped to the representable range.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace nitcg::dsp

#endif  // NITCG_WAV_H_
