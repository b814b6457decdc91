// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/wav.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "nitcg/error.h"

namespace nitcg::dsp {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, int required_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open WAV file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) { throw FormatError(path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) fail("truncated fmt chunk");
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) fail("missing fmt chunk");
  if (!data) fail("missing data chunk");
  if (format != 1 || bits != 16) {
    fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
         " bits); expected PCM 16-bit");
  }
  if (channels != 1) fail("expected mono audio, found " + std::to_string(channels) + " channels");
  if (required_rate != 0 && static_cast<int>(rate) != required_rate) {
    fail("sample rate " + std::to_string(rate) + " Hz, expected " + std::to_string(required_rate) + " Hz");
  }
  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  wave.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    const auto s = static_cast<std::int16_t>(le16(data + 2 * i));
    wave.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw InputError("write_wav: invalid sample rate");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (double v : wave.samples) {
    double scaled = std::nearbyint(v * 32768.0);
    if (!std::isfinite(scaled)) scaled = 0.0;
    scaled = std::min(32767.0, std::max(-32768.0, scaled));
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError(path.string() + ": cannot open for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError(path.string() + ": write failed");
}

}  // namespace nitcg::dsp
