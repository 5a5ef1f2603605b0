// src/audio.cpp

// Copyright 2026 The pdspeech Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pdspeech/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pdspeech/common.hpp"

namespace pdspeech::audio {

void SilenceConfig::Validate() const {
  if (rms_window < 1) throw Error("config", "silence.rms_window must be >= 1");
  if (!(rms_threshold >= 0)) throw Error("config", "silence.rms_threshold must be >= 0");
  if (!(min_silence_ms >= 0)) throw Error("config", "silence.min_silence_ms must be >= 0");
}

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t U16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
uint32_t U32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void PutU16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}
void PutU32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

double DecodeSample(const unsigned char* p, uint16_t format, int bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      float f;
      uint32_t u = U32(p);
      std::memcpy(&f, &u, 4);
      return f;
    }
    uint64_t u = static_cast<uint64_t>(U32(p)) | (static_cast<uint64_t>(U32(p + 4)) << 32);
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }
  switch (bits) {
    case 8:
      return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16:
      return static_cast<int16_t>(U16(p)) / 32768.0;
    case 24: {
      int32_t v = static_cast<int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default:
      return static_cast<int32_t>(U32(p)) / 2147483648.0;
  }
}

}  // namespace

AudioClip DecodeWav(const std::string& bytes, const std::string& origin) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    throw Error("format", origin + ": not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* pcm = nullptr;
  size_t pcm_bytes = 0;

  size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const uint32_t len = U32(chunk + 4);
    const size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > size) throw Error("format", origin + ": truncated fmt chunk");
      format = U16(data + body);
      channels = U16(data + body + 2);
      rate = U32(data + body + 4);
      bits = U16(data + body + 14);
      if (format == kFormatExtensible) {
        if (len < 26) throw Error("format", origin + ": truncated WAVE_FORMAT_EXTENSIBLE header");
        format = U16(data + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = std::min<size_t>(len, size - body);
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw Error("format", origin + ": missing fmt chunk");
  if (!pcm) throw Error("format", origin + ": missing data chunk");
  if (format != kFormatPcm && format != kFormatFloat)
    throw Error("format", origin + ": unsupported encoding (format tag " + std::to_string(format) +
                              "); only integer PCM and IEEE float are accepted");
  const bool ok_bits = format == kFormatPcm ? (bits == 8 || bits == 16 || bits == 24 || bits == 32)
                                            : (bits == 32 || bits == 64);
  if (!ok_bits)
    throw Error("format", origin + ": unsupported bit depth " + std::to_string(bits));
  if (channels == 0 || rate == 0) throw Error("format", origin + ": invalid channel count or rate");

  const size_t bytes_per_sample = bits / 8;
  const size_t frame_bytes = bytes_per_sample * channels;
  const size_t frames = pcm_bytes / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.source_id = origin;
  clip.samples.resize(frames);
  for (size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (uint16_t c = 0; c < channels; ++c)
      acc += DecodeSample(pcm + f * frame_bytes + c * bytes_per_sample, format, bits);
    const double v = acc / channels;
    if (!std::isfinite(v)) throw Error("format", origin + ": non-finite sample value");
    clip.samples[f] = v;
  }
  return clip;
}

AudioClip LoadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return DecodeWav(ss.str(), path);
}

std::string EncodeWav16(const AudioClip& clip) {
  const uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  PutU32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  PutU32(s, 16);
  PutU16(s, kFormatPcm);
  PutU16(s, 1);
  PutU32(s, static_cast<uint32_t>(clip.sample_rate));
  PutU32(s, static_cast<uint32_t>(clip.sample_rate) * 2);
  PutU16(s, 2);
  PutU16(s, 16);
  s += "data";
  PutU32(s, data_bytes);
  for (double x : clip.samples) {
    const double q = std::clamp(std::nearbyint(x * 32768.0), -32768.0, 32767.0);
    PutU16(s, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  return s;
}

void WriteWav(const std::string& path, const AudioClip& clip) {
  const std::string bytes = EncodeWav16(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "write failed for '" + path + "'");
}

AudioClip Resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw Error("invalid_argument", "resample: target rate must be positive");
  if (clip.sample_rate <= 0) throw Error("invalid_argument", "resample: source rate must be positive");
  if (clip.samples.empty()) throw Error("invalid_argument", "resample: empty clip");
  if (clip.sample_rate == target_rate) return clip;

  constexpr int kHalfTaps = 32;  // 64 taps per phase
  constexpr double kBeta = 8.0;
  const int64_t g = std::gcd<int64_t, int64_t>(clip.sample_rate, target_rate);
  const int64_t up = target_rate / g;
  const int64_t down = clip.sample_rate / g;
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  auto phase_taps = [&](int64_t phase) {
    std::vector<double> w(2 * kHalfTaps);
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    double sum = 0.0;
    for (int k = -kHalfTaps + 1; k <= kHalfTaps; ++k) {
      const double x = k - frac;
      const double u = cutoff * x;
      const double sinc = u == 0.0 ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
      const double r = x / kHalfTaps;
      const double win = std::abs(r) >= 1.0 ? 0.0
                                              : std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      const double h = cutoff * sinc * win;
      w[k + kHalfTaps - 1] = h;
      sum += h;
    }
    for (double& h : w) h /= sum;
    return w;
  };

  const bool cache = up <= 4096;
  std::vector<std::vector<double>> table;
  if (cache) {
    table.reserve(static_cast<size_t>(up));
    for (int64_t p = 0; p < up; ++p) table.push_back(phase_taps(p));
  }

  const int64_t n_in = static_cast<int64_t>(clip.samples.size());
  const int64_t n_out = (n_in * up + down - 1) / down;
  AudioClip out;
  out.sample_rate = target_rate;
  out.source_id = clip.source_id;
  out.samples.resize(static_cast<size_t>(n_out));
  for (int64_t n = 0; n < n_out; ++n) {
    const int64_t num = n * down;
    const int64_t base = num / up;
    const int64_t phase = num % up;
    std::vector<double> local;
    const std::vector<double>& w = cache ? table[static_cast<size_t>(phase)] : (local = phase_taps(phase));
    double acc = 0.0;
    for (int k = -kHalfTaps + 1; k <= kHalfTaps; ++k) {
      const int64_t idx = base + k;
      if (idx < 0 || idx >= n_in) continue;
      acc += w[k + kHalfTaps - 1] * clip.samples[static_cast<size_t>(idx)];
    }
    out.samples[static_cast<size_t>(n)] = acc;
  }
  return out;
}

std::vector<double> RmsSeries(const AudioClip& clip, int window) {
  if (window < 1) throw Error("invalid_argument", "rms window must be >= 1");
  std::vector<double> rms;
  const size_t n = clip.samples.size();
  const size_t w = static_cast<size_t>(window);
  rms.reserve((n + w - 1) / w);
  for (size_t start = 0; start < n; start += w) {
    const size_t end = std::min(n, start + w);
    double acc = 0.0;
    for (size_t i = start; i < end; ++i) acc += clip.samples[i] * clip.samples[i];
    rms.push_back(std::sqrt(acc / static_cast<double>(end - start)));
  }
  return rms;
}

SilenceResult RemoveSilence(const AudioClip& clip, const SilenceConfig& cfg) {
  cfg.Validate();
  if (clip.sample_rate != kWorkingRate)
    throw Error("invalid_argument", "remove_silence expects 16 kHz audio, got " +
                                        std::to_string(clip.sample_rate) + " Hz");
  const std::vector<double> rms = RmsSeries(clip, cfg.rms_window);
  const size_t n = clip.samples.size();
  const size_t w = static_cast<size_t>(cfg.rms_window);
  const double max_keep = cfg.min_silence_ms * clip.sample_rate / 1000.0;

  std::vector<char> keep(n, 1);
  size_t i = 0;
  while (i < rms.size()) {
    if (rms[i] >= cfg.rms_threshold) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < rms.size() && rms[j] < cfg.rms_threshold) ++j;
    const size_t begin = i * w;
    const size_t end = std::min(n, j * w);
    if (static_cast<double>(end - begin) > max_keep)
      std::fill(keep.begin() + static_cast<std::ptrdiff_t>(begin),
                keep.begin() + static_cast<std::ptrdiff_t>(end), 0);
    i = j;
  }

  SilenceResult result;
  result.clip.sample_rate = clip.sample_rate;
  result.clip.source_id = clip.source_id;
  result.clip.samples.reserve(n);
  for (size_t k = 0; k < n; ++k)
    if (keep[k]) result.clip.samples.push_back(clip.samples[k]);
  result.removed_samples = n - result.clip.samples.size();
  result.fully_silent = result.clip.samples.empty();
  return result;
}

}  // namespace pdspeech::audio
