// include/pdspeech/audio.hpp

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

#pragma once

#include <string>
#include <vector>

namespace pdspeech::audio {

inline constexpr int kWorkingRate = 16000;

/// Mono waveform with amplitudes normalized to [-1, 1).
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kWorkingRate;
  std::string source_id;

  double DurationSeconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Energy-based silence removal settings. Defaults are the published recipe
/// for 16 kHz audio.
struct SilenceConfig {
  int rms_window = 481;
  double rms_threshold = 0.0025;
  double min_silence_ms = 500.0;

  void Validate() const;
};

struct SilenceResult {
  AudioClip clip;
  bool fully_silent = false;
  size_t removed_samples = 0;
};

/// Reads a RIFF/WAVE file: integer PCM (8/16/24/32-bit) or 32-bit float,
/// any channel count (downmixed by channel mean). Throws Error("io") when the
/// file cannot be read and Error("format") for compressed or malformed data.
AudioClip LoadWav(const std::string& path);

/// Writes 16-bit PCM mono.
void WriteWav(const std::string& path, const AudioClip& clip);

/// Encodes a clip as 16-bit PCM mono WAV bytes.
std::string EncodeWav16(const AudioClip& clip);

AudioClip DecodeWav(const std::string& bytes, const std::string& origin);

/// Kaiser-windowed sinc resampler with 64 taps per phase. Returns the input
/// unchanged when the rates already agree.
AudioClip Resample(const AudioClip& clip, int target_rate);

/// RMS over consecutive non-overlapping windows. The final partial window is
/// normalized by its own length.
std::vector<double> RmsSeries(const AudioClip& clip, int window);

/// Deletes every maximal run of sub-threshold RMS windows longer than
/// `min_silence_ms`; everything else is kept in order, sample for sample.
SilenceResult RemoveSilence(const AudioClip& clip, const SilenceConfig& cfg);

}  // namespace pdspeech::audio
