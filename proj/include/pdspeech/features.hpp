// include/pdspeech/features.hpp

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

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pdspeech/audio.hpp"

namespace pdspeech::feat {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MfccConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int mel_filters = 26;
  int base_coeffs = 13;
  bool delta = true;
  bool delta_delta = true;
  double preemphasis = 0.97;
  double low_hz = 0.0;
  double high_hz = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;

  void Validate() const;
  int OutputDim() const { return base_coeffs * (1 + (delta ? 1 : 0) + (delta_delta ? 1 : 0)); }
  /// Stable digest of every field, recorded in feature cache headers.
  std::string Hash() const;
};

/// Frame geometry derived from the config at a given sample rate.
struct Framing {
  int frame_length = 0;
  int hop = 0;
  int fft_size = 0;

  static Framing For(const MfccConfig& cfg, int sample_rate);
  int NumFrames(size_t num_samples) const;
};

/// Log-free mel filterbank energies per frame (rows = frames). Exposed for
/// inspection and tests; Mfcc() is built on it.
FeatureMatrix FilterbankEnergies(const audio::AudioClip& clip, const MfccConfig& cfg);

/// Center frequencies (Hz) of the triangular mel filters.
std::vector<double> MelCenterFrequencies(const MfccConfig& cfg, int sample_rate);

/// Cepstra plus regression deltas. Rows are frames in time order.
FeatureMatrix Mfcc(const audio::AudioClip& clip, const MfccConfig& cfg);

/// Appends delta features computed by +/-`window`-frame regression with edge
/// replication.
FeatureMatrix Deltas(const FeatureMatrix& m, int window = 2);

/// Per-column mean followed by per-column (population) standard deviation.
Eigen::VectorXd PooledVector(const FeatureMatrix& m);

/// Feature cache file: container header {"kind": "features", rows, cols,
/// frame_rate, config_hash} followed by row-major float32 values.
void WriteFeatureCache(const std::string& path, const FeatureMatrix& m, double frame_rate,
                       const std::string& config_hash);

struct CachedFeatures {
  FeatureMatrix matrix;
  double frame_rate = 0.0;
  std::string config_hash;
};

CachedFeatures ReadFeatureCache(const std::string& path);

}  // namespace pdspeech::feat
