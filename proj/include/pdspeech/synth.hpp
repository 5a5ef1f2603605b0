// include/pdspeech/synth.hpp

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

// Synthetic multi-domain, two-class corpus.
//
// Each utterance is a sequence of voiced segments separated by pauses. A
// voiced segment is a jittered glottal pulse train through a glottal
// low-pass and three formant resonators, with a little aspiration noise.
// Domains differ by a first-order spectral tilt filter and an f0 offset;
// PD speakers get amplitude tremor, more jitter and longer pauses. The
// result is not realistic speech, only a controllable source of MFCC
// structure.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdspeech/audio.hpp"
#include "pdspeech/manifest.hpp"

namespace pdspeech::synth {

struct SynthConfig {
  int num_domains = 2;
  int speakers_per_cell = 10;
  int utterances_per_speaker = 4;
  double utterance_seconds = 2.0;
  uint64_t seed = 0;

  // Domain factors; entry d applies to every speaker of domain d.
  std::vector<double> domain_tilt = {0.6, -0.6, 0.0, -0.9};
  std::vector<double> domain_f0_offset = {0.0, 40.0, -30.0, 80.0};

  // Class factors.
  double tremor_depth = 0.5;   // PD amplitude modulation depth
  double tremor_min_hz = 4.0;
  double tremor_max_hz = 7.0;
  double jitter_hc = 0.005;  // cycle-length perturbation (fraction)
  double jitter_pd = 0.04;
  double pause_multiplier_pd = 2.5;  // scales the short inter-segment gaps

  double long_pause_prob = 0.15;  // per gap; long pauses exceed 0.5 s
  double noise_floor = 1e-4;

  void Validate() const;
  nlohmann::json ToJson() const;
};

/// Synthesizes one utterance; deterministic in (cfg.seed, utterance id).
audio::AudioClip SynthesizeUtterance(const SynthConfig& cfg, const std::string& speaker_id, int domain, Label label,
                                     const std::string& utterance_id);

/// Writes out_dir/wav/<utterance_id>.wav and out_dir/manifest.jsonl.
data::Manifest Generate(const SynthConfig& cfg, const std::string& out_dir);

struct CalibrationReport {
  std::vector<double> pd_speaker_accuracy;  // per domain, held-out speakers
  double domain_accuracy = 0.0;             // held-out utterances
};

/// Two-fold speaker-disjoint linear probes on pooled MFCC vectors: the PD
/// probe votes per speaker within each domain, the domain probe is scored
/// per utterance. `pooled` holds one row per manifest record.
CalibrationReport Calibrate(const data::Manifest& m, const Eigen::MatrixXd& pooled, uint64_t seed);

}  // namespace pdspeech::synth
