// include/pdspeech/config.hpp

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

// Pipeline configuration. Loaded from TOML with a strict schema: unknown
// sections or keys and type mismatches are errors. The hash of the resolved
// configuration is stamped on every artifact.

#include <string>
#include <vector>

#include "json.hpp"
#include "pdspeech/audio.hpp"
#include "pdspeech/encoder.hpp"
#include "pdspeech/features.hpp"
#include "pdspeech/heads.hpp"
#include "pdspeech/synth.hpp"

namespace pdspeech::config {

struct ClusterSection {
  int k_stage1 = 100;
  int k_stage2 = 500;
  int max_iters = 50;
  int subsample = 1;
  int stage2_layer = -1;  // -1 = num_layers / 2
};

struct DaptSection {
  nn::TrainConfig train;
  model::MaskSpec mask;
  int crop_frames = 200;
  bool normalize_loss = true;
  double heldout_fraction = 0.1;
};

struct FinetuneSection {
  nn::TrainConfig train;
  int crop_frames = 200;
  int domain_steps = 5;           // domain head updates per batch
  double domain_lr_scale = 5.0;   // domain head learning rate multiplier
};

struct EvalSection {
  int folds = 5;
  double unlabeled_fraction = 0.5;
  double inner_validation = 0.2;
  double grid_lo = 1e-4;
  double grid_hi = 1.0;
  int grid_points = 5;
  int svm_epochs = 50;
  int fista_max_iters = 20000;
  double fista_tol = 1e-12;
};

struct PipelineConfig {
  uint64_t seed = 0;
  audio::SilenceConfig silence;
  feat::MfccConfig mfcc;
  ClusterSection cluster;
  model::EncoderConfig encoder;  // input_dim and num_classes are derived
  model::HeadConfig heads;
  DaptSection dapt;
  FinetuneSection finetune;
  model::GrlConfig grl;
  EvalSection eval;
  synth::SynthConfig synth;

  PipelineConfig();

  void Validate() const;
  nlohmann::json ToJson() const;
  /// Hex FNV-1a of the canonical JSON form.
  std::string Hash() const;

  /// Training settings with the stage seed filled in.
  nn::TrainConfig DaptTrain() const;
  nn::TrainConfig FinetuneTrain() const;
};

PipelineConfig LoadToml(const std::string& path);
PipelineConfig ParseToml(const std::string& text, const std::string& origin);

/// Applies `section.key=value` overrides (values in TOML syntax).
void ApplyOverride(PipelineConfig& cfg, const std::string& assignment);

/// One line per key: "section.key = default  [provenance] description".
std::string DefaultsTable();

/// The defaults as a TOML document.
std::string DefaultsToml();

}  // namespace pdspeech::config
