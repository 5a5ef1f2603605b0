// include/pdspeech/pipeline.hpp

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

// File-to-file pipeline stages behind the command-line tool. Every stage
// writes its artifact plus a provenance sidecar "<artifact>.prov.json" with
// the config hash, seed and input checksums.

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "pdspeech/checkpoint.hpp"
#include "pdspeech/config.hpp"
#include "pdspeech/eval.hpp"
#include "pdspeech/kmeans.hpp"
#include "pdspeech/manifest.hpp"

namespace pdspeech::pipeline {

struct Context {
  config::PipelineConfig cfg;
  int jobs = 1;                 // worker threads for per-file stages
  std::ostream* log = nullptr;  // progress lines; null = quiet
  std::string command;          // recorded in provenance
  bool force = false;           // accept mismatched config hashes
};

/// `config_hash` defaults to the context's hash; predictions pass the hash
/// of the checkpoint that produced them.
void WriteSidecar(const std::string& artifact, const Context& ctx, const std::vector<std::string>& inputs,
                  const nlohmann::json& extra = nlohmann::json::object(), const std::string& config_hash = "");

/// Config hash recorded in an artifact's sidecar, or "" when there is none.
std::string SidecarHash(const std::string& artifact);

/// Throws Error("config") when `hash` differs from the context's config
/// hash, unless ctx.force is set.
void CheckHash(const Context& ctx, const std::string& hash, const std::string& what);

data::Manifest RunSynth(const Context& ctx, const std::string& out_dir);

struct PrepStats {
  size_t utterances = 0;
  size_t fully_silent = 0;  // dropped from the output manifest
  double seconds_in = 0.0;
  double seconds_out = 0.0;
};

/// Resample to 16 kHz and remove long silences; writes out_dir/wav and
/// out_dir/manifest.jsonl.
PrepStats RunPrep(const Context& ctx, const std::string& manifest_path, const std::string& out_dir);

/// Writes out_dir/feats/<id>.feat and a feature manifest whose paths point
/// at the caches.
data::Manifest RunMfcc(const Context& ctx, const std::string& manifest_path, const std::string& out_dir);

struct FeatureSet {
  data::Manifest manifest;
  std::vector<feat::FeatureMatrix> features;  // aligned with manifest.records

  std::vector<const feat::FeatureMatrix*> Pointers() const;
};

FeatureSet LoadFeatures(const Context& ctx, const std::string& manifest_path);

struct LabelSet {
  int k = 0;
  int stage = 1;
  std::string feature_space;
  std::string config_hash;
  std::map<std::string, cluster::PseudoLabels> labels;  // utterance id -> ids
};

void WriteLabels(const std::string& path, const LabelSet& labels);
LabelSet ReadLabels(const std::string& path);

/// Stage 1 clusters MFCC frames, stage 2 clusters encoder latents of
/// `checkpoint`. Writes out_dir/clusters.bin and out_dir/labels.json.
LabelSet RunPseudolabel(const Context& ctx, const std::string& features_manifest, int stage,
                        const std::string& checkpoint, const std::string& out_dir);

/// Masked-prediction training. `init` may be empty for a fresh encoder.
model::DaptReport RunDapt(const Context& ctx, const std::string& features_manifest, const std::string& labels_path,
                          const std::string& init, const std::string& out_checkpoint);

struct FinetuneRequest {
  bool dat = false;
  bool freeze_encoder = false;
  std::string init;        // checkpoint; empty = random encoder
  std::string folds_path;  // empty = train on every record
  int fold = -1;           // held-out fold when folds_path is set
};

model::FinetuneReport RunFinetune(const Context& ctx, const std::string& features_manifest,
                                  const FinetuneRequest& req, const std::string& out_checkpoint);

/// Predictions for the records of `fold` (all records when folds_path is
/// empty; their fold field is then 0).
std::vector<eval::PredictionRecord> RunPredict(const Context& ctx, const std::string& checkpoint,
                                               const std::string& features_manifest, const std::string& folds_path,
                                               int fold, const std::string& out_path);

/// "lsrc" (joint dictionary), "lsrc-cd" (class dictionaries) or "svm" over
/// pooled MFCC vectors, trained and tested per fold.
std::vector<eval::PredictionRecord> RunBaseline(const Context& ctx, const std::string& features_manifest,
                                                const std::string& folds_path, const std::string& method,
                                                const std::string& out_path);

eval::FoldPlan RunFolds(const Context& ctx, const std::string& manifest_path, const std::string& out_path);

/// Reads and concatenates prediction files, writes the report JSON.
nlohmann::json RunEval(const Context& ctx, const std::vector<std::string>& prediction_paths, int k,
                       const std::string& out_path);

/// Side-by-side summary of several reports.
nlohmann::json RunReport(const Context& ctx, const std::vector<std::string>& report_paths, const std::string& out_path);

/// Writes JSON with a trailing newline; byte-stable for equal values.
void WriteJson(const std::string& path, const nlohmann::json& j);
nlohmann::json ReadJson(const std::string& path);

}  // namespace pdspeech::pipeline
