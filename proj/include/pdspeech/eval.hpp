// include/pdspeech/eval.hpp

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

// Speaker-disjoint fold plans, confusion metrics, per-person voting and the
// report that aggregates predictions over folds.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdspeech/common.hpp"

namespace pdspeech::eval {

struct SpeakerInfo {
  std::string speaker_id;
  Label label = Label::kHC;
  int segments = 0;
};

struct FoldPlan {
  int k = 5;
  uint64_t seed = 0;
  std::map<std::string, int> speaker_fold;

  int FoldOf(const std::string& speaker) const;
  nlohmann::json ToJson() const;
  static FoldPlan FromJson(const nlohmann::json& j);
};

/// Seeded shuffle, then a stable sort by (class, descending segment count),
/// then round-robin dealing; each class starts at the fold after the one
/// where the previous class stopped. Throws Error("data") when a class has
/// fewer than k speakers or a speaker is listed twice.
FoldPlan MakeFolds(const std::vector<SpeakerInfo>& speakers, int k, uint64_t seed);

struct Confusion {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t Total() const { return tp + fp + tn + fn; }
};

/// Ratios with a zero denominator are absent rather than zero.
struct Metrics {
  Confusion counts;
  std::optional<double> f1, accuracy, sensitivity, ppv, specificity;
};

Confusion CountConfusion(const std::vector<Label>& predicted, const std::vector<Label>& truth);
Metrics FromConfusion(const Confusion& c);
Metrics ComputeMetrics(const std::vector<Label>& predicted, const std::vector<Label>& truth);

/// Modal class; an exact tie goes to PD. Throws on an empty group.
Label MajorityVote(const std::vector<Label>& votes);

struct PredictionRecord {
  std::string utterance_id;
  std::string speaker_id;
  Label true_label = Label::kHC;
  Label predicted_label = Label::kHC;
  double score = 0.0;
  int fold = 0;
};

struct PersonPrediction {
  std::string speaker_id;
  Label true_label = Label::kHC;
  Label predicted_label = Label::kHC;
};

/// One vote per speaker, sorted by speaker id. Throws Error("data") if a
/// speaker carries two different true labels.
std::vector<PersonPrediction> VotePerPerson(const std::vector<PredictionRecord>& preds);

struct AveragedMetrics {
  std::map<std::string, double> mean;   // metric name -> mean over folds where present
  std::map<std::string, int> present;   // metric name -> number of folds contributing
  int folds = 0;
};

/// Unweighted mean across folds; absent values are skipped and counted.
AveragedMetrics AggregateFolds(const std::vector<Metrics>& reports);

nlohmann::json MetricsJson(const Metrics& m);
nlohmann::json AveragedJson(const AveragedMetrics& a);

std::vector<PredictionRecord> ReadPredictions(const std::string& path);
void WritePredictions(const std::string& path, const std::vector<PredictionRecord>& preds);
nlohmann::json PredictionJson(const PredictionRecord& p);
PredictionRecord PredictionFromJson(const nlohmann::json& j);

/// Per-fold, averaged and pooled blocks at segment and person level.
/// Throws Error("data") if a record's fold lies outside [0, k) or a fold is
/// empty.
nlohmann::json BuildReport(const std::vector<PredictionRecord>& preds, int k, const std::string& config_hash,
                           uint64_t seed);

}  // namespace pdspeech::eval
