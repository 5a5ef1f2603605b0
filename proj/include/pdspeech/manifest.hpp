// include/pdspeech/manifest.hpp

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

// Manifest JSONL: one utterance per line,
//   {"utterance_id", "path", "speaker_id", "label": "PD"|"HC"|"none",
//    "domain", "duration"}
// Relative paths resolve against the manifest's directory.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdspeech/common.hpp"
#include "pdspeech/eval.hpp"

namespace pdspeech::data {

struct UtteranceRecord {
  std::string utterance_id;
  std::string path;
  std::string speaker_id;
  std::optional<Label> label;  // empty = unlabeled
  int domain = 0;
  double duration = 0.0;
};

struct Manifest {
  std::vector<UtteranceRecord> records;
  std::string base_dir = ".";

  std::string Resolve(const UtteranceRecord& r) const;
  /// Throws Error("data") on duplicate utterance ids or a speaker whose
  /// records disagree on label or domain.
  void Validate() const;
  bool AllLabeled() const;
};

nlohmann::json RecordJson(const UtteranceRecord& r);
UtteranceRecord RecordFromJson(const nlohmann::json& j);

Manifest ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const Manifest& m);

/// One entry per labeled speaker with its segment count, in first-seen order.
std::vector<eval::SpeakerInfo> Speakers(const Manifest& m);

/// Speaker-disjoint split. Speakers are shuffled within (domain, label)
/// cells and interleaved across cells; the first round(fraction * speakers)
/// become unlabeled (labels cleared). Returns {unlabeled, labeled}. Throws
/// Error("data") if the labeled side would miss a class or either side would
/// be empty.
std::pair<Manifest, Manifest> SplitUnlabeled(const Manifest& m, double fraction, uint64_t seed);

/// Records whose speaker is (or is not) in the given fold.
Manifest SelectFold(const Manifest& m, const eval::FoldPlan& plan, int fold, bool in_fold);

}  // namespace pdspeech::data
