// src/manifest.cpp

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

#include "pdspeech/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace pdspeech::data {

namespace fs = std::filesystem;

std::string Manifest::Resolve(const UtteranceRecord& r) const {
  const fs::path p(r.path);
  return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).string();
}

void Manifest::Validate() const {
  std::set<std::string> ids;
  std::map<std::string, std::pair<std::optional<Label>, int>> speakers;
  for (const auto& r : records) {
    if (r.utterance_id.empty() || r.speaker_id.empty()) throw Error("data", "record with empty id");
    if (!ids.insert(r.utterance_id).second) throw Error("data", "duplicate utterance id " + r.utterance_id);
    if (r.domain < 0) throw Error("data", "negative domain id on " + r.utterance_id);
    auto [it, inserted] = speakers.try_emplace(r.speaker_id, r.label, r.domain);
    if (!inserted && (it->second.first != r.label || it->second.second != r.domain))
      throw Error("data", "speaker " + r.speaker_id + " has records with different labels or domains");
  }
}

bool Manifest::AllLabeled() const {
  for (const auto& r : records)
    if (!r.label) return false;
  return true;
}

nlohmann::json RecordJson(const UtteranceRecord& r) {
  return {{"utterance_id", r.utterance_id}, {"path", r.path},     {"speaker_id", r.speaker_id},
          {"label", r.label ? LabelName(*r.label) : "none"},      {"domain", r.domain},
          {"duration", r.duration}};
}

UtteranceRecord RecordFromJson(const nlohmann::json& j) {
  try {
    UtteranceRecord r;
    r.utterance_id = j.at("utterance_id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.speaker_id = j.at("speaker_id").get<std::string>();
    const std::string label = j.at("label").get<std::string>();
    if (label != "none") r.label = ParseLabel(label);
    r.domain = j.at("domain").get<int>();
    r.duration = j.at("duration").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", std::string("malformed manifest record: ") + e.what());
  }
}

Manifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open manifest " + path);
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  if (m.base_dir.empty()) m.base_dir = ".";
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(RecordFromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("format", path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  m.Validate();
  return m;
}

void WriteManifest(const std::string& path, const Manifest& m) {
  m.Validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write manifest " + path);
  for (const auto& r : m.records) out << RecordJson(r).dump() << '\n';
  if (!out) throw Error("io", "short write on " + path);
}

std::vector<eval::SpeakerInfo> Speakers(const Manifest& m) {
  std::vector<eval::SpeakerInfo> out;
  std::map<std::string, size_t> pos;
  for (const auto& r : m.records) {
    if (!r.label) throw Error("data", "unlabeled record " + r.utterance_id + " where labels are required");
    auto [it, inserted] = pos.try_emplace(r.speaker_id, out.size());
    if (inserted) out.push_back({r.speaker_id, *r.label, 0});
    ++out[it->second].segments;
  }
  return out;
}

std::pair<Manifest, Manifest> SplitUnlabeled(const Manifest& m, double fraction, uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw Error("invalid_argument", "unlabeled fraction must lie in (0, 1)");
  // Cells keyed by (domain, label) in a fixed order; speakers in first-seen order.
  std::map<std::pair<int, int>, std::vector<std::string>> cells;
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    if (!seen.insert(r.speaker_id).second) continue;
    cells[{r.domain, r.label ? ClassIndex(*r.label) : -1}].push_back(r.speaker_id);
  }
  Rng rng(seed);
  for (auto& [key, list] : cells) rng.Shuffle(list);
  std::vector<std::string> interleaved;
  for (size_t i = 0;; ++i) {
    bool any = false;
    for (auto& [key, list] : cells) {
      if (i < list.size()) {
        interleaved.push_back(list[i]);
        any = true;
      }
    }
    if (!any) break;
  }
  const size_t take = static_cast<size_t>(std::llround(fraction * static_cast<double>(interleaved.size())));
  if (take == 0 || take == interleaved.size())
    throw Error("data", "unlabeled fraction leaves one side of the split without speakers");
  const std::set<std::string> unlabeled(interleaved.begin(), interleaved.begin() + static_cast<std::ptrdiff_t>(take));

  Manifest un, lab;
  un.base_dir = lab.base_dir = m.base_dir;
  bool has[2] = {false, false};
  for (const auto& r : m.records) {
    if (unlabeled.count(r.speaker_id)) {
      UtteranceRecord e = r;
      e.label.reset();
      un.records.push_back(e);
    } else {
      lab.records.push_back(r);
      if (r.label) has[ClassIndex(*r.label)] = true;
    }
  }
  if (!has[0] || !has[1]) throw Error("data", "unlabeled fraction leaves a class empty on the labeled side");
  return {un, lab};
}

Manifest SelectFold(const Manifest& m, const eval::FoldPlan& plan, int fold, bool in_fold) {
  Manifest out;
  out.base_dir = m.base_dir;
  for (const auto& r : m.records)
    if ((plan.FoldOf(r.speaker_id) == fold) == in_fold) out.records.push_back(r);
  return out;
}

}  // namespace pdspeech::data
