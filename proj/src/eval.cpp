// src/eval.cpp

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

#include "pdspeech/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace pdspeech::eval {

int FoldPlan::FoldOf(const std::string& speaker) const {
  auto it = speaker_fold.find(speaker);
  if (it == speaker_fold.end()) throw Error("data", "speaker " + speaker + " is not in the fold plan");
  return it->second;
}

nlohmann::json FoldPlan::ToJson() const {
  nlohmann::json folds = nlohmann::json::object();
  for (const auto& [s, f] : speaker_fold) folds[s] = f;
  return {{"kind", "fold_plan"}, {"k", k}, {"seed", seed}, {"speaker_fold", folds}};
}

FoldPlan FoldPlan::FromJson(const nlohmann::json& j) {
  try {
    FoldPlan p;
    p.k = j.at("k").get<int>();
    p.seed = j.at("seed").get<uint64_t>();
    for (const auto& [s, f] : j.at("speaker_fold").items()) {
      const int fold = f.get<int>();
      if (fold < 0 || fold >= p.k) throw Error("format", "fold index out of range for speaker " + s);
      p.speaker_fold[s] = fold;
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", std::string("malformed fold plan: ") + e.what());
  }
}

FoldPlan MakeFolds(const std::vector<SpeakerInfo>& speakers, int k, uint64_t seed) {
  if (k < 2) throw Error("invalid_argument", "fold count must be >= 2");
  std::set<std::string> ids;
  int per_class[2] = {0, 0};
  for (const auto& s : speakers) {
    if (!ids.insert(s.speaker_id).second) throw Error("data", "speaker " + s.speaker_id + " listed twice");
    ++per_class[ClassIndex(s.label)];
  }
  for (int c = 0; c < 2; ++c)
    if (per_class[c] < k)
      throw Error("data", "class " + std::string(LabelName(LabelFromIndex(c))) + " has " +
                              std::to_string(per_class[c]) + " speakers, fewer than " + std::to_string(k) + " folds");

  std::vector<SpeakerInfo> order = speakers;
  Rng rng(seed);
  rng.Shuffle(order);
  std::stable_sort(order.begin(), order.end(), [](const SpeakerInfo& a, const SpeakerInfo& b) {
    if (a.label != b.label) return ClassIndex(a.label) < ClassIndex(b.label);
    return a.segments > b.segments;
  });

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  int next = 0;
  for (const auto& s : order) {
    plan.speaker_fold[s.speaker_id] = next;
    next = (next + 1) % k;
  }
  return plan;
}

Confusion CountConfusion(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
  if (predicted.size() != truth.size())
    throw Error("invalid_argument", "prediction count " + std::to_string(predicted.size()) +
                                        " differs from label count " + std::to_string(truth.size()));
  Confusion c;
  for (size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == Label::kPD;
    const bool t = truth[i] == Label::kPD;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

std::optional<double> Ratio(int64_t num, int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics FromConfusion(const Confusion& c) {
  Metrics m;
  m.counts = c;
  m.sensitivity = Ratio(c.tp, c.tp + c.fn);
  m.specificity = Ratio(c.tn, c.tn + c.fp);
  m.ppv = Ratio(c.tp, c.tp + c.fp);
  m.accuracy = Ratio(c.tp + c.tn, c.Total());
  m.f1 = Ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

Metrics ComputeMetrics(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
  return FromConfusion(CountConfusion(predicted, truth));
}

Label MajorityVote(const std::vector<Label>& votes) {
  if (votes.empty()) throw Error("invalid_argument", "majority vote over an empty group");
  const auto pd = std::count(votes.begin(), votes.end(), Label::kPD);
  return 2 * pd >= static_cast<std::ptrdiff_t>(votes.size()) ? Label::kPD : Label::kHC;
}

std::vector<PersonPrediction> VotePerPerson(const std::vector<PredictionRecord>& preds) {
  std::map<std::string, std::pair<Label, std::vector<Label>>> groups;
  for (const auto& p : preds) {
    auto [it, inserted] = groups.try_emplace(p.speaker_id, p.true_label, std::vector<Label>{});
    if (!inserted && it->second.first != p.true_label)
      throw Error("data", "speaker " + p.speaker_id + " has conflicting true labels");
    it->second.second.push_back(p.predicted_label);
  }
  std::vector<PersonPrediction> out;
  for (const auto& [id, g] : groups) out.push_back({id, g.first, MajorityVote(g.second)});
  return out;
}

namespace {

const char* const kMetricNames[] = {"f1", "accuracy", "sensitivity", "ppv", "specificity"};

std::optional<double> MetricByName(const Metrics& m, const std::string& name) {
  if (name == "f1") return m.f1;
  if (name == "accuracy") return m.accuracy;
  if (name == "sensitivity") return m.sensitivity;
  if (name == "ppv") return m.ppv;
  return m.specificity;
}

nlohmann::json OptionalJson(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

AveragedMetrics AggregateFolds(const std::vector<Metrics>& reports) {
  AveragedMetrics a;
  a.folds = static_cast<int>(reports.size());
  for (const char* name : kMetricNames) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : reports) {
      if (auto v = MetricByName(r, name)) {
        sum += *v;
        ++n;
      }
    }
    a.present[name] = n;
    if (n > 0) a.mean[name] = sum / n;
  }
  return a;
}

nlohmann::json MetricsJson(const Metrics& m) {
  nlohmann::json j = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}};
  for (const char* name : kMetricNames) j[name] = OptionalJson(MetricByName(m, name));
  return j;
}

nlohmann::json AveragedJson(const AveragedMetrics& a) {
  nlohmann::json j = {{"folds", a.folds}};
  nlohmann::json present = nlohmann::json::object();
  for (const char* name : kMetricNames) {
    auto it = a.mean.find(name);
    j[name] = it == a.mean.end() ? nlohmann::json() : nlohmann::json(it->second);
    present[name] = a.present.at(name);
  }
  j["folds_present"] = present;
  return j;
}

nlohmann::json PredictionJson(const PredictionRecord& p) {
  return {{"utterance_id", p.utterance_id}, {"speaker_id", p.speaker_id},
          {"true_label", LabelName(p.true_label)}, {"predicted_label", LabelName(p.predicted_label)},
          {"score", p.score}, {"fold", p.fold}};
}

PredictionRecord PredictionFromJson(const nlohmann::json& j) {
  try {
    PredictionRecord p;
    p.utterance_id = j.at("utterance_id").get<std::string>();
    p.speaker_id = j.at("speaker_id").get<std::string>();
    p.true_label = ParseLabel(j.at("true_label").get<std::string>());
    p.predicted_label = ParseLabel(j.at("predicted_label").get<std::string>());
    p.score = j.at("score").get<double>();
    p.fold = j.at("fold").get<int>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", std::string("malformed prediction record: ") + e.what());
  }
}

std::vector<PredictionRecord> ReadPredictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open prediction file " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("format", path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(PredictionFromJson(j));
  }
  return out;
}

void WritePredictions(const std::string& path, const std::vector<PredictionRecord>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write prediction file " + path);
  for (const auto& p : preds) out << PredictionJson(p).dump() << '\n';
  if (!out) throw Error("io", "short write on " + path);
}

namespace {

Metrics SegmentMetrics(const std::vector<PredictionRecord>& preds) {
  std::vector<Label> p, t;
  for (const auto& r : preds) {
    p.push_back(r.predicted_label);
    t.push_back(r.true_label);
  }
  return ComputeMetrics(p, t);
}

Metrics PersonMetrics(const std::vector<PredictionRecord>& preds) {
  std::vector<Label> p, t;
  for (const auto& v : VotePerPerson(preds)) {
    p.push_back(v.predicted_label);
    t.push_back(v.true_label);
  }
  return ComputeMetrics(p, t);
}

}  // namespace

nlohmann::json BuildReport(const std::vector<PredictionRecord>& preds, int k, const std::string& config_hash,
                           uint64_t seed) {
  if (k < 1) throw Error("invalid_argument", "fold count must be >= 1");
  std::vector<std::vector<PredictionRecord>> by_fold(static_cast<size_t>(k));
  std::map<std::string, int> speaker_fold;
  for (const auto& p : preds) {
    if (p.fold < 0 || p.fold >= k)
      throw Error("data", "prediction " + p.utterance_id + " has fold " + std::to_string(p.fold) + " outside [0, " +
                              std::to_string(k) + ")");
    auto [it, inserted] = speaker_fold.try_emplace(p.speaker_id, p.fold);
    if (!inserted && it->second != p.fold)
      throw Error("data", "speaker " + p.speaker_id + " appears in more than one fold");
    by_fold[static_cast<size_t>(p.fold)].push_back(p);
  }

  nlohmann::json per_fold = nlohmann::json::array();
  std::vector<Metrics> seg, person;
  for (int f = 0; f < k; ++f) {
    const auto& fp = by_fold[static_cast<size_t>(f)];
    if (fp.empty()) throw Error("data", "fold " + std::to_string(f) + " has no predictions");
    seg.push_back(SegmentMetrics(fp));
    person.push_back(PersonMetrics(fp));
    per_fold.push_back({{"fold", f}, {"per_segment", MetricsJson(seg.back())}, {"per_person", MetricsJson(person.back())}});
  }
  return {{"kind", "report"},
          {"config_hash", config_hash},
          {"seed", seed},
          {"folds", k},
          {"per_fold", per_fold},
          {"average", {{"per_segment", AveragedJson(AggregateFolds(seg))},
                       {"per_person", AveragedJson(AggregateFolds(person))}}},
          {"pooled", {{"per_segment", MetricsJson(SegmentMetrics(preds))},
                      {"per_person", MetricsJson(PersonMetrics(preds))}}}};
}

}  // namespace pdspeech::eval
