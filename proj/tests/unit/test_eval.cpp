// tests/unit/test_eval.cpp

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

#include "doctest.h"
#include "oracles.hpp"
#include "pdspeech/eval.hpp"
#include "test_util.hpp"

using namespace pdspeech;
using namespace pdspeech::eval;

namespace {

std::vector<SpeakerInfo> MakeSpeakers(int pd, int hc, Rng* rng = nullptr) {
  std::vector<SpeakerInfo> s;
  for (int i = 0; i < pd; ++i) s.push_back({"pd" + std::to_string(i), Label::kPD, rng ? 1 + int(rng->Below(9)) : 4});
  for (int i = 0; i < hc; ++i) s.push_back({"hc" + std::to_string(i), Label::kHC, rng ? 1 + int(rng->Below(9)) : 4});
  return s;
}

std::map<int, std::pair<int, int>> FoldCounts(const FoldPlan& p) {
  std::map<int, std::pair<int, int>> c;  // fold -> (pd, hc)
  for (const auto& [s, f] : p.speaker_fold) (s.rfind("pd", 0) == 0 ? c[f].first : c[f].second) += 1;
  return c;
}

}  // namespace

TEST_CASE("make_folds examples") {
  auto p = MakeFolds(MakeSpeakers(5, 5), 5, 1);
  for (const auto& [f, c] : FoldCounts(p)) {
    CHECK(c.first == 1);
    CHECK(c.second == 1);
  }
  p = MakeFolds(MakeSpeakers(50, 50), 5, 2);
  CHECK(FoldCounts(p).size() == 5);
  for (const auto& [f, c] : FoldCounts(p)) {
    CHECK(c.first == 10);
    CHECK(c.second == 10);
  }
  CHECK(testing::FoldPlanViolation(p, MakeSpeakers(50, 50)).empty());
}

TEST_CASE("make_folds invariants on random speaker sets") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.Below(5));
    const auto sp = MakeSpeakers(k + static_cast<int>(rng.Below(20)), k + static_cast<int>(rng.Below(20)), &rng);
    const auto plan = MakeFolds(sp, k, rng.NextU64());
    CHECK(testing::FoldPlanViolation(plan, sp) == "");
  }
}

TEST_CASE("make_folds is deterministic and validates input") {
  const auto sp = MakeSpeakers(12, 9);
  CHECK(MakeFolds(sp, 3, 7).speaker_fold == MakeFolds(sp, 3, 7).speaker_fold);
  CHECK_THROWS_AS(MakeFolds(MakeSpeakers(4, 9), 5, 1), Error);
  auto dup = sp;
  dup.push_back(sp[0]);
  CHECK_THROWS_AS(MakeFolds(dup, 3, 1), Error);
  const auto plan = MakeFolds(sp, 3, 7);
  CHECK(FoldPlan::FromJson(plan.ToJson()).speaker_fold == plan.speaker_fold);
  CHECK_THROWS_AS(plan.FoldOf("nobody"), Error);
}

TEST_CASE("confusion metric formulas") {
  Confusion c;
  c.tp = 9;
  c.fn = 1;
  c.tn = 8;
  c.fp = 2;
  const auto m = FromConfusion(c);
  CHECK(*m.sensitivity == doctest::Approx(0.9));
  CHECK(*m.specificity == doctest::Approx(0.8));
  CHECK(*m.ppv == doctest::Approx(9.0 / 11.0));
  CHECK(*m.accuracy == doctest::Approx(0.85));
  CHECK(*m.f1 == doctest::Approx(2 * (9.0 / 11.0) * 0.9 / ((9.0 / 11.0) + 0.9)));

  const std::vector<Label> t = {Label::kPD, Label::kHC, Label::kPD};
  const auto all = ComputeMetrics(t, t);
  for (auto v : {all.f1, all.accuracy, all.sensitivity, all.ppv, all.specificity}) CHECK(*v == 1.0);

  // All-HC truth and predictions: sensitivity and PPV have no denominator.
  const std::vector<Label> hc(4, Label::kHC);
  const auto none = ComputeMetrics(hc, hc);
  CHECK(!none.sensitivity.has_value());
  CHECK(!none.ppv.has_value());
  CHECK(*none.specificity == 1.0);
  CHECK_THROWS_AS(ComputeMetrics(t, hc), Error);

  // F1 is zero when TP = 0 with any error.
  CHECK(*ComputeMetrics({Label::kHC}, {Label::kPD}).f1 == 0.0);
}

TEST_CASE("confusion counts equal a brute-force counter") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 1 + rng.Below(60);
    std::vector<Label> p, t;
    for (size_t i = 0; i < n; ++i) {
      p.push_back(LabelFromIndex(static_cast<int>(rng.Below(2))));
      t.push_back(LabelFromIndex(static_cast<int>(rng.Below(2))));
    }
    const auto c = CountConfusion(p, t);
    const auto o = testing::BruteConfusion(p, t);
    CHECK(c.tp == o.tp);
    CHECK(c.fp == o.fp);
    CHECK(c.tn == o.tn);
    CHECK(c.fn == o.fn);
    const auto m = FromConfusion(c);
    for (auto v : {m.f1, m.accuracy, m.sensitivity, m.ppv, m.specificity})
      if (v) CHECK((*v >= 0.0 && *v <= 1.0));
  }
}

TEST_CASE("majority vote") {
  using L = Label;
  CHECK(MajorityVote({L::kPD, L::kPD, L::kHC}) == L::kPD);
  CHECK(MajorityVote({L::kPD, L::kHC}) == L::kPD);
  CHECK(MajorityVote({L::kHC, L::kHC, L::kHC, L::kHC}) == L::kHC);
  CHECK_THROWS_AS(MajorityVote({}), Error);
}

TEST_CASE("per-person vote equals a group-and-count oracle and ignores order") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PredictionRecord> preds;
    for (int s = 0; s < 8; ++s) {
      const Label truth = LabelFromIndex(s % 2);
      const int segs = 1 + static_cast<int>(rng.Below(6));
      for (int i = 0; i < segs; ++i)
        preds.push_back({"u" + std::to_string(s) + "_" + std::to_string(i), "s" + std::to_string(s), truth,
                         LabelFromIndex(static_cast<int>(rng.Below(2))), 0.5, 0});
    }
    const auto oracle = testing::GroupVoteOracle(preds);
    auto votes = VotePerPerson(preds);
    REQUIRE(votes.size() == oracle.size());
    for (const auto& v : votes) CHECK(v.predicted_label == oracle.at(v.speaker_id));
    rng.Shuffle(preds);
    const auto shuffled = VotePerPerson(preds);
    for (size_t i = 0; i < votes.size(); ++i) CHECK(shuffled[i].predicted_label == votes[i].predicted_label);
  }
  std::vector<PredictionRecord> bad = {{"a", "s", Label::kPD, Label::kPD, 1, 0}, {"b", "s", Label::kHC, Label::kPD, 1, 0}};
  CHECK_THROWS_AS(VotePerPerson(bad), Error);
}

TEST_CASE("aggregate_folds") {
  Metrics a, b;
  a.accuracy = 0.8;
  b.accuracy = 0.9;
  b.sensitivity = 0.5;
  const auto avg = AggregateFolds({a, b});
  CHECK(avg.mean.at("accuracy") == doctest::Approx(0.85));
  CHECK(avg.present.at("sensitivity") == 1);
  CHECK(avg.mean.at("sensitivity") == 0.5);
  CHECK(avg.mean.count("f1") == 0);
  CHECK(AggregateFolds({b}).mean.at("accuracy") == 0.9);

  Rng rng(6);
  std::vector<Metrics> reps;
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    Metrics m;
    m.f1 = rng.Uniform();
    sum += *m.f1;
    reps.push_back(m);
  }
  CHECK(std::abs(AggregateFolds(reps).mean.at("f1") - sum / 5.0) < 1e-12);
}

TEST_CASE("prediction files round trip") {
  testing::TempDir dir("eval");
  std::vector<PredictionRecord> preds = {{"u1", "s1", Label::kPD, Label::kHC, 0.25, 1},
                                         {"u2", "s2", Label::kHC, Label::kHC, 0.125, 0}};
  WritePredictions(dir / "p.jsonl", preds);
  const auto back = ReadPredictions(dir / "p.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].predicted_label == Label::kHC);
  CHECK(back[0].score == 0.25);
  CHECK(back[1].fold == 0);
  testing::WriteBytes(dir / "bad.jsonl", "{\"utterance_id\": 1}\n");
  CHECK_THROWS_AS(ReadPredictions(dir / "bad.jsonl"), Error);
  CHECK_THROWS_AS(ReadPredictions(dir / "missing.jsonl"), Error);
}

TEST_CASE("report structure and validation") {
  std::vector<PredictionRecord> preds;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 3; ++i)
      preds.push_back({"u" + std::to_string(s * 3 + i), "s" + std::to_string(s), LabelFromIndex(s % 2),
                       LabelFromIndex(i == 0 ? 1 - s % 2 : s % 2), 0.5, s / 2});
  const auto r = BuildReport(preds, 2, "abc", 9);
  CHECK(r["config_hash"] == "abc");
  CHECK(r["seed"] == 9);
  CHECK(r["per_fold"].size() == 2);
  CHECK(r["average"]["per_person"]["accuracy"].get<double>() == 1.0);
  CHECK(r["pooled"]["per_segment"]["accuracy"].get<double>() == doctest::Approx(8.0 / 12.0));
  CHECK_THROWS_AS(BuildReport(preds, 3, "abc", 9), Error);  // fold 2 empty
  preds[0].fold = 5;
  CHECK_THROWS_AS(BuildReport(preds, 2, "abc", 9), Error);
}
