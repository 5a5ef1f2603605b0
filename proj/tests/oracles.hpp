// tests/oracles.hpp

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

// Independent reference implementations shared by the unit and acceptance
// tests. Deliberately plain: no shortcuts taken from the library code.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdspeech/eval.hpp"

namespace pdspeech::testing {

/// Unaccelerated proximal gradient with a fixed step of 0.5 / L, run for a
/// fixed number of iterations. Returns the final objective.
inline double ProximalOracle(const Eigen::MatrixXd& D, const Eigen::VectorXd& y, double lambda, long iters,
                             Eigen::VectorXd* coef = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D.transpose() * D);
  const double step = 0.5 / es.eigenvalues().maxCoeff();
  const Eigen::MatrixXd gram = D.transpose() * D;
  const Eigen::VectorXd dty = D.transpose() * y;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(D.cols());
  for (long it = 0; it < iters; ++it) {
    const Eigen::VectorXd v = c - step * (gram * c - dty);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double a = std::abs(v[i]) - step * lambda;
      c[i] = a > 0 ? (v[i] > 0 ? a : -a) : 0.0;
    }
  }
  if (coef) *coef = c;
  return 0.5 * (y - D * c).squaredNorm() + lambda * c.lpNorm<1>();
}

struct BruteCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Counts confusion cells by comparing label names.
inline BruteCounts BruteConfusion(const std::vector<Label>& pred, const std::vector<Label>& truth) {
  BruteCounts c;
  for (size_t i = 0; i < pred.size(); ++i) {
    const std::string p = LabelName(pred[i]), t = LabelName(truth[i]);
    if (p == "PD" && t == "PD") ++c.tp;
    if (p == "PD" && t == "HC") ++c.fp;
    if (p == "HC" && t == "HC") ++c.tn;
    if (p == "HC" && t == "PD") ++c.fn;
  }
  return c;
}

/// Groups predictions by speaker and counts votes; ties go to PD.
inline std::map<std::string, Label> GroupVoteOracle(const std::vector<eval::PredictionRecord>& preds) {
  std::map<std::string, std::pair<int, int>> tally;  // pd, hc
  for (const auto& p : preds) {
    auto& t = tally[p.speaker_id];
    (p.predicted_label == Label::kPD ? t.first : t.second) += 1;
  }
  std::map<std::string, Label> out;
  for (const auto& [spk, t] : tally) out[spk] = t.first >= t.second ? Label::kPD : Label::kHC;
  return out;
}

/// Empty string when the plan is a speaker-disjoint, exhaustive and
/// class-stratified (within one speaker) partition of `speakers`.
inline std::string FoldPlanViolation(const eval::FoldPlan& plan, const std::vector<eval::SpeakerInfo>& speakers) {
  if (plan.speaker_fold.size() != speakers.size()) return "speaker count differs";
  std::vector<std::map<Label, int>> per_fold(static_cast<size_t>(plan.k));
  std::map<Label, int> total;
  std::set<std::string> seen;
  for (const auto& s : speakers) {
    if (!seen.insert(s.speaker_id).second) return "duplicate input speaker";
    auto it = plan.speaker_fold.find(s.speaker_id);
    if (it == plan.speaker_fold.end()) return "speaker missing: " + s.speaker_id;
    if (it->second < 0 || it->second >= plan.k) return "fold out of range";
    per_fold[static_cast<size_t>(it->second)][s.label] += 1;
    total[s.label] += 1;
  }
  for (const auto& [label, n] : total) {
    const double ideal = static_cast<double>(n) / plan.k;
    for (auto& f : per_fold)
      if (std::abs(f[label] - ideal) >= 1.0) return "class imbalance across folds";
  }
  return "";
}

}  // namespace pdspeech::testing
