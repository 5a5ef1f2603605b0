// tests/unit/test_baselines.cpp

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
#include "pdspeech/baselines.hpp"

using namespace pdspeech;
using namespace pdspeech::baseline;

namespace {

MatrixXd RandomMatrix(int r, int c, Rng& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal();
  return m;
}

VectorXd RandomVector(int n, Rng& rng) { return RandomMatrix(n, 1, rng).col(0); }

}  // namespace

TEST_CASE("l1_ls_solve: exact-match recovery") {
  Rng rng(1);
  MatrixXd D = RandomMatrix(8, 16, rng);
  D.colwise().normalize();
  const VectorXd y = D.col(5);
  FistaOptions o;
  o.lambda = 1e-6;
  o.max_iters = 200000;
  const auto r = L1LsSolve(D, y, o);
  CHECK((y - D * r.coef).norm() < 1e-3);
  CHECK(std::abs(r.coef[5] - 1.0) < 1e-2);
}

TEST_CASE("l1_ls_solve: soft-threshold kill") {
  Rng rng(2);
  const MatrixXd D = RandomMatrix(8, 16, rng);
  const VectorXd y = RandomVector(8, rng);
  FistaOptions o;
  o.lambda = (D.transpose() * y).cwiseAbs().maxCoeff();
  const auto r = L1LsSolve(D, y, o);
  CHECK(r.coef.cwiseAbs().maxCoeff() == 0.0);
  o.lambda *= 3.0;
  CHECK(L1LsSolve(D, y, o).coef.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("l1_ls_solve: matches a long-run proximal oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd D = RandomMatrix(8, 16, rng);
    const VectorXd y = RandomVector(8, rng);
    FistaOptions o;
    o.lambda = 0.1;
    const auto r = L1LsSolve(D, y, o);
    const double oracle = testing::ProximalOracle(D, y, o.lambda, 200000);
    CHECK(std::abs(r.objective - oracle) < 1e-8);
    CHECK(r.objective <= 0.5 * y.squaredNorm());
  }
}

TEST_CASE("l1_ls_solve rejects bad input") {
  MatrixXd D = MatrixXd::Identity(3, 3);
  VectorXd y = VectorXd::Ones(3);
  CHECK_THROWS_AS(L1LsSolve(D, VectorXd::Ones(4), FistaOptions{}), Error);
  D(0, 0) = std::nan("");
  try {
    L1LsSolve(D, y, FistaOptions{});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == "numeric");
  }
}

TEST_CASE("dictionary columns are unit norm and both classes required") {
  Rng rng(4);
  std::vector<VectorXd> ex;
  std::vector<Label> lab;
  for (int i = 0; i < 6; ++i) {
    ex.push_back(RandomVector(5, rng) * (i + 1));
    lab.push_back(LabelFromIndex(i % 2));
  }
  const auto d = BuildDictionary(ex, lab, LsrcMode::kJoint);
  for (Eigen::Index c = 0; c < d.atoms.cols(); ++c) CHECK(std::abs(d.atoms.col(c).norm() - 1.0) < 1e-9);
  CHECK(d.ColumnsOf(Label::kPD).size() == 3);
  std::vector<Label> all_pd(6, Label::kPD);
  CHECK_THROWS_AS(BuildDictionary(ex, all_pd, LsrcMode::kJoint), Error);
  ex[2].setZero();
  CHECK_THROWS_AS(BuildDictionary(ex, lab, LsrcMode::kJoint), Error);
}

TEST_CASE("lsrc_classify examples") {
  Rng rng(5);
  std::vector<VectorXd> ex;
  std::vector<Label> lab;
  for (int i = 0; i < 8; ++i) {
    ex.push_back(RandomVector(10, rng));
    lab.push_back(LabelFromIndex(i % 2));
  }
  FistaOptions o;
  o.lambda = 1e-6;
  o.max_iters = 200000;
  for (auto mode : {LsrcMode::kJoint, LsrcMode::kPerClass}) {
    const auto d = BuildDictionary(ex, lab, mode);
    const auto r = LsrcClassify(d, ex[3] * 2.5, o);  // index 3 is PD
    CHECK(r.label == Label::kPD);
    CHECK(r.residual_pd < 1e-3);
  }

  // y orthogonal to every atom: both residuals are exactly |y| = 1.
  std::vector<VectorXd> ortho = {VectorXd::Unit(3, 1), VectorXd::Unit(3, 2)};
  const auto d = BuildDictionary(ortho, {Label::kHC, Label::kPD}, LsrcMode::kJoint);
  const auto tie = LsrcClassify(d, VectorXd::Unit(3, 0), FistaOptions{});
  CHECK(tie.residual_pd == tie.residual_hc);
  CHECK(tie.label == Label::kPD);
}

TEST_CASE("lsrc_classify agrees with oracle residuals on a 20-sample set") {
  Rng rng(6);
  std::vector<VectorXd> ex;
  std::vector<Label> lab;
  const VectorXd shift = RandomVector(6, rng);
  for (int i = 0; i < 20; ++i) {
    const Label l = LabelFromIndex(i % 2);
    ex.push_back(RandomVector(6, rng) + (l == Label::kPD ? shift : VectorXd(-shift)));
    lab.push_back(l);
  }
  FistaOptions o;
  o.lambda = 0.05;
  for (auto mode : {LsrcMode::kJoint, LsrcMode::kPerClass}) {
    const auto d = BuildDictionary(ex, lab, mode);
    for (int t = 0; t < 10; ++t) {
      const VectorXd y = RandomVector(6, rng) + (t % 2 ? shift : VectorXd(-shift));
      const VectorXd yn = y.normalized();
      auto cols = [&](Label l) {
        const auto idx = d.ColumnsOf(l);
        MatrixXd sub(6, static_cast<Eigen::Index>(idx.size()));
        for (size_t i = 0; i < idx.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = d.atoms.col(idx[i]);
        return std::make_pair(idx, sub);
      };
      double res_pd, res_hc;
      if (mode == LsrcMode::kJoint) {
        VectorXd c;
        testing::ProximalOracle(d.atoms, yn, o.lambda, 100000, &c);
        auto partial = [&](Label l) {
          VectorXd rec = VectorXd::Zero(6);
          for (int k : d.ColumnsOf(l)) rec += d.atoms.col(k) * c[k];
          return (yn - rec).norm();
        };
        res_pd = partial(Label::kPD);
        res_hc = partial(Label::kHC);
      } else {
        auto solve = [&](Label l) {
          const auto [idx, sub] = cols(l);
          VectorXd c;
          testing::ProximalOracle(sub, yn, o.lambda, 100000, &c);
          return (yn - sub * c).norm();
        };
        res_pd = solve(Label::kPD);
        res_hc = solve(Label::kHC);
      }
      const auto r = LsrcClassify(d, y, o);
      CHECK(std::abs(r.residual_pd - res_pd) < 1e-5);
      CHECK(std::abs(r.residual_hc - res_hc) < 1e-5);
      if (std::abs(res_pd - res_hc) > 1e-4) CHECK(r.label == (res_pd <= res_hc ? Label::kPD : Label::kHC));
    }
  }
}

TEST_CASE("per-class lsrc is invariant to positive rescaling of y") {
  Rng rng(7);
  std::vector<VectorXd> ex;
  std::vector<Label> lab;
  for (int i = 0; i < 10; ++i) {
    ex.push_back(RandomVector(6, rng));
    lab.push_back(LabelFromIndex(i % 2));
  }
  const auto d = BuildDictionary(ex, lab, LsrcMode::kPerClass);
  const VectorXd y = RandomVector(6, rng);
  const auto a = LsrcClassify(d, y, FistaOptions{});
  const auto b = LsrcClassify(d, y * 37.0, FistaOptions{});
  CHECK(a.label == b.label);
  CHECK(std::abs(a.residual_pd - b.residual_pd) < 1e-12);
  CHECK(std::abs(a.residual_hc - b.residual_hc) < 1e-12);
}

TEST_CASE("svm_predict sign rule") {
  SvmModel m;
  m.w = VectorXd::Unit(2, 0);
  m.b = 0.0;
  m.standardizer.mean = VectorXd::Zero(2);
  m.standardizer.scale = VectorXd::Ones(2);
  CHECK(SvmPredict(m, (VectorXd(2) << 3, -1).finished()) == Label::kPD);
  CHECK(SvmPredict(m, (VectorXd(2) << -3, 1).finished()) == Label::kHC);
  CHECK(SvmPredict(m, (VectorXd(2) << 0, 5).finished()) == Label::kPD);
  CHECK_THROWS_AS(SvmPredict(m, VectorXd::Zero(3)), Error);
}

namespace {

void Blobs(int n, double sep, Rng& rng, MatrixXd* rows, std::vector<Label>* labels) {
  rows->resize(n, 2);
  labels->clear();
  for (int i = 0; i < n; ++i) {
    const Label l = LabelFromIndex(i % 2);
    const double s = l == Label::kPD ? sep : -sep;
    (*rows)(i, 0) = s + 0.3 * rng.Normal();
    (*rows)(i, 1) = 0.5 * s + 0.3 * rng.Normal();
    labels->push_back(l);
  }
}

}  // namespace

TEST_CASE("svm_train separates blobs and is deterministic") {
  Rng rng(8);
  MatrixXd rows;
  std::vector<Label> labels;
  Blobs(60, 2.0, rng, &rows, &labels);
  const auto m = SvmTrain(rows, labels, 1e-3, 30, 9);
  int ok = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) ok += SvmPredict(m, rows.row(i).transpose()) == labels[i];
  CHECK(ok == 60);
  CHECK(std::abs(m.C - 1.0 / (1e-3 * 60)) < 1e-12);
  const auto m2 = SvmTrain(rows, labels, 1e-3, 30, 9);
  CHECK(m.w == m2.w);
  CHECK(m.b == m2.b);
}

TEST_CASE("svm objective decreases in most epochs") {
  Rng rng(10);
  MatrixXd rows;
  std::vector<Label> labels;
  Blobs(100, 0.4, rng, &rows, &labels);
  SvmTrace trace;
  const auto m = SvmTrain(rows, labels, 1e-2, 50, 11, &trace);
  REQUIRE(trace.objective.size() == 50);
  int dec = 0;
  for (size_t e = 1; e < trace.objective.size(); ++e) dec += trace.objective[e] <= trace.objective[e - 1] + 1e-12;
  // Pegasos is a stochastic method; the trace flattens once it converges.
  CHECK(static_cast<double>(dec) / 49.0 >= 0.9 - 1e-12);
  CHECK(std::abs(SvmObjective(m, rows, labels) - trace.objective.back()) < 1e-9);
}

TEST_CASE("svm_train rejects a single class") {
  MatrixXd rows = MatrixXd::Ones(4, 2);
  std::vector<Label> pd(4, Label::kPD);
  CHECK_THROWS_AS(SvmTrain(rows, pd, 1e-2, 5, 1), Error);
}

TEST_CASE("standardizer uses training statistics only") {
  MatrixXd rows(3, 2);
  rows << 1, 5, 2, 5, 3, 5;
  const auto s = Standardizer::Fit(rows);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.scale[1] == 1.0);
  CHECK(s.Apply((VectorXd(2) << 2, 7).finished())[1] == doctest::Approx(2.0));
}

TEST_CASE("linear probe learns a separable problem") {
  Rng rng(12);
  MatrixXd rows(90, 3);
  std::vector<int> y;
  for (int i = 0; i < 90; ++i) {
    y.push_back(i % 3);
    for (int c = 0; c < 3; ++c) rows(i, c) = (c == i % 3 ? 3.0 : 0.0) + 0.3 * rng.Normal();
  }
  const auto p = TrainProbe(rows, y, 3);
  CHECK(ProbeAccuracy(p, rows, y) == 1.0);
}

TEST_CASE("log grid") {
  const auto g = LogGrid(1e-4, 1.0, 5);
  REQUIRE(g.size() == 5);
  CHECK(g[0] == doctest::Approx(1e-4));
  CHECK(g[2] == doctest::Approx(1e-2));
  CHECK(g[4] == doctest::Approx(1.0));
  CHECK(LogGrid(0.5, 0.5, 1) == std::vector<double>{0.5});
  CHECK_THROWS_AS(LogGrid(0.0, 1.0, 3), Error);
}
