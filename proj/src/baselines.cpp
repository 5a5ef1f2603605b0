// src/baselines.cpp

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

#include "pdspeech/baselines.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>

namespace pdspeech::baseline {

Standardizer Standardizer::Fit(const MatrixXd& rows) {
  if (rows.rows() < 1) throw Error("data", "standardizer fitted on zero rows");
  Standardizer s;
  s.mean = rows.colwise().mean().transpose();
  s.scale.resize(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - s.mean[j]).square().mean();
    s.scale[j] = var > 0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

VectorXd Standardizer::Apply(const VectorXd& x) const {
  if (x.size() != mean.size()) throw Error("shape", "standardizer dimension mismatch");
  return (x - mean).cwiseQuotient(scale);
}

MatrixXd Standardizer::ApplyRows(const MatrixXd& rows) const {
  if (rows.cols() != mean.size()) throw Error("shape", "standardizer dimension mismatch");
  return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

namespace {

void CheckFinite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error("numeric", std::string(what) + " contains non-finite values");
}

VectorXd SoftThreshold(const VectorXd& v, double t) {
  return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

}  // namespace

double L1LsObjective(const MatrixXd& D, const VectorXd& y, const VectorXd& c, double lambda) {
  return 0.5 * (y - D * c).squaredNorm() + lambda * c.lpNorm<1>();
}

double LipschitzConstant(const MatrixXd& D) {
  const MatrixXd gram = D.rows() <= D.cols() ? MatrixXd(D * D.transpose()) : MatrixXd(D.transpose() * D);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

FistaResult L1LsSolve(const MatrixXd& D, const VectorXd& y, const FistaOptions& opts) {
  if (y.size() != D.rows()) throw Error("shape", "signal dimension does not match dictionary rows");
  if (!(opts.lambda >= 0)) throw Error("invalid_argument", "L1 weight must be >= 0");
  CheckFinite(D, "dictionary");
  CheckFinite(y, "signal");

  FistaResult res;
  res.coef = VectorXd::Zero(D.cols());
  res.objective = L1LsObjective(D, y, res.coef, opts.lambda);
  const double L = LipschitzConstant(D);
  if (L <= 0) return res;
  const MatrixXd Dt = D.transpose();
  const double thresh = opts.lambda / L;

  auto prox_step = [&](const VectorXd& from) { return SoftThreshold(from - Dt * (D * from - y) / L, thresh); };

  VectorXd x = res.coef;
  VectorXd z = x;
  double t = 1.0;
  double f = res.objective;
  for (int it = 1; it <= opts.max_iters; ++it) {
    VectorXd x_new = prox_step(z);
    double f_new = L1LsObjective(D, y, x_new, opts.lambda);
    if (f_new > f) {
      ++res.restarts;
      t = 1.0;
      x_new = prox_step(x);
      f_new = L1LsObjective(D, y, x_new, opts.lambda);
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = x_new + ((t - 1.0) / t_new) * (x_new - x);
    const double change = f - f_new;
    x = std::move(x_new);
    f = f_new;
    t = t_new;
    res.iterations = it;
    if (change <= opts.tol * std::max(f, 1e-300)) break;
  }
  res.coef = std::move(x);
  res.objective = f;
  return res;
}

std::vector<int> Dictionary::ColumnsOf(Label l) const {
  std::vector<int> cols;
  for (size_t i = 0; i < tags.size(); ++i)
    if (tags[i] == l) cols.push_back(static_cast<int>(i));
  return cols;
}

Dictionary BuildDictionary(const std::vector<VectorXd>& exemplars, const std::vector<Label>& labels, LsrcMode mode) {
  if (exemplars.size() != labels.size()) throw Error("invalid_argument", "exemplar and label counts differ");
  if (exemplars.empty()) throw Error("data", "dictionary without exemplars");
  Dictionary d;
  d.mode = mode;
  d.tags = labels;
  d.atoms.resize(exemplars[0].size(), static_cast<Eigen::Index>(exemplars.size()));
  for (size_t i = 0; i < exemplars.size(); ++i) {
    if (exemplars[i].size() != d.atoms.rows()) throw Error("shape", "exemplars differ in dimension");
    const double n = exemplars[i].norm();
    if (!(n > 0) || !std::isfinite(n)) throw Error("data", "exemplar " + std::to_string(i) + " has zero or non-finite norm");
    d.atoms.col(static_cast<Eigen::Index>(i)) = exemplars[i] / n;
  }
  if (d.ColumnsOf(Label::kPD).empty() || d.ColumnsOf(Label::kHC).empty())
    throw Error("data", "dictionary needs exemplars of both classes");
  return d;
}

namespace {

MatrixXd SubDictionary(const Dictionary& d, const std::vector<int>& cols) {
  MatrixXd sub(d.atoms.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = d.atoms.col(cols[i]);
  return sub;
}

}  // namespace

LsrcResult LsrcClassify(const Dictionary& dict, const VectorXd& y_raw, const FistaOptions& opts) {
  if (y_raw.size() != dict.atoms.rows()) throw Error("shape", "test vector dimension does not match dictionary");
  const double n = y_raw.norm();
  const VectorXd y = n > 0 ? VectorXd(y_raw / n) : y_raw;
  const auto pd_cols = dict.ColumnsOf(Label::kPD);
  const auto hc_cols = dict.ColumnsOf(Label::kHC);
  if (pd_cols.empty() || hc_cols.empty()) throw Error("data", "dictionary has an empty class");

  LsrcResult r;
  if (dict.mode == LsrcMode::kJoint) {
    const FistaResult sol = L1LsSolve(dict.atoms, y, opts);
    auto residual = [&](const std::vector<int>& cols) {
      VectorXd recon = VectorXd::Zero(y.size());
      for (int c : cols) recon += dict.atoms.col(c) * sol.coef[c];
      return (y - recon).norm();
    };
    r.residual_pd = residual(pd_cols);
    r.residual_hc = residual(hc_cols);
  } else {
    auto residual = [&](const std::vector<int>& cols) {
      const MatrixXd sub = SubDictionary(dict, cols);
      return (y - sub * L1LsSolve(sub, y, opts).coef).norm();
    };
    r.residual_pd = residual(pd_cols);
    r.residual_hc = residual(hc_cols);
  }
  r.label = r.residual_pd <= r.residual_hc ? Label::kPD : Label::kHC;
  return r;
}

double SvmModel::Score(const VectorXd& x) const { return w.dot(standardizer.Apply(x)) + b; }

namespace {

double Sign(Label l) { return l == Label::kPD ? 1.0 : -1.0; }

}  // namespace

SvmModel SvmTrain(const MatrixXd& rows, const std::vector<Label>& labels, double lambda, int epochs, uint64_t seed,
                  SvmTrace* trace) {
  if (static_cast<size_t>(rows.rows()) != labels.size()) throw Error("invalid_argument", "row and label counts differ");
  if (!(lambda > 0)) throw Error("invalid_argument", "SVM regularizer must be > 0");
  if (epochs < 1) throw Error("invalid_argument", "SVM epochs must be >= 1");
  bool has_pd = false, has_hc = false;
  for (Label l : labels) (l == Label::kPD ? has_pd : has_hc) = true;
  if (!has_pd || !has_hc) throw Error("data", "SVM training set contains a single class");
  CheckFinite(rows, "SVM input");

  SvmModel m;
  m.lambda = lambda;
  m.C = 1.0 / (lambda * static_cast<double>(rows.rows()));
  m.standardizer = Standardizer::Fit(rows);
  const MatrixXd X = m.standardizer.ApplyRows(rows);
  const Eigen::Index dim = X.cols();

  VectorXd w = VectorXd::Zero(dim + 1);  // last entry is the bias weight
  VectorXd avg = w;                      // running mean of the iterates
  const double radius = 1.0 / std::sqrt(lambda);
  Rng rng(seed);
  std::vector<size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  int64_t t = 0;
  for (int e = 0; e < epochs; ++e) {
    rng.Shuffle(order);
    for (size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double y = Sign(labels[i]);
      const double margin = y * (X.row(static_cast<Eigen::Index>(i)).dot(w.head(dim)) + w[dim]);
      w *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        w.head(dim) += eta * y * X.row(static_cast<Eigen::Index>(i)).transpose();
        w[dim] += eta * y;
      }
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      const double rho = 1.0 / static_cast<double>(t);
      avg = (1.0 - rho) * avg + rho * w;
    }
    if (trace) {
      m.w = avg.head(dim);
      m.b = avg[dim];
      trace->objective.push_back(SvmObjective(m, rows, labels));
    }
  }
  m.w = avg.head(dim);
  m.b = avg[dim];
  return m;
}

double SvmObjective(const SvmModel& m, const MatrixXd& rows, const std::vector<Label>& labels) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    hinge += std::max(0.0, 1.0 - Sign(labels[static_cast<size_t>(i)]) * m.Score(rows.row(i).transpose()));
  return 0.5 * m.lambda * (m.w.squaredNorm() + m.b * m.b) + hinge / static_cast<double>(rows.rows());
}

Label SvmPredict(const SvmModel& m, const VectorXd& x) {
  if (x.size() != m.w.size()) throw Error("shape", "SVM input dimension mismatch");
  return m.Score(x) >= 0.0 ? Label::kPD : Label::kHC;
}

int LinearProbe::Predict(const VectorXd& x) const {
  const VectorXd logits = W.transpose() * standardizer.Apply(x) + b;
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

LinearProbe TrainProbe(const MatrixXd& rows, const std::vector<int>& labels, int classes, double l2, int iters,
                       double step) {
  if (static_cast<size_t>(rows.rows()) != labels.size()) throw Error("invalid_argument", "row and label counts differ");
  if (classes < 2) throw Error("invalid_argument", "probe needs at least two classes");
  for (int y : labels)
    if (y < 0 || y >= classes) throw Error("invalid_argument", "probe label out of range");
  CheckFinite(rows, "probe input");
  LinearProbe p;
  p.standardizer = Standardizer::Fit(rows);
  const MatrixXd X = p.standardizer.ApplyRows(rows);
  const double n = static_cast<double>(X.rows());
  p.W = MatrixXd::Zero(X.cols(), classes);
  p.b = VectorXd::Zero(classes);
  MatrixXd onehot = MatrixXd::Zero(X.rows(), classes);
  for (size_t i = 0; i < labels.size(); ++i) onehot(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  for (int it = 0; it < iters; ++it) {
    MatrixXd logits = (X * p.W).rowwise() + p.b.transpose();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    const MatrixXd g = (logits - onehot) / n;
    p.W -= step * (X.transpose() * g + l2 * p.W);
    p.b -= step * g.colwise().sum().transpose();
  }
  return p;
}

double ProbeAccuracy(const LinearProbe& p, const MatrixXd& rows, const std::vector<int>& labels) {
  if (labels.empty()) throw Error("invalid_argument", "probe accuracy over an empty set");
  size_t correct = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    if (p.Predict(rows.row(i).transpose()) == labels[static_cast<size_t>(i)]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<double> LogGrid(double lo, double hi, int points) {
  if (!(lo > 0) || !(hi >= lo) || points < 1) throw Error("invalid_argument", "bad log grid");
  std::vector<double> g;
  for (int i = 0; i < points; ++i)
    g.push_back(points == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1)));
  return g;
}

}  // namespace pdspeech::baseline
