// include/pdspeech/baselines.hpp

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

// Classical baselines over pooled utterance vectors: sparse-representation
// classification (one joint dictionary, or one dictionary per class) and a
// primal linear SVM. A multinomial logistic probe is included for corpus
// calibration and representation probing.

#include <Eigen/Dense>
#include <vector>

#include "pdspeech/common.hpp"

namespace pdspeech::baseline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Column-wise affine standardization fitted on training rows.
struct Standardizer {
  VectorXd mean;
  VectorXd scale;  // zero deviations replaced by 1

  static Standardizer Fit(const MatrixXd& rows);
  VectorXd Apply(const VectorXd& x) const;
  MatrixXd ApplyRows(const MatrixXd& rows) const;
};

// ---------------------------------------------------------------------------
// L1-regularized least squares.

struct FistaOptions {
  double lambda = 1e-2;
  int max_iters = 20000;
  double tol = 1e-12;  // relative objective change
};

struct FistaResult {
  VectorXd coef;
  double objective = 0.0;
  int iterations = 0;
  int restarts = 0;
};

/// 0.5 * ||y - D c||^2 + lambda * ||c||_1.
double L1LsObjective(const MatrixXd& D, const VectorXd& y, const VectorXd& c, double lambda);

/// Largest eigenvalue of D^T D, i.e. the gradient Lipschitz constant.
double LipschitzConstant(const MatrixXd& D);

/// FISTA with step 1/L. Whenever an accelerated step would raise the
/// objective, momentum is reset and a plain proximal step is taken instead,
/// so the objective sequence is non-increasing.
FistaResult L1LsSolve(const MatrixXd& D, const VectorXd& y, const FistaOptions& opts);

// ---------------------------------------------------------------------------
// Sparse-representation classification.

enum class LsrcMode { kJoint, kPerClass };

struct Dictionary {
  MatrixXd atoms;           // dim x n, unit-norm columns
  std::vector<Label> tags;  // one per column
  LsrcMode mode = LsrcMode::kJoint;

  std::vector<int> ColumnsOf(Label l) const;
};

/// Columns are the exemplars scaled to unit norm. Throws Error("data") on a
/// zero exemplar or when a class has no exemplar.
Dictionary BuildDictionary(const std::vector<VectorXd>& exemplars, const std::vector<Label>& labels, LsrcMode mode);

struct LsrcResult {
  Label label = Label::kPD;
  double residual_pd = 0.0;
  double residual_hc = 0.0;
};

/// y is scaled to unit norm, then coded against the dictionary. Joint mode
/// solves once and measures each class's residual with only that class's
/// coefficients; per-class mode solves against each class dictionary. The
/// smaller residual wins; ties go to PD.
LsrcResult LsrcClassify(const Dictionary& dict, const VectorXd& y, const FistaOptions& opts);

// ---------------------------------------------------------------------------
// Linear SVM.

struct SvmModel {
  VectorXd w;
  double b = 0.0;
  double lambda = 1e-2;  // Pegasos regularizer
  double C = 0.0;        // equivalent 1 / (lambda * n)
  Standardizer standardizer;

  double Score(const VectorXd& x) const;
};

struct SvmTrace {
  std::vector<double> objective;  // after each epoch
};

/// Pegasos: per-sample subgradient steps with eta_t = 1 / (lambda t) and the
/// projection onto the ball of radius 1 / sqrt(lambda). The bias is a
/// constant input feature. The returned weights are the running mean of
/// all iterates. Labels map PD -> +1, HC -> -1.
SvmModel SvmTrain(const MatrixXd& rows, const std::vector<Label>& labels, double lambda, int epochs, uint64_t seed,
                  SvmTrace* trace = nullptr);

/// lambda / 2 * ||w||^2 + mean hinge loss on standardized rows.
double SvmObjective(const SvmModel& m, const MatrixXd& rows, const std::vector<Label>& labels);

/// w . x + b >= 0 -> PD.
Label SvmPredict(const SvmModel& m, const VectorXd& x);

// ---------------------------------------------------------------------------
// Multinomial logistic probe.

struct LinearProbe {
  MatrixXd W;  // dim x classes
  VectorXd b;
  Standardizer standardizer;

  int Predict(const VectorXd& x) const;
};

/// Full-batch gradient descent on mean cross-entropy plus l2 * ||W||^2 / 2.
LinearProbe TrainProbe(const MatrixXd& rows, const std::vector<int>& labels, int classes, double l2 = 1e-3,
                       int iters = 500, double step = 0.5);

double ProbeAccuracy(const LinearProbe& p, const MatrixXd& rows, const std::vector<int>& labels);

/// Log-spaced grid from lo to hi inclusive.
std::vector<double> LogGrid(double lo, double hi, int points);

}  // namespace pdspeech::baseline
