// include/pdspeech/nn/gradcheck.hpp

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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "pdspeech/nn/tensor.hpp"

namespace pdspeech::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<param name>[index]" or "input[index]"
  size_t checked = 0;
};

/// Relative error with a small absolute floor so entries whose true gradient
/// is ~0 are judged on absolute error instead.
inline double RelativeError(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients of `block` against central finite differences
/// of the scalar probe L = sum(R .* Forward(x)), with R a fixed random
/// matrix. Every parameter entry and every input entry is checked.
template <typename Block>
GradCheckResult GradCheck(Block& block, const Matrix<double>& input, double eps = 1e-4, uint64_t seed = 7,
                          double floor = 1e-6) {
  using M = Matrix<double>;
  typename Block::Cache cache;
  const M y = block.Forward(input, &cache);
  Rng rng(seed);
  M probe(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe.data()[i] = rng.Uniform(-1.0, 1.0);

  ParamStore<double> store;
  block.Collect("block", store);
  store.ZeroGrad();
  const M dx = block.Backward(cache, probe);

  auto loss_at = [&](const M& x) { return block.Forward(x, nullptr).cwiseProduct(probe).sum(); };

  GradCheckResult result;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double err = RelativeError(analytic, numeric, floor);
    ++result.checked;
    if (err > result.max_rel_error || result.worst.empty()) {
      result.max_rel_error = std::max(err, result.max_rel_error);
      result.worst = where;
    }
  };

  for (const auto& e : store.entries()) {
    Param<double>& p = *e.param;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + eps;
      const double up = loss_at(input);
      p.value.data()[i] = orig - eps;
      const double down = loss_at(input);
      p.value.data()[i] = orig;
      record(p.grad.data()[i], (up - down) / (2 * eps), e.name + "[" + std::to_string(i) + "]");
    }
  }

  M x = input;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + eps;
    const double up = loss_at(x);
    x.data()[i] = orig - eps;
    const double down = loss_at(x);
    x.data()[i] = orig;
    record(dx.data()[i], (up - down) / (2 * eps), "input[" + std::to_string(i) + "]");
  }
  return result;
}

}  // namespace pdspeech::nn
