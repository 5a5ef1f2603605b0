// include/pdspeech/nn/tensor.hpp

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

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "pdspeech/common.hpp"

namespace pdspeech::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

enum class Mode { kTrain, kEval };

/// A trainable tensor together with its gradient accumulator and AdamW
/// moment estimates.
template <typename S>
struct Param {
  Matrix<S> value;
  Matrix<S> grad;
  Matrix<S> m;
  Matrix<S> v;

  void Resize(Eigen::Index rows, Eigen::Index cols) {
    value = Matrix<S>::Zero(rows, cols);
    grad = Matrix<S>::Zero(rows, cols);
    m = Matrix<S>::Zero(rows, cols);
    v = Matrix<S>::Zero(rows, cols);
  }

  void ZeroGrad() { grad.setZero(); }
  void ResetMoments() {
    m.setZero();
    v.setZero();
  }

  /// Uniform(-bound, bound) initialization.
  void InitUniform(Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<S>(rng.Uniform(-bound, bound));
  }

  template <typename T>
  void CopyValueFrom(const Param<T>& other) {
    value = other.value.template cast<S>();
    grad = Matrix<S>::Zero(value.rows(), value.cols());
    m = other.m.template cast<S>();
    v = other.v.template cast<S>();
  }
};

template <typename S>
struct NamedParam {
  std::string name;
  Param<S>* param;
};

/// Non-owning, ordered registry of named parameters. Models rebuild it on
/// demand through their Collect() methods, so copies of a model never share
/// entries.
template <typename S>
class ParamStore {
 public:
  void Add(std::string name, Param<S>& p) { entries_.push_back({std::move(name), &p}); }

  const std::vector<NamedParam<S>>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  void ZeroGrad() {
    for (auto& e : entries_) e.param->ZeroGrad();
  }

  double GradNorm() const {
    double acc = 0.0;
    for (const auto& e : entries_) acc += e.param->grad.template cast<double>().squaredNorm();
    return std::sqrt(acc);
  }

  size_t NumScalars() const {
    size_t n = 0;
    for (const auto& e : entries_) n += static_cast<size_t>(e.param->value.size());
    return n;
  }

  Param<S>* Find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.param;
    return nullptr;
  }

  void Append(const ParamStore& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  }

 private:
  std::vector<NamedParam<S>> entries_;
};

}  // namespace pdspeech::nn
