// include/pdspeech/nn/optim.hpp

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
#include <cstdint>

#include "pdspeech/nn/tensor.hpp"

namespace pdspeech::nn {

/// Optimization settings. Defaults follow the published fine-tuning recipe;
/// desk-scale runs override learning_rate and epochs.
struct TrainConfig {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  int epochs = 40;
  int batch_size = 128;
  double max_grad_norm = 1.0;
  double layerdrop = 0.1;
  double warmup_fraction = 0.1;
  uint64_t seed = 0;

  void Validate() const;
};

/// Linear warmup to cfg.learning_rate over the first warmup_fraction of the
/// steps, then linear decay to zero at total_steps.
double LearningRateAt(int64_t step, int64_t total_steps, const TrainConfig& cfg);

/// One decoupled-weight-decay Adam update on every entry of `store`.
/// `step` is 1-based and drives bias correction. Throws Error("numeric") on a
/// non-finite gradient, before any parameter is touched.
template <typename S>
void AdamWStep(ParamStore<S>& store, const TrainConfig& cfg, double lr, int64_t step);

/// Rescales all gradients in `store` so their global L2 norm is at most
/// max_norm. Returns the norm observed before clipping.
template <typename S>
double ClipGradNorm(ParamStore<S>& store, double max_norm);

// ---------------------------------------------------------------------------

inline void TrainConfig::Validate() const {
  if (!(learning_rate > 0)) throw Error("config", "learning_rate must be > 0");
  if (!(layerdrop >= 0 && layerdrop < 1)) throw Error("config", "layerdrop must be in [0, 1)");
  if (!(max_grad_norm > 0)) throw Error("config", "max_grad_norm must be > 0");
  if (epochs < 0) throw Error("config", "epochs must be >= 0");
  if (batch_size < 1) throw Error("config", "batch_size must be >= 1");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw Error("config", "warmup_fraction must be in [0, 1)");
  if (!(weight_decay >= 0)) throw Error("config", "weight_decay must be >= 0");
}

inline double LearningRateAt(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps <= 0) return 0.0;
  step = std::clamp<int64_t>(step, 0, total_steps);
  const auto warmup = static_cast<int64_t>(cfg.warmup_fraction * static_cast<double>(total_steps));
  if (step < warmup) return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps == warmup) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

template <typename S>
void AdamWStep(ParamStore<S>& store, const TrainConfig& cfg, double lr, int64_t step) {
  if (step < 1) throw Error("invalid_argument", "AdamW step counter must start at 1");
  for (const auto& e : store.entries())
    if (!e.param->grad.allFinite()) throw Error("numeric", "non-finite gradient in parameter '" + e.name + "'");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S decay = static_cast<S>(1.0 - lr * cfg.weight_decay);
  for (const auto& e : store.entries()) {
    Param<S>& p = *e.param;
    p.m = b1 * p.m + (S(1) - b1) * p.grad;
    p.v = b2 * p.v + (S(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value *= decay;
    const S step_size = static_cast<S>(lr / bc1);
    const S denom_scale = static_cast<S>(1.0 / std::sqrt(bc2));
    p.value.array() -= step_size * p.m.array() / (p.v.array().sqrt() * denom_scale + static_cast<S>(cfg.adam_eps));
  }
}

template <typename S>
double ClipGradNorm(ParamStore<S>& store, double max_norm) {
  const double norm = store.GradNorm();
  if (norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (const auto& e : store.entries()) e.param->grad *= scale;
  }
  return norm;
}

}  // namespace pdspeech::nn
