// include/pdspeech/heads.hpp

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

// Classification heads on top of the encoder and the domain-adversarial
// fine-tuning loop.
//
// Both heads share one shape: a frame-level linear map, mean-pooling over
// the non-padded frames, then a linear classifier. The domain head sits
// behind a gradient reversal layer, so while it learns to tell corpora
// apart, the encoder receives -lambda times its gradient and is pushed
// toward domain-invariant features.

#include <functional>
#include <string>
#include <vector>

#include "pdspeech/encoder.hpp"

namespace pdspeech::model {

struct HeadConfig {
  int hidden_dim = 256;
  int num_domains = 4;

  nlohmann::json ToJson() const { return {{"hidden_dim", hidden_dim}, {"num_domains", num_domains}}; }
  static HeadConfig FromJson(const nlohmann::json& j);
};

struct GrlConfig {
  double lambda = 0.1;

  void Validate() const {
    if (!(lambda >= 0)) throw Error("config", "grl.lambda must be >= 0");
  }
};

/// linear(d -> hidden) per frame, mean-pool over valid frames, linear(hidden -> classes).
template <typename S>
class PoolingHead {
 public:
  nn::Linear<S> frame_proj;
  nn::Linear<S> classifier;

  struct Cache {
    typename nn::Linear<S>::Cache proj_cache;
    typename nn::MeanPool<S>::Cache pool_cache;
    typename nn::Linear<S>::Cache cls_cache;
  };

  PoolingHead() = default;
  PoolingHead(int in_dim, int hidden_dim, int classes) : frame_proj(in_dim, hidden_dim), classifier(hidden_dim, classes) {}

  void Init(Rng& rng) {
    frame_proj.Init(rng);
    classifier.Init(rng);
  }

  /// Frames at index >= valid_frames are padding; -1 means none.
  Matrix<S> Forward(const Matrix<S>& hidden, Cache* cache, Eigen::Index valid_frames = -1) const {
    nn::MeanPool<S> pool;
    pool.valid = valid_frames;
    Matrix<S> h = frame_proj.Forward(hidden, cache ? &cache->proj_cache : nullptr);
    h = pool.Forward(h, cache ? &cache->pool_cache : nullptr);
    return classifier.Forward(h, cache ? &cache->cls_cache : nullptr);
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    Matrix<S> g = classifier.Backward(cache.cls_cache, dy);
    g = nn::MeanPool<S>{}.Backward(cache.pool_cache, g);
    return frame_proj.Backward(cache.proj_cache, g);
  }

  void Collect(const std::string& prefix, nn::ParamStore<S>& store) {
    frame_proj.Collect(prefix + ".frame_proj", store);
    classifier.Collect(prefix + ".classifier", store);
  }
};

template <typename S>
struct HeadParams {
  HeadConfig config;
  PoolingHead<S> pd;      // 2 outputs: HC, PD
  PoolingHead<S> domain;  // num_domains outputs

  HeadParams() = default;
  HeadParams(int model_dim, const HeadConfig& cfg)
      : config(cfg), pd(model_dim, cfg.hidden_dim, 2), domain(model_dim, cfg.hidden_dim, cfg.num_domains) {}

  /// PD and domain heads draw from separate streams so adding the domain
  /// head never perturbs the PD head's initialization.
  void Init(uint64_t seed) {
    Rng pd_rng(DeriveSeed(seed, 1));
    Rng dom_rng(DeriveSeed(seed, 2));
    pd.Init(pd_rng);
    domain.Init(dom_rng);
  }
};

/// Forward identity. Returned for symmetry with GrlBackward.
template <typename S>
Matrix<S> GrlForward(const Matrix<S>& hidden) {
  return hidden;
}

/// -lambda * upstream.
template <typename S>
Matrix<S> GrlBackward(const Matrix<S>& upstream, const GrlConfig& cfg) {
  return upstream * static_cast<S>(-cfg.lambda);
}

/// 1 x 2 PD logits for one utterance. `valid_frames` < 0 means no padding.
template <typename S>
Matrix<S> PdForward(const HeadParams<S>& heads, const Matrix<S>& hidden, Eigen::Index valid_frames = -1,
                    typename PoolingHead<S>::Cache* cache = nullptr);

/// 1 x num_domains domain logits; the GRL only matters on the way back.
template <typename S>
Matrix<S> DomainForward(const HeadParams<S>& heads, const Matrix<S>& hidden, const GrlConfig& grl,
                        Eigen::Index valid_frames = -1, typename PoolingHead<S>::Cache* cache = nullptr);

struct LossReport {
  double pd = 0.0;
  double domain = 0.0;
  double dat = 0.0;   // pd + lambda * domain
  double dapt = 0.0;  // only set by pretraining reports
};

template <typename S>
struct DatLossResult {
  LossReport report;
  Matrix<S> d_pd_logits;   // gradient of L_PD
  Matrix<S> d_dom_logits;  // gradient of L_Domain (unscaled; the GRL applies lambda)
};

/// Batch losses: L_PD and L_Domain are mean softmax cross-entropies over the
/// rows, L_DAT = L_PD + lambda * L_Domain.
template <typename S>
DatLossResult<S> DatLosses(const Matrix<S>& pd_logits, const std::vector<int>& pd_labels, const Matrix<S>& dom_logits,
                           const std::vector<int>& domains, const GrlConfig& grl);

struct LabeledExample {
  const FeatureMatrix* features = nullptr;
  Label label = Label::kHC;
  int domain = 0;
  std::string speaker_id;
  std::string utterance_id;
};

struct FinetuneOptions {
  bool dat = false;
  bool freeze_encoder = false;
  GrlConfig grl;
  int crop_frames = 200;
  double domain_lr_scale = 1.0;  // domain head learning rate relative to the main group
  int domain_steps = 1;          // domain head updates per batch; extras reuse the batch features
};

struct FinetuneReport {
  std::vector<LossReport> epochs;  // mean per epoch
};

/// Joint fine-tuning of encoder and heads. With dat = false only the PD loss
/// is optimized; with freeze_encoder the encoder runs in eval mode and only
/// head parameters move. Gradient clipping is applied separately to the
/// (encoder + PD head) group and to the domain head group.
FinetuneReport Finetune(Encoder<float>& encoder, HeadParams<float>& heads, const std::vector<LabeledExample>& data,
                        const nn::TrainConfig& cfg, const FinetuneOptions& opts,
                        const std::function<void(int, const LossReport&)>& on_epoch = {});

/// P(PD) per utterance, eval mode, full utterance.
std::vector<double> PredictPd(const Encoder<float>& encoder, const HeadParams<float>& heads,
                              const std::vector<const FeatureMatrix*>& data);

/// Mean over frames of the final hidden states, eval mode.
Eigen::RowVectorXd PooledHidden(const Encoder<float>& encoder, const FeatureMatrix& features);

extern template class PoolingHead<float>;
extern template class PoolingHead<double>;

}  // namespace pdspeech::model
