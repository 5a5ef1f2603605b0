// include/pdspeech/encoder.hpp

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

// Small HuBERT-style encoder: MFCC frames are standardized, projected to the
// model dimension, masked frames are swapped for a learned mask embedding,
// sinusoidal positions are added and a pre-norm transformer stack follows.
// A linear cluster head on the final hidden states yields the per-frame
// distribution over pseudo-label ids used by masked-prediction pretraining.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdspeech/features.hpp"
#include "pdspeech/nn/layers.hpp"
#include "pdspeech/nn/optim.hpp"

namespace pdspeech::model {

using feat::FeatureMatrix;
using nn::Matrix;
using nn::Mode;

struct EncoderConfig {
  int input_dim = 39;
  int model_dim = 64;
  int num_layers = 4;
  int num_heads = 4;
  int ff_dim = 256;
  int num_classes = 100;  // width of the cluster prediction head

  /// 12 layers, 768 wide, 12 heads, 3072 feed-forward.
  static EncoderConfig FullScale();

  void Validate() const;
  nlohmann::json ToJson() const;
  static EncoderConfig FromJson(const nlohmann::json& j);
};

/// Span masking: every frame starts a span of `span` frames with probability
/// `start_prob`; the mask is the union of all spans (clipped at T).
struct MaskSpec {
  double start_prob = 0.08;
  int span = 10;
};

/// Boolean mask of length T (1 = masked).
using FrameMask = std::vector<char>;

FrameMask DrawMask(int num_frames, const MaskSpec& spec, Rng& rng);

std::vector<int> MaskIndices(const FrameMask& mask);

/// The corrupted sequence: row i is `mask_embedding` when mask[i] is set,
/// otherwise the original row.
template <typename S>
Matrix<S> ApplyMask(const Matrix<S>& frames, const FrameMask& mask, const Matrix<S>& mask_embedding);

struct ForwardOptions {
  Mode mode = Mode::kEval;
  double layerdrop = 0.0;  // only consulted in kTrain
  Rng* rng = nullptr;      // required when mode == kTrain and layerdrop > 0
  bool logits = true;
};

template <typename S>
class Encoder {
 public:
  EncoderConfig config;
  // Per-dimension standardization of the input features (not trained).
  Eigen::RowVectorXd input_mean;
  Eigen::RowVectorXd input_scale;

  nn::Linear<S> input_proj;
  nn::Param<S> mask_embedding;  // 1 x model_dim
  std::vector<nn::TransformerBlock<S>> layers;
  nn::LayerNorm<S> final_norm;
  nn::Linear<S> cluster_head;

  int dapt_stages = 0;  // completed masked-prediction training runs

  struct Cache {
    typename nn::Linear<S>::Cache proj_cache;
    FrameMask mask;
    std::vector<typename nn::TransformerBlock<S>::Cache> block_caches;
    std::vector<char> skipped;
    typename nn::LayerNorm<S>::Cache norm_cache;
    typename nn::Linear<S>::Cache head_cache;
    bool has_logits = false;
  };

  struct Output {
    Matrix<S> hidden;  // T x model_dim
    Matrix<S> logits;  // T x num_classes (empty when not requested)
    std::vector<char> skipped;
  };

  Encoder() = default;
  explicit Encoder(const EncoderConfig& cfg);

  void Init(uint64_t seed);

  void SetInputStats(const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& scale);

  /// Replaces the cluster head with a freshly initialized one of width k.
  void ResetClusterHead(int k, uint64_t seed);

  /// `mask` may be null (no masking). Throws Error("shape") if the feature
  /// width does not match config.input_dim.
  Output Forward(const FeatureMatrix& features, const FrameMask* mask, const ForwardOptions& opts,
                 Cache* cache) const;

  /// Accumulates parameter gradients. Either gradient may be null.
  void Backward(const Cache& cache, const Matrix<S>* d_hidden, const Matrix<S>* d_logits);

  /// Hidden states in eval mode after `layer` blocks (0 = embeddings,
  /// num_layers = final normalized output).
  Matrix<S> HiddenAtLayer(const FeatureMatrix& features, int layer) const;

  /// Registers parameters; the cluster head is optional because fine-tuning
  /// does not train it.
  void Collect(const std::string& prefix, nn::ParamStore<S>& store, bool include_cluster_head = true);

  /// Sinusoidal position table (T x model_dim).
  static Matrix<S> Positions(int num_frames, int dim);

 private:
  Matrix<S> Embed(const FeatureMatrix& features, const FrameMask* mask,
                  typename nn::Linear<S>::Cache* proj_cache) const;
};

template <typename S>
struct DaptLossResult {
  double loss = 0.0;
  Matrix<S> dlogits;
  size_t masked = 0;
};

/// Masked cross-entropy: sum over t in M of -log softmax(logits_t)[z_t],
/// divided by |M| when `normalize` is set. Unmasked rows get zero gradient.
/// An empty mask yields loss 0.
template <typename S>
DaptLossResult<S> DaptLoss(const Matrix<S>& logits, const std::vector<int>& targets, const FrameMask& mask,
                           bool normalize = true);

struct DaptExample {
  const FeatureMatrix* features = nullptr;
  std::vector<int> labels;  // pseudo-label per frame
};

struct DaptOptions {
  MaskSpec mask;
  int crop_frames = 200;
  bool normalize_loss = true;
};

struct DaptReport {
  /// Held-out masked-prediction loss per |M|; entry 0 is before training.
  std::vector<double> heldout_loss;
  std::vector<double> train_loss;
  size_t empty_masks = 0;
};

/// Epochs of mask -> forward -> masked CE -> clip -> AdamW. Held-out loss
/// uses fixed masks and eval mode so epochs are comparable.
DaptReport DaptTrain(Encoder<float>& encoder, const std::vector<DaptExample>& train,
                     const std::vector<DaptExample>& heldout, const nn::TrainConfig& cfg, const DaptOptions& opts,
                     const std::function<void(int, double, double)>& on_epoch = {});

/// Mean masked-prediction loss (per masked frame) in eval mode.
double HeldoutDaptLoss(const Encoder<float>& encoder, const std::vector<DaptExample>& data,
                       const std::vector<FrameMask>& masks);

/// Picks a crop window [start, start + len) of at most `crop` frames.
std::pair<int, int> CropWindow(int num_frames, int crop, Rng* rng);

FeatureMatrix CropRows(const FeatureMatrix& m, std::pair<int, int> window);

/// Column mean and standard deviation over all rows of all matrices; zero
/// deviations are replaced by one.
std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> FeatureStats(const std::vector<const FeatureMatrix*>& data);

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace pdspeech::model
