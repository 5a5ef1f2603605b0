// src/refit.cpp

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

#include "pdspeech/refit.hpp"

namespace pdspeech::cluster {

int ResolveLayer(const model::Encoder<float>& encoder, int layer) {
  const int resolved = layer < 0 ? encoder.config.num_layers / 2 : layer;
  if (resolved > encoder.config.num_layers)
    throw Error("invalid_argument", "layer index " + std::to_string(layer) + " out of range [0, " +
                                        std::to_string(encoder.config.num_layers) + "]");
  return resolved;
}

PointMatrix EncoderLatents(const model::Encoder<float>& encoder, const std::vector<const feat::FeatureMatrix*>& data,
                           int layer, int subsample) {
  if (subsample < 1) throw Error("config", "subsample must be >= 1");
  const int l = ResolveLayer(encoder, layer);
  std::vector<nn::Matrix<float>> parts;
  Eigen::Index rows = 0;
  for (const auto* f : data) {
    nn::Matrix<float> h = encoder.HiddenAtLayer(*f, l);
    rows += (h.rows() + subsample - 1) / subsample;
    parts.push_back(std::move(h));
  }
  PointMatrix out(rows, encoder.config.model_dim);
  Eigen::Index r = 0;
  for (const auto& h : parts)
    for (Eigen::Index t = 0; t < h.rows(); t += subsample) out.row(r++) = h.row(t).cast<double>();
  return out;
}

KMeansResult RefitFromEncoder(const model::Encoder<float>& encoder,
                              const std::vector<const feat::FeatureMatrix*>& data, const RefitOptions& opts) {
  if (encoder.dapt_stages < 1) throw Error("data", "stage-2 refit needs an encoder with at least one DAPT stage");
  if (opts.k < 1) throw Error("config", "cluster count must be >= 1");
  if (data.empty()) throw Error("data", "stage-2 refit over an empty corpus");
  const int layer = ResolveLayer(encoder, opts.layer);
  const PointMatrix latents = EncoderLatents(encoder, data, layer, opts.subsample);
  const int distinct = static_cast<int>(CountDistinctRows(latents));
  const int k_fit = std::min(opts.k, distinct);
  KMeansResult res = KMeansFit(latents, k_fit, opts.max_iters, opts.seed);
  if (k_fit < opts.k) {
    PointMatrix padded(opts.k, latents.cols());
    padded.topRows(k_fit) = res.model.centroids;
    for (int c = k_fit; c < opts.k; ++c) padded.row(c) = res.model.centroids.row(k_fit - 1);
    res.model.centroids = std::move(padded);
  }
  res.model.feature_space = "encoder_layer_" + std::to_string(layer);
  return res;
}

PseudoLabels AssignLatent(const ClusterModel& model, const model::Encoder<float>& encoder,
                          const feat::FeatureMatrix& features, int layer) {
  return Assign(model, encoder.HiddenAtLayer(features, ResolveLayer(encoder, layer)).cast<double>());
}

}  // namespace pdspeech::cluster
