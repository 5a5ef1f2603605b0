// include/pdspeech/refit.hpp

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

// Second-stage pseudo-labels: k-means on intermediate encoder latents.

#include <vector>

#include "pdspeech/encoder.hpp"
#include "pdspeech/kmeans.hpp"

namespace pdspeech::cluster {

struct RefitOptions {
  int layer = -1;  // -1 selects num_layers / 2
  int k = 500;
  int max_iters = 50;
  int subsample = 1;  // keep every n-th frame for fitting
  uint64_t seed = 0;
};

/// Hidden states of every utterance at the chosen layer, eval mode.
PointMatrix EncoderLatents(const model::Encoder<float>& encoder, const std::vector<const feat::FeatureMatrix*>& data,
                           int layer, int subsample = 1);

/// Resolves layer -1 to the middle layer and range-checks the rest.
int ResolveLayer(const model::Encoder<float>& encoder, int layer);

/// Fits K centroids on encoder latents. When the latents have fewer than K
/// distinct rows, k-means runs with the distinct count and the remaining
/// centroids repeat the last one, so Assign never selects them.
KMeansResult RefitFromEncoder(const model::Encoder<float>& encoder,
                              const std::vector<const feat::FeatureMatrix*>& data, const RefitOptions& opts);

/// Labels for one utterance under a latent-space model.
PseudoLabels AssignLatent(const ClusterModel& model, const model::Encoder<float>& encoder,
                          const feat::FeatureMatrix& features, int layer);

}  // namespace pdspeech::cluster
