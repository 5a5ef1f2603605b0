// include/pdspeech/kmeans.hpp

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

#include <cstdint>
#include <string>
#include <vector>

#include "pdspeech/features.hpp"

namespace pdspeech::cluster {

using PointMatrix = feat::FeatureMatrix;  // rows = points

/// Frame-level cluster ids, aligned to feature rows.
using PseudoLabels = std::vector<int>;

struct ClusterModel {
  PointMatrix centroids;  // K x dim
  std::string feature_space = "mfcc";
  uint64_t seed = 0;

  int K() const { return static_cast<int>(centroids.rows()); }
  int Dim() const { return static_cast<int>(centroids.cols()); }
};

struct KMeansResult {
  ClusterModel model;
  /// Inertia after each assignment step; non-increasing.
  std::vector<double> inertia;
  int iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Throws Error("data") when the
/// input has fewer than K distinct rows.
KMeansResult KMeansFit(const PointMatrix& points, int k, int max_iters, uint64_t seed);

/// Nearest centroid per row (squared Euclidean); ties go to the lowest id.
PseudoLabels Assign(const ClusterModel& model, const PointMatrix& points);

/// Sum of squared distances from each row to its assigned centroid.
double Inertia(const ClusterModel& model, const PointMatrix& points, const PseudoLabels& labels);

/// Number of distinct rows (exact comparison).
size_t CountDistinctRows(const PointMatrix& points);

/// Container header {"kind": "cluster_model", K, dim, seed, feature_space}
/// with the centroids as the float32 payload.
void SaveClusterModel(const std::string& path, const ClusterModel& model);
ClusterModel LoadClusterModel(const std::string& path);

}  // namespace pdspeech::cluster
