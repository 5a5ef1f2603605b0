// src/kmeans.cpp

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

#include "pdspeech/kmeans.hpp"

#include <limits>
#include <string_view>
#include <unordered_set>

#include "pdspeech/common.hpp"
#include "pdspeech/container.hpp"

namespace pdspeech::cluster {

namespace {

std::string_view RowBytes(const PointMatrix& m, Eigen::Index r) {
  return {reinterpret_cast<const char*>(m.data() + r * m.cols()), sizeof(double) * static_cast<size_t>(m.cols())};
}

size_t CountDistinctUpTo(const PointMatrix& points, size_t limit) {
  std::unordered_set<std::string_view> seen;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    seen.insert(RowBytes(points, r));
    if (seen.size() >= limit) break;
  }
  return seen.size();
}

// Squared distance from every point to centroid c, also returns nearest.
int Nearest(const PointMatrix& centroids, const double* x, Eigen::Index dim, double* best_dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double* cc = centroids.data() + c * dim;
    double d = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double diff = x[j] - cc[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (best_dist) *best_dist = best_d;
  return best;
}

}  // namespace

size_t CountDistinctRows(const PointMatrix& points) {
  return CountDistinctUpTo(points, std::numeric_limits<size_t>::max());
}

KMeansResult KMeansFit(const PointMatrix& points, int k, int max_iters, uint64_t seed) {
  if (k < 1) throw Error("invalid_argument", "kmeans: K must be >= 1");
  if (!points.allFinite()) throw Error("numeric", "kmeans: non-finite input");
  const size_t distinct = CountDistinctUpTo(points, static_cast<size_t>(k));
  if (distinct < static_cast<size_t>(k))
    throw Error("data", "kmeans: only " + std::to_string(distinct) + " distinct points for K=" +
                            std::to_string(k));
  const Eigen::Index n = points.rows();
  const Eigen::Index dim = points.cols();

  Rng rng(seed);
  KMeansResult result;
  ClusterModel& model = result.model;
  model.seed = seed;
  model.centroids.resize(k, dim);

  // k-means++ seeding.
  std::vector<double> d2(static_cast<size_t>(n));
  model.centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.Below(static_cast<uint64_t>(n))));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - model.centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index pick = n - 1;
    const double target = rng.Uniform() * total;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    // Floating-point slack at the end of the scan: fall back to the last
    // point with positive distance.
    while (d2[pick] <= 0.0 && pick > 0) --pick;
    model.centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.row(i) - model.centroids.row(c)).squaredNorm());
  }

  std::vector<int> assign(static_cast<size_t>(n), -1);
  for (int it = 0; it < std::max(1, max_iters); ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d;
      const int a = Nearest(model.centroids, points.data() + i * dim, dim, &d);
      inertia += d;
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    result.inertia.push_back(inertia);
    result.iterations = it + 1;
    if (!changed) break;

    PointMatrix sums = PointMatrix::Zero(k, dim);
    std::vector<Eigen::Index> counts(static_cast<size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) model.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
  }
  return result;
}

PseudoLabels Assign(const ClusterModel& model, const PointMatrix& points) {
  if (points.cols() != model.centroids.cols())
    throw Error("invalid_argument", "assign: feature dim " + std::to_string(points.cols()) +
                                        " does not match model dim " + std::to_string(model.centroids.cols()));
  PseudoLabels labels(static_cast<size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    labels[i] = Nearest(model.centroids, points.data() + i * points.cols(), points.cols(), nullptr);
  return labels;
}

double Inertia(const ClusterModel& model, const PointMatrix& points, const PseudoLabels& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - model.centroids.row(labels[i])).squaredNorm();
  return total;
}

void SaveClusterModel(const std::string& path, const ClusterModel& model) {
  nlohmann::json header = {{"kind", "cluster_model"},
                           {"K", model.K()},
                           {"dim", model.Dim()},
                           {"seed", model.seed},
                           {"feature_space", model.feature_space}};
  std::vector<float> payload(static_cast<size_t>(model.centroids.size()));
  for (Eigen::Index i = 0; i < model.centroids.size(); ++i)
    payload[static_cast<size_t>(i)] = static_cast<float>(model.centroids.data()[i]);
  WriteContainer(path, std::move(header), payload);
}

ClusterModel LoadClusterModel(const std::string& path) {
  Container c = ReadContainer(path);
  if (c.header.value("kind", "") != "cluster_model") throw Error("format", path + ": not a cluster model");
  ClusterModel model;
  const int k = c.header.at("K").get<int>();
  const int dim = c.header.at("dim").get<int>();
  if (static_cast<size_t>(k) * dim != c.payload.size()) throw Error("format", path + ": centroid payload size mismatch");
  model.centroids.resize(k, dim);
  for (size_t i = 0; i < c.payload.size(); ++i) model.centroids.data()[i] = c.payload[i];
  model.seed = c.header.at("seed").get<uint64_t>();
  model.feature_space = c.header.at("feature_space").get<std::string>();
  return model;
}

}  // namespace pdspeech::cluster
