// tests/unit/test_kmeans.cpp

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

#include <map>

#include "doctest.h"
#include "pdspeech/kmeans.hpp"
#include "pdspeech/refit.hpp"
#include "test_util.hpp"

using namespace pdspeech;
using namespace pdspeech::testing;
using cluster::PointMatrix;

namespace {

// Normalized mutual information from a joint count table.
double Nmi(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  const double n = static_cast<double>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1 / n;
    pb[b[i]] += 1 / n;
    pab[{a[i], b[i]}] += 1 / n;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto& [k, p] : pa) ha -= p * std::log(p);
  for (auto& [k, p] : pb) hb -= p * std::log(p);
  for (auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  return (ha > 0 && hb > 0) ? mi / std::sqrt(ha * hb) : 1.0;
}

}  // namespace

TEST_CASE("kmeans examples") {
  PointMatrix p(4, 1);
  p << 0, 0, 10, 10;
  const auto r = cluster::KMeansFit(p, 2, 50, 1);
  std::vector<double> c = {r.model.centroids(0, 0), r.model.centroids(1, 0)};
  std::sort(c.begin(), c.end());
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 10.0);
  CHECK(r.inertia.back() == 0.0);

  Rng rng(2);
  PointMatrix q(50, 3);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.Normal();
  const auto one = cluster::KMeansFit(q, 1, 10, 4);
  CHECK((one.model.centroids.row(0) - q.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kmeans separates two Gaussians like the nearest true center") {
  Rng rng(8);
  PointMatrix p(200, 2);
  std::vector<int> truth;
  const double centers[2][2] = {{-5, 0}, {5, 3}};
  for (int i = 0; i < 200; ++i) {
    const int g = i % 2;
    p(i, 0) = centers[g][0] + rng.Normal();
    p(i, 1) = centers[g][1] + rng.Normal();
    const double d0 = std::hypot(p(i, 0) - centers[0][0], p(i, 1) - centers[0][1]);
    const double d1 = std::hypot(p(i, 0) - centers[1][0], p(i, 1) - centers[1][1]);
    truth.push_back(d1 < d0 ? 1 : 0);
  }
  const auto r = cluster::KMeansFit(p, 2, 100, 3);
  const auto z = cluster::Assign(r.model, p);
  int agree = 0;
  for (int i = 0; i < 200; ++i) agree += z[i] == truth[i];
  CHECK(std::max(agree, 200 - agree) >= 198);
}

TEST_CASE("inertia is non-increasing and fits are reproducible") {
  Rng rng(4);
  PointMatrix p(500, 5);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.Normal();
  const auto a = cluster::KMeansFit(p, 12, 60, 9);
  for (size_t i = 1; i < a.inertia.size(); ++i) CHECK(a.inertia[i] <= a.inertia[i - 1]);
  const auto b = cluster::KMeansFit(p, 12, 60, 9);
  CHECK(a.model.centroids == b.model.centroids);
  CHECK(a.inertia.back() == doctest::Approx(cluster::Inertia(a.model, p, cluster::Assign(a.model, p))));
}

TEST_CASE("kmeans needs K distinct rows") {
  PointMatrix p(10, 2);
  p.setConstant(1.0);
  p(0, 0) = 2.0;
  CHECK(cluster::CountDistinctRows(p) == 2);
  CHECK_THROWS_AS(cluster::KMeansFit(p, 3, 10, 1), Error);
}

TEST_CASE("assign examples and brute-force oracle") {
  cluster::ClusterModel m;
  m.centroids.resize(2, 1);
  m.centroids << 0, 10;
  PointMatrix x(2, 1);
  x << 9.5, 5.0;
  const auto z = cluster::Assign(m, x);
  CHECK(z[0] == 1);
  CHECK(z[1] == 0);  // equidistant -> lower id

  Rng rng(6);
  m.centroids.resize(17, 4);
  for (Eigen::Index i = 0; i < m.centroids.size(); ++i) m.centroids.data()[i] = rng.Normal();
  PointMatrix y(300, 4);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.Normal();
  const auto zy = cluster::Assign(m, y);
  for (int i = 0; i < 300; ++i) {
    int best = 0;
    double bd = 1e300;
    for (int k = 0; k < 17; ++k) {
      double d = 0;
      for (int j = 0; j < 4; ++j) d += (y(i, j) - m.centroids(k, j)) * (y(i, j) - m.centroids(k, j));
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    CHECK(zy[i] == best);
  }
  PointMatrix wrong(1, 3);
  CHECK_THROWS_AS(cluster::Assign(m, wrong), Error);
}

TEST_CASE("cluster model save/load") {
  TempDir dir("km");
  cluster::ClusterModel m;
  m.centroids = PointMatrix::Random(5, 3);
  m.feature_space = "encoder_layer_2";
  m.seed = 77;
  cluster::SaveClusterModel(dir / "c.bin", m);
  const auto back = cluster::LoadClusterModel(dir / "c.bin");
  CHECK(back.feature_space == m.feature_space);
  CHECK(back.seed == 77);
  CHECK((back.centroids - m.centroids).cwiseAbs().maxCoeff() < 1e-6);
}

namespace {

model::Encoder<float> TinyEncoder(int dapt_stages) {
  model::EncoderConfig ec;
  ec.input_dim = 6;
  ec.model_dim = 8;
  ec.num_layers = 2;
  ec.num_heads = 2;
  ec.ff_dim = 16;
  ec.num_classes = 5;
  model::Encoder<float> enc(ec);
  enc.Init(3);
  enc.dapt_stages = dapt_stages;
  return enc;
}

}  // namespace

TEST_CASE("refit_from_encoder: layer choice, preconditions, constant corpus") {
  auto enc = TinyEncoder(1);
  CHECK(cluster::ResolveLayer(enc, -1) == 1);
  CHECK_THROWS_AS(cluster::ResolveLayer(enc, 3), Error);

  // Positions make frames of a longer constant utterance distinct, so the
  // constant corpus is built from identical single-frame utterances.
  feat::FeatureMatrix constant(1, 6);
  constant.setConstant(0.3);
  const std::vector<const feat::FeatureMatrix*> corpus(30, &constant);
  cluster::RefitOptions opts;
  for (int k : {1, 4, 50}) {
    opts.k = k;
    const auto r = cluster::RefitFromEncoder(enc, corpus, opts);
    CHECK(r.inertia.back() == 0.0);
    CHECK(r.model.feature_space == "encoder_layer_1");
  }
  opts.k = 4;

  auto fresh = TinyEncoder(0);
  CHECK_THROWS_AS(cluster::RefitFromEncoder(fresh, {&constant}, opts), Error);
}

TEST_CASE("stage-2 labels differ from stage-1 labels") {
  auto enc = TinyEncoder(1);
  Rng rng(12);
  feat::FeatureMatrix f(300, 6);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.Normal();
  const auto s1 = cluster::KMeansFit(f.cast<double>(), 5, 50, 1);
  const auto z1 = cluster::Assign(s1.model, f.cast<double>());
  cluster::RefitOptions opts;
  opts.k = 5;
  const auto s2 = cluster::RefitFromEncoder(enc, {&f}, opts);
  const auto z2 = cluster::AssignLatent(s2.model, enc, f, cluster::ResolveLayer(enc, -1));
  CHECK(z2.size() == z1.size());
  CHECK(Nmi(z1, z2) < 1.0);
  const auto again = cluster::RefitFromEncoder(enc, {&f}, opts);
  CHECK(again.model.centroids == s2.model.centroids);
}
