// include/pdspeech/nn/layers.hpp

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

// Differentiable building blocks. Every block exposes the same surface:
//
//   Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const;
//   Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy);
//   void Collect(const std::string& prefix, ParamStore<S>& store);
//
// Forward fills `cache` (when non-null) with what Backward needs. Backward
// accumulates parameter gradients into Param::grad and returns dL/dx.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "pdspeech/nn/tensor.hpp"

namespace pdspeech::nn {

inline void CheckShape(bool ok, const char* what) {
  if (!ok) throw Error("shape", std::string("shape mismatch in ") + what);
}

template <typename S>
class Linear {
 public:
  Param<S> weight;  // in x out
  Param<S> bias;    // 1 x out

  struct Cache {
    Matrix<S> input;
  };

  Linear() = default;
  Linear(int in, int out) {
    weight.Resize(in, out);
    bias.Resize(1, out);
  }

  int InDim() const { return static_cast<int>(weight.value.rows()); }
  int OutDim() const { return static_cast<int>(weight.value.cols()); }

  /// Xavier-uniform weights, zero bias.
  void Init(Rng& rng) {
    weight.InitUniform(rng, std::sqrt(6.0 / (InDim() + OutDim())));
    bias.value.setZero();
  }

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    CheckShape(x.cols() == weight.value.rows(), "Linear::Forward");
    if (cache) cache->input = x;
    Matrix<S> y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    CheckShape(dy.cols() == weight.value.cols() && dy.rows() == cache.input.rows(), "Linear::Backward");
    weight.grad.noalias() += cache.input.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value.transpose();
  }

  void Collect(const std::string& prefix, ParamStore<S>& store) {
    store.Add(prefix + ".weight", weight);
    store.Add(prefix + ".bias", bias);
  }
};

template <typename S>
class LayerNorm {
 public:
  Param<S> gamma;
  Param<S> beta;
  double eps = 1e-5;

  struct Cache {
    Matrix<S> xhat;
    Eigen::Matrix<S, Eigen::Dynamic, 1> rstd;
  };

  LayerNorm() = default;
  explicit LayerNorm(int dim) {
    gamma.Resize(1, dim);
    beta.Resize(1, dim);
    gamma.value.setOnes();
  }

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    CheckShape(x.cols() == gamma.value.cols(), "LayerNorm::Forward");
    const Eigen::Index n = x.cols();
    Matrix<S> xhat(x.rows(), n);
    Eigen::Matrix<S, Eigen::Dynamic, 1> rstd(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const S mean = x.row(r).mean();
      const S var = (x.row(r).array() - mean).square().sum() / static_cast<S>(n);
      rstd[r] = S(1) / std::sqrt(var + static_cast<S>(eps));
      xhat.row(r) = (x.row(r).array() - mean) * rstd[r];
    }
    Matrix<S> y = (xhat.array().rowwise() * gamma.value.row(0).array()).matrix();
    y.rowwise() += beta.value.row(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->rstd = std::move(rstd);
    }
    return y;
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    CheckShape(dy.rows() == cache.xhat.rows() && dy.cols() == cache.xhat.cols(), "LayerNorm::Backward");
    const Eigen::Index n = dy.cols();
    gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    const Matrix<S> dxhat = (dy.array().rowwise() * gamma.value.row(0).array()).matrix();
    Matrix<S> dx(dy.rows(), n);
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const S sum_d = dxhat.row(r).sum();
      const S sum_dx = dxhat.row(r).dot(cache.xhat.row(r));
      dx.row(r) = (cache.rstd[r] / static_cast<S>(n)) *
                  (static_cast<S>(n) * dxhat.row(r).array() - sum_d - cache.xhat.row(r).array() * sum_dx).matrix();
    }
    return dx;
  }

  void Collect(const std::string& prefix, ParamStore<S>& store) {
    store.Add(prefix + ".gamma", gamma);
    store.Add(prefix + ".beta", beta);
  }
};

/// Exact (erf) GELU.
template <typename S>
class Gelu {
 public:
  struct Cache {
    Matrix<S> input;
  };

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    if (cache) cache->input = x;
    return x.unaryExpr([](S v) { return S(0.5) * v * (S(1) + std::erf(v * static_cast<S>(M_SQRT1_2))); });
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    CheckShape(dy.rows() == cache.input.rows() && dy.cols() == cache.input.cols(), "Gelu::Backward");
    const S inv_sqrt_2pi = static_cast<S>(0.3989422804014327);
    const Matrix<S> slope = cache.input.unaryExpr([&](S v) {
      return S(0.5) * (S(1) + std::erf(v * static_cast<S>(M_SQRT1_2))) + v * inv_sqrt_2pi * std::exp(S(-0.5) * v * v);
    });
    return (dy.array() * slope.array()).matrix();
  }

  void Collect(const std::string&, ParamStore<S>&) {}
};

/// Numerically stable row-wise softmax.
template <typename S>
Matrix<S> SoftmaxRows(const Matrix<S>& logits) {
  Matrix<S> p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const S mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// -log softmax(row)[target], evaluated stably in double.
template <typename S>
double NegLogSoftmax(const Eigen::Ref<const RowVector<S>>& row, int target) {
  const double xt = static_cast<double>(row[target]);
  const double mx = static_cast<double>(row.maxCoeff());
  double rest = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j == target) continue;
    rest += std::exp(static_cast<double>(row[j]) - mx);
  }
  const double self = std::exp(xt - mx);
  // log(sum_j exp(x_j - x_t)) = log1p(rest / self) keeps precision when the
  // target already dominates.
  return std::log1p(rest / self);
}

template <typename S>
struct CrossEntropyResult {
  double loss = 0.0;
  Matrix<S> dlogits;
};

/// Mean over rows of -log softmax(logits)[target]; gradient is
/// (softmax - onehot) / rows.
template <typename S>
CrossEntropyResult<S> SoftmaxCrossEntropy(const Matrix<S>& logits, const std::vector<int>& targets) {
  CheckShape(static_cast<size_t>(logits.rows()) == targets.size() && logits.rows() > 0, "SoftmaxCrossEntropy");
  CrossEntropyResult<S> out;
  out.dlogits = SoftmaxRows(logits);
  const double inv = 1.0 / static_cast<double>(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int t = targets[static_cast<size_t>(r)];
    if (t < 0 || t >= logits.cols())
      throw Error("invalid_argument", "cross-entropy target " + std::to_string(t) + " out of range [0, " +
                                          std::to_string(logits.cols()) + ")");
    out.loss += NegLogSoftmax<S>(logits.row(r), t);
    out.dlogits(r, t) -= S(1);
  }
  out.loss *= inv;
  out.dlogits *= static_cast<S>(inv);
  return out;
}

/// Multi-head scaled dot-product self-attention with a fused QKV projection.
template <typename S>
class MultiHeadAttention {
 public:
  Linear<S> qkv;
  Linear<S> out;
  int num_heads = 1;

  struct Cache {
    typename Linear<S>::Cache qkv_cache;
    Matrix<S> qkv_out;
    std::vector<Matrix<S>> attn;
    typename Linear<S>::Cache out_cache;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(int dim, int heads) : qkv(dim, 3 * dim), out(dim, dim), num_heads(heads) {
    if (heads < 1 || dim % heads != 0)
      throw Error("config", "model dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) + " heads");
  }

  int Dim() const { return out.OutDim(); }

  void Init(Rng& rng) {
    qkv.Init(rng);
    out.Init(rng);
  }

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    const int d = Dim();
    const int dh = d / num_heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    typename Linear<S>::Cache qkv_cache;
    Matrix<S> proj = qkv.Forward(x, cache ? &qkv_cache : nullptr);
    Matrix<S> context(x.rows(), d);
    std::vector<Matrix<S>> attn;
    if (cache) attn.reserve(static_cast<size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
      const auto q = proj.middleCols(h * dh, dh);
      const auto k = proj.middleCols(d + h * dh, dh);
      const auto v = proj.middleCols(2 * d + h * dh, dh);
      Matrix<S> scores = (q * k.transpose()) * scale;
      Matrix<S> a = SoftmaxRows(scores);
      context.middleCols(h * dh, dh).noalias() = a * v;
      if (cache) attn.push_back(std::move(a));
    }
    if (cache) {
      cache->qkv_cache = std::move(qkv_cache);
      cache->attn = std::move(attn);
      cache->qkv_out = proj;
    }
    return out.Forward(context, cache ? &cache->out_cache : nullptr);
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    const int d = Dim();
    const int dh = d / num_heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    const Matrix<S> dcontext = out.Backward(cache.out_cache, dy);
    const Matrix<S>& proj = cache.qkv_out;
    Matrix<S> dproj(proj.rows(), proj.cols());
    for (int h = 0; h < num_heads; ++h) {
      const auto q = proj.middleCols(h * dh, dh);
      const auto k = proj.middleCols(d + h * dh, dh);
      const auto v = proj.middleCols(2 * d + h * dh, dh);
      const Matrix<S>& a = cache.attn[static_cast<size_t>(h)];
      const auto dctx = dcontext.middleCols(h * dh, dh);
      const Matrix<S> da = dctx * v.transpose();
      dproj.middleCols(2 * d + h * dh, dh).noalias() = a.transpose() * dctx;
      const Eigen::Matrix<S, Eigen::Dynamic, 1> rowdot = (da.array() * a.array()).rowwise().sum();
      const Matrix<S> ds = (a.array() * (da.array().colwise() - rowdot.array())).matrix();
      dproj.middleCols(h * dh, dh).noalias() = (ds * k) * scale;
      dproj.middleCols(d + h * dh, dh).noalias() = (ds.transpose() * q) * scale;
    }
    return qkv.Backward(cache.qkv_cache, dproj);
  }

  void Collect(const std::string& prefix, ParamStore<S>& store) {
    qkv.Collect(prefix + ".qkv", store);
    out.Collect(prefix + ".out", store);
  }
};

/// Linear -> GELU -> Linear.
template <typename S>
class FeedForward {
 public:
  Linear<S> fc1;
  Gelu<S> act;
  Linear<S> fc2;

  struct Cache {
    typename Linear<S>::Cache fc1_cache;
    typename Gelu<S>::Cache act_cache;
    typename Linear<S>::Cache fc2_cache;
  };

  FeedForward() = default;
  FeedForward(int dim, int hidden) : fc1(dim, hidden), fc2(hidden, dim) {}

  void Init(Rng& rng) {
    fc1.Init(rng);
    fc2.Init(rng);
  }

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    Matrix<S> h = fc1.Forward(x, cache ? &cache->fc1_cache : nullptr);
    h = act.Forward(h, cache ? &cache->act_cache : nullptr);
    return fc2.Forward(h, cache ? &cache->fc2_cache : nullptr);
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    Matrix<S> g = fc2.Backward(cache.fc2_cache, dy);
    g = act.Backward(cache.act_cache, g);
    return fc1.Backward(cache.fc1_cache, g);
  }

  void Collect(const std::string& prefix, ParamStore<S>& store) {
    fc1.Collect(prefix + ".fc1", store);
    fc2.Collect(prefix + ".fc2", store);
  }
};

/// Pre-norm transformer layer: h = x + MHA(LN(x)); y = h + FFN(LN(h)).
template <typename S>
class TransformerBlock {
 public:
  LayerNorm<S> norm1;
  MultiHeadAttention<S> attn;
  LayerNorm<S> norm2;
  FeedForward<S> ffn;

  struct Cache {
    typename LayerNorm<S>::Cache norm1_cache;
    typename MultiHeadAttention<S>::Cache attn_cache;
    typename LayerNorm<S>::Cache norm2_cache;
    typename FeedForward<S>::Cache ffn_cache;
  };

  TransformerBlock() = default;
  TransformerBlock(int dim, int heads, int ff_dim) : norm1(dim), attn(dim, heads), norm2(dim), ffn(dim, ff_dim) {}

  void Init(Rng& rng) {
    attn.Init(rng);
    ffn.Init(rng);
  }

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    Matrix<S> a = norm1.Forward(x, cache ? &cache->norm1_cache : nullptr);
    Matrix<S> h = x + attn.Forward(a, cache ? &cache->attn_cache : nullptr);
    Matrix<S> b = norm2.Forward(h, cache ? &cache->norm2_cache : nullptr);
    return h + ffn.Forward(b, cache ? &cache->ffn_cache : nullptr);
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    Matrix<S> dh = dy + norm2.Backward(cache.norm2_cache, ffn.Backward(cache.ffn_cache, dy));
    return dh + norm1.Backward(cache.norm1_cache, attn.Backward(cache.attn_cache, dh));
  }

  void Collect(const std::string& prefix, ParamStore<S>& store) {
    norm1.Collect(prefix + ".norm1", store);
    attn.Collect(prefix + ".attn", store);
    norm2.Collect(prefix + ".norm2", store);
    ffn.Collect(prefix + ".ffn", store);
  }
};

/// Mean over the first `valid` rows; rows past `valid` are padding and get
/// zero gradient.
template <typename S>
class MeanPool {
 public:
  struct Cache {
    Eigen::Index rows = 0;
    Eigen::Index valid = 0;
  };

  Eigen::Index valid = -1;  // -1: all rows are valid

  Matrix<S> Forward(const Matrix<S>& x, Cache* cache) const {
    const Eigen::Index n = valid < 0 ? x.rows() : std::min<Eigen::Index>(valid, x.rows());
    if (n <= 0) throw Error("invalid_argument", "mean-pool over an all-padding input");
    if (cache) {
      cache->rows = x.rows();
      cache->valid = n;
    }
    return x.topRows(n).colwise().sum() / static_cast<S>(n);
  }

  Matrix<S> Backward(const Cache& cache, const Matrix<S>& dy) {
    CheckShape(dy.rows() == 1, "MeanPool::Backward");
    Matrix<S> dx = Matrix<S>::Zero(cache.rows, dy.cols());
    dx.topRows(cache.valid).rowwise() = dy.row(0) / static_cast<S>(cache.valid);
    return dx;
  }

  void Collect(const std::string&, ParamStore<S>&) {}
};

/// Identity on the forward pass; multiplies the incoming gradient by -lambda
/// on the way back.
template <typename S>
class GradientReversal {
 public:
  double lambda = 0.1;

  struct Cache {};

  GradientReversal() = default;
  explicit GradientReversal(double l) : lambda(l) {}

  Matrix<S> Forward(const Matrix<S>& x, Cache*) const { return x; }
  Matrix<S> Backward(const Cache&, const Matrix<S>& dy) { return dy * static_cast<S>(-lambda); }
  void Collect(const std::string&, ParamStore<S>&) {}
};

/// Applies two blocks in sequence; handy for gradient checks of composed paths.
template <typename First, typename Second>
class Chain {
 public:
  First first;
  Second second;

  struct Cache {
    typename First::Cache first_cache;
    typename Second::Cache second_cache;
  };

  template <typename M>
  M Forward(const M& x, Cache* cache) const {
    return second.Forward(first.Forward(x, cache ? &cache->first_cache : nullptr),
                          cache ? &cache->second_cache : nullptr);
  }

  template <typename M>
  M Backward(const Cache& cache, const M& dy) {
    return first.Backward(cache.first_cache, second.Backward(cache.second_cache, dy));
  }

  template <typename Store>
  void Collect(const std::string& prefix, Store& store) {
    first.Collect(prefix + ".0", store);
    second.Collect(prefix + ".1", store);
  }
};

}  // namespace pdspeech::nn
