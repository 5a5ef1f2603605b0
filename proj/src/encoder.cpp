// src/encoder.cpp

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

#include "pdspeech/encoder.hpp"

#include <numeric>

namespace pdspeech::model {

EncoderConfig EncoderConfig::FullScale() {
  EncoderConfig c;
  c.model_dim = 768;
  c.num_layers = 12;
  c.num_heads = 12;
  c.ff_dim = 3072;
  return c;
}

void EncoderConfig::Validate() const {
  if (input_dim < 1 || model_dim < 1 || ff_dim < 1 || num_layers < 0 || num_classes < 1)
    throw Error("config", "encoder dimensions must be positive");
  if (num_heads < 1 || model_dim % num_heads != 0)
    throw Error("config", "encoder.model_dim must be divisible by encoder.num_heads");
}

nlohmann::json EncoderConfig::ToJson() const {
  return {{"input_dim", input_dim}, {"model_dim", model_dim}, {"num_layers", num_layers},
          {"num_heads", num_heads}, {"ff_dim", ff_dim},       {"num_classes", num_classes}};
}

EncoderConfig EncoderConfig::FromJson(const nlohmann::json& j) {
  EncoderConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.Validate();
  return c;
}

FrameMask DrawMask(int num_frames, const MaskSpec& spec, Rng& rng) {
  FrameMask mask(static_cast<size_t>(std::max(0, num_frames)), 0);
  if (spec.start_prob <= 0.0 || spec.span <= 0) return mask;
  for (int t = 0; t < num_frames; ++t) {
    if (!rng.Bernoulli(spec.start_prob)) continue;
    const int end = std::min(num_frames, t + spec.span);
    for (int i = t; i < end; ++i) mask[static_cast<size_t>(i)] = 1;
  }
  return mask;
}

std::vector<int> MaskIndices(const FrameMask& mask) {
  std::vector<int> idx;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(static_cast<int>(i));
  return idx;
}

template <typename S>
Matrix<S> ApplyMask(const Matrix<S>& frames, const FrameMask& mask, const Matrix<S>& mask_embedding) {
  nn::CheckShape(static_cast<size_t>(frames.rows()) == mask.size() && mask_embedding.rows() == 1 &&
                     mask_embedding.cols() == frames.cols(),
                 "ApplyMask");
  Matrix<S> out = frames;
  for (Eigen::Index i = 0; i < frames.rows(); ++i)
    if (mask[static_cast<size_t>(i)]) out.row(i) = mask_embedding.row(0);
  return out;
}

template Matrix<float> ApplyMask(const Matrix<float>&, const FrameMask&, const Matrix<float>&);
template Matrix<double> ApplyMask(const Matrix<double>&, const FrameMask&, const Matrix<double>&);

template <typename S>
Encoder<S>::Encoder(const EncoderConfig& cfg) : config(cfg) {
  cfg.Validate();
  input_mean = Eigen::RowVectorXd::Zero(cfg.input_dim);
  input_scale = Eigen::RowVectorXd::Ones(cfg.input_dim);
  input_proj = nn::Linear<S>(cfg.input_dim, cfg.model_dim);
  mask_embedding.Resize(1, cfg.model_dim);
  layers.clear();
  for (int l = 0; l < cfg.num_layers; ++l) layers.emplace_back(cfg.model_dim, cfg.num_heads, cfg.ff_dim);
  final_norm = nn::LayerNorm<S>(cfg.model_dim);
  cluster_head = nn::Linear<S>(cfg.model_dim, cfg.num_classes);
}

template <typename S>
void Encoder<S>::Init(uint64_t seed) {
  Rng rng(seed);
  input_proj.Init(rng);
  mask_embedding.InitUniform(rng, 1.0);
  for (auto& layer : layers) layer.Init(rng);
  cluster_head.Init(rng);
}

template <typename S>
void Encoder<S>::SetInputStats(const Eigen::RowVectorXd& mean, const Eigen::RowVectorXd& scale) {
  if (mean.size() != config.input_dim || scale.size() != config.input_dim)
    throw Error("shape", "input statistics do not match encoder input_dim");
  if ((scale.array() <= 0).any()) throw Error("invalid_argument", "input scale must be positive");
  input_mean = mean;
  input_scale = scale;
}

template <typename S>
void Encoder<S>::ResetClusterHead(int k, uint64_t seed) {
  if (k < 1) throw Error("invalid_argument", "cluster head width must be >= 1");
  config.num_classes = k;
  cluster_head = nn::Linear<S>(config.model_dim, k);
  Rng rng(seed);
  cluster_head.Init(rng);
}

template <typename S>
Matrix<S> Encoder<S>::Positions(int num_frames, int dim) {
  Matrix<S> pe(num_frames, dim);
  for (int t = 0; t < num_frames; ++t)
    for (int i = 0; i < dim; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      pe(t, i) = static_cast<S>(std::sin(t * freq));
      if (i + 1 < dim) pe(t, i + 1) = static_cast<S>(std::cos(t * freq));
    }
  return pe;
}

template <typename S>
Matrix<S> Encoder<S>::Embed(const FeatureMatrix& features, const FrameMask* mask,
                            typename nn::Linear<S>::Cache* proj_cache) const {
  if (features.cols() != config.input_dim)
    throw Error("shape", "encoder expects " + std::to_string(config.input_dim) + "-dim features, got " +
                             std::to_string(features.cols()));
  if (features.rows() < 1) throw Error("shape", "encoder input has no frames");
  if (mask && static_cast<Eigen::Index>(mask->size()) != features.rows())
    throw Error("shape", "mask length does not match frame count");
  const Matrix<S> normalized =
      ((features.rowwise() - input_mean).array().rowwise() / input_scale.array()).matrix().template cast<S>();
  Matrix<S> x = input_proj.Forward(normalized, proj_cache);
  if (mask) x = ApplyMask<S>(x, *mask, mask_embedding.value);
  x += Positions(static_cast<int>(features.rows()), config.model_dim);
  return x;
}

template <typename S>
typename Encoder<S>::Output Encoder<S>::Forward(const FeatureMatrix& features, const FrameMask* mask,
                                                const ForwardOptions& opts, Cache* cache) const {
  const bool drop = opts.mode == Mode::kTrain && opts.layerdrop > 0.0;
  if (drop && !opts.rng) throw Error("invalid_argument", "LayerDrop in train mode needs an RNG");
  Output out;
  Matrix<S> x = Embed(features, mask, cache ? &cache->proj_cache : nullptr);
  out.skipped.assign(layers.size(), 0);
  if (cache) {
    cache->mask = mask ? *mask : FrameMask(static_cast<size_t>(features.rows()), 0);
    cache->block_caches.resize(layers.size());
  }
  for (size_t l = 0; l < layers.size(); ++l) {
    if (drop && opts.rng->Bernoulli(opts.layerdrop)) {
      out.skipped[l] = 1;
      continue;
    }
    x = layers[l].Forward(x, cache ? &cache->block_caches[l] : nullptr);
  }
  out.hidden = final_norm.Forward(x, cache ? &cache->norm_cache : nullptr);
  if (opts.logits) out.logits = cluster_head.Forward(out.hidden, cache ? &cache->head_cache : nullptr);
  if (cache) {
    cache->skipped = out.skipped;
    cache->has_logits = opts.logits;
  }
  return out;
}

template <typename S>
void Encoder<S>::Backward(const Cache& cache, const Matrix<S>* d_hidden, const Matrix<S>* d_logits) {
  const Eigen::Index t = static_cast<Eigen::Index>(cache.mask.size());
  Matrix<S> dh = Matrix<S>::Zero(t, config.model_dim);
  if (d_hidden) dh += *d_hidden;
  if (d_logits) {
    if (!cache.has_logits) throw Error("invalid_argument", "logit gradient given but forward skipped logits");
    dh += cluster_head.Backward(cache.head_cache, *d_logits);
  }
  Matrix<S> dx = final_norm.Backward(cache.norm_cache, dh);
  for (size_t l = layers.size(); l-- > 0;) {
    if (cache.skipped[l]) continue;
    dx = layers[l].Backward(cache.block_caches[l], dx);
  }
  for (Eigen::Index i = 0; i < t; ++i) {
    if (!cache.mask[static_cast<size_t>(i)]) continue;
    mask_embedding.grad.row(0) += dx.row(i);
    dx.row(i).setZero();
  }
  input_proj.Backward(cache.proj_cache, dx);
}

template <typename S>
Matrix<S> Encoder<S>::HiddenAtLayer(const FeatureMatrix& features, int layer) const {
  if (layer < 0 || layer > config.num_layers)
    throw Error("invalid_argument", "layer index " + std::to_string(layer) + " out of range [0, " +
                                        std::to_string(config.num_layers) + "]");
  Matrix<S> x = Embed(features, nullptr, nullptr);
  for (int l = 0; l < layer; ++l) x = layers[static_cast<size_t>(l)].Forward(x, nullptr);
  if (layer == config.num_layers) x = final_norm.Forward(x, nullptr);
  return x;
}

template <typename S>
void Encoder<S>::Collect(const std::string& prefix, nn::ParamStore<S>& store, bool include_cluster_head) {
  input_proj.Collect(prefix + ".input_proj", store);
  store.Add(prefix + ".mask_embedding", mask_embedding);
  for (size_t l = 0; l < layers.size(); ++l) layers[l].Collect(prefix + ".layers." + std::to_string(l), store);
  final_norm.Collect(prefix + ".final_norm", store);
  if (include_cluster_head) cluster_head.Collect(prefix + ".cluster_head", store);
}

template class Encoder<float>;
template class Encoder<double>;

template <typename S>
DaptLossResult<S> DaptLoss(const Matrix<S>& logits, const std::vector<int>& targets, const FrameMask& mask,
                           bool normalize) {
  nn::CheckShape(static_cast<size_t>(logits.rows()) == targets.size() && targets.size() == mask.size(), "DaptLoss");
  DaptLossResult<S> out;
  out.dlogits = Matrix<S>::Zero(logits.rows(), logits.cols());
  for (size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) ++out.masked;
  if (out.masked == 0) return out;
  const double scale = normalize ? 1.0 / static_cast<double>(out.masked) : 1.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    if (!mask[static_cast<size_t>(t)]) continue;
    const int z = targets[static_cast<size_t>(t)];
    if (z < 0 || z >= logits.cols())
      throw Error("invalid_argument", "pseudo-label " + std::to_string(z) + " outside prediction head range");
    out.loss += nn::NegLogSoftmax<S>(logits.row(t), z);
    const S mx = logits.row(t).maxCoeff();
    nn::RowVector<S> p = (logits.row(t).array() - mx).exp().matrix();
    p /= p.sum();
    p[z] -= S(1);
    out.dlogits.row(t) = p * static_cast<S>(scale);
  }
  out.loss *= scale;
  return out;
}

template DaptLossResult<float> DaptLoss(const Matrix<float>&, const std::vector<int>&, const FrameMask&, bool);
template DaptLossResult<double> DaptLoss(const Matrix<double>&, const std::vector<int>&, const FrameMask&, bool);

std::pair<int, int> CropWindow(int num_frames, int crop, Rng* rng) {
  if (crop <= 0 || num_frames <= crop) return {0, num_frames};
  const int start = rng ? static_cast<int>(rng->Below(static_cast<uint64_t>(num_frames - crop + 1))) : 0;
  return {start, crop};
}

FeatureMatrix CropRows(const FeatureMatrix& m, std::pair<int, int> window) {
  return m.middleRows(window.first, window.second);
}

std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> FeatureStats(const std::vector<const FeatureMatrix*>& data) {
  if (data.empty()) throw Error("data", "feature statistics over an empty corpus");
  const Eigen::Index d = data.front()->cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(d);
  double n = 0;
  for (const FeatureMatrix* m : data) {
    if (m->cols() != d) throw Error("shape", "inconsistent feature dimensions");
    sum += m->colwise().sum();
    n += static_cast<double>(m->rows());
  }
  const Eigen::RowVectorXd mean = sum / n;
  for (const FeatureMatrix* m : data) sq += (m->rowwise() - mean).array().square().colwise().sum().matrix();
  Eigen::RowVectorXd sd = (sq / n).array().sqrt().matrix();
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(sd[i] > 1e-12)) sd[i] = 1.0;
  return {mean, sd};
}

double HeldoutDaptLoss(const Encoder<float>& encoder, const std::vector<DaptExample>& data,
                       const std::vector<FrameMask>& masks) {
  double total = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto out = encoder.Forward(*data[i].features, &masks[i], ForwardOptions{}, nullptr);
    const auto r = DaptLoss<float>(out.logits, data[i].labels, masks[i], false);
    total += r.loss;
    count += r.masked;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

namespace {

void CheckExamples(const std::vector<DaptExample>& data, int num_classes) {
  for (const auto& ex : data) {
    if (!ex.features) throw Error("invalid_argument", "DAPT example without features");
    if (static_cast<Eigen::Index>(ex.labels.size()) != ex.features->rows())
      throw Error("data", "pseudo-label count does not match frame count");
    for (int z : ex.labels)
      if (z < 0 || z >= num_classes)
        throw Error("data", "pseudo-label " + std::to_string(z) + " outside prediction head range");
  }
}

}  // namespace

DaptReport DaptTrain(Encoder<float>& encoder, const std::vector<DaptExample>& train,
                     const std::vector<DaptExample>& heldout, const nn::TrainConfig& cfg, const DaptOptions& opts,
                     const std::function<void(int, double, double)>& on_epoch) {
  cfg.Validate();
  if (train.empty()) throw Error("data", "DAPT corpus is empty");
  CheckExamples(train, encoder.config.num_classes);
  CheckExamples(heldout, encoder.config.num_classes);

  Rng rng(cfg.seed);
  Rng heldout_rng(DeriveSeed(cfg.seed, 17));
  std::vector<FrameMask> heldout_masks;
  for (const auto& ex : heldout)
    heldout_masks.push_back(DrawMask(static_cast<int>(ex.features->rows()), opts.mask, heldout_rng));

  DaptReport report;
  if (!heldout.empty()) report.heldout_loss.push_back(HeldoutDaptLoss(encoder, heldout, heldout_masks));

  nn::ParamStore<float> store;
  encoder.Collect("encoder", store, true);

  const size_t n = train.size();
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  const int64_t steps_per_epoch = static_cast<int64_t>((n + batch - 1) / batch);
  const int64_t total_steps = steps_per_epoch * cfg.epochs;
  int64_t step = 0;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  struct Item {
    FeatureMatrix features;
    std::vector<int> labels;
    FrameMask mask;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    double epoch_loss = 0.0;
    size_t epoch_masked = 0;
    for (size_t start = 0; start < n; start += batch) {
      const size_t end = std::min(n, start + batch);
      std::vector<Item> items;
      size_t batch_masked = 0;
      for (size_t i = start; i < end; ++i) {
        const DaptExample& ex = train[order[i]];
        const auto window = CropWindow(static_cast<int>(ex.features->rows()), opts.crop_frames, &rng);
        Item item;
        item.features = CropRows(*ex.features, window);
        item.labels.assign(ex.labels.begin() + window.first, ex.labels.begin() + window.first + window.second);
        item.mask = DrawMask(window.second, opts.mask, rng);
        const size_t m = static_cast<size_t>(std::count(item.mask.begin(), item.mask.end(), 1));
        if (m == 0) ++report.empty_masks;
        batch_masked += m;
        items.push_back(std::move(item));
      }

      store.ZeroGrad();
      const float scale = opts.normalize_loss && batch_masked ? 1.0f / static_cast<float>(batch_masked) : 1.0f;
      for (const Item& item : items) {
        typename Encoder<float>::Cache cache;
        ForwardOptions fo{Mode::kTrain, cfg.layerdrop, &rng, true};
        const auto out = encoder.Forward(item.features, &item.mask, fo, &cache);
        auto r = DaptLoss<float>(out.logits, item.labels, item.mask, false);
        epoch_loss += r.loss;
        epoch_masked += r.masked;
        if (r.masked == 0) continue;
        r.dlogits *= scale;
        encoder.Backward(cache, nullptr, &r.dlogits);
      }
      const double lr = nn::LearningRateAt(step, total_steps, cfg);
      ++step;
      if (batch_masked == 0) continue;
      nn::ClipGradNorm(store, cfg.max_grad_norm);
      nn::AdamWStep(store, cfg, lr, step);
    }
    const double train_loss = epoch_masked ? epoch_loss / static_cast<double>(epoch_masked) : 0.0;
    report.train_loss.push_back(train_loss);
    double held = 0.0;
    if (!heldout.empty()) {
      held = HeldoutDaptLoss(encoder, heldout, heldout_masks);
      report.heldout_loss.push_back(held);
    }
    if (on_epoch) on_epoch(epoch + 1, train_loss, held);
  }
  ++encoder.dapt_stages;
  return report;
}

}  // namespace pdspeech::model
