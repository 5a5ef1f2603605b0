// src/heads.cpp

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

#include "pdspeech/heads.hpp"

#include <numeric>
#include <set>

namespace pdspeech::model {

HeadConfig HeadConfig::FromJson(const nlohmann::json& j) {
  HeadConfig c;
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.num_domains = j.at("num_domains").get<int>();
  if (c.hidden_dim < 1 || c.num_domains < 1) throw Error("config", "head dimensions must be positive");
  return c;
}

template class PoolingHead<float>;
template class PoolingHead<double>;

template <typename S>
Matrix<S> PdForward(const HeadParams<S>& heads, const Matrix<S>& hidden, Eigen::Index valid_frames,
                    typename PoolingHead<S>::Cache* cache) {
  if (hidden.rows() < 1) throw Error("invalid_argument", "PD head needs at least one frame");
  return heads.pd.Forward(hidden, cache, valid_frames);
}

template <typename S>
Matrix<S> DomainForward(const HeadParams<S>& heads, const Matrix<S>& hidden, const GrlConfig& grl,
                        Eigen::Index valid_frames, typename PoolingHead<S>::Cache* cache) {
  grl.Validate();
  if (hidden.rows() < 1) throw Error("invalid_argument", "domain head needs at least one frame");
  return heads.domain.Forward(GrlForward<S>(hidden), cache, valid_frames);
}

template Matrix<float> PdForward(const HeadParams<float>&, const Matrix<float>&, Eigen::Index,
                                 PoolingHead<float>::Cache*);
template Matrix<double> PdForward(const HeadParams<double>&, const Matrix<double>&, Eigen::Index,
                                  PoolingHead<double>::Cache*);
template Matrix<float> DomainForward(const HeadParams<float>&, const Matrix<float>&, const GrlConfig&, Eigen::Index,
                                     PoolingHead<float>::Cache*);
template Matrix<double> DomainForward(const HeadParams<double>&, const Matrix<double>&, const GrlConfig&,
                                      Eigen::Index, PoolingHead<double>::Cache*);

template <typename S>
DatLossResult<S> DatLosses(const Matrix<S>& pd_logits, const std::vector<int>& pd_labels, const Matrix<S>& dom_logits,
                           const std::vector<int>& domains, const GrlConfig& grl) {
  grl.Validate();
  auto pd = nn::SoftmaxCrossEntropy<S>(pd_logits, pd_labels);
  auto dom = nn::SoftmaxCrossEntropy<S>(dom_logits, domains);
  DatLossResult<S> out;
  out.report.pd = pd.loss;
  out.report.domain = dom.loss;
  out.report.dat = pd.loss + grl.lambda * dom.loss;
  out.d_pd_logits = std::move(pd.dlogits);
  out.d_dom_logits = std::move(dom.dlogits);
  return out;
}

template DatLossResult<float> DatLosses(const Matrix<float>&, const std::vector<int>&, const Matrix<float>&,
                                        const std::vector<int>&, const GrlConfig&);
template DatLossResult<double> DatLosses(const Matrix<double>&, const std::vector<int>&, const Matrix<double>&,
                                         const std::vector<int>&, const GrlConfig&);

namespace {

void CheckFinetuneData(const std::vector<LabeledExample>& data, const HeadParams<float>& heads,
                       const FinetuneOptions& opts) {
  if (data.empty()) throw Error("data", "fine-tuning set is empty");
  std::set<int> classes, domains;
  for (const auto& ex : data) {
    if (!ex.features) throw Error("invalid_argument", "labeled example without features");
    if (ex.domain < 0 || ex.domain >= heads.config.num_domains)
      throw Error("data", "domain id " + std::to_string(ex.domain) + " outside [0, " +
                              std::to_string(heads.config.num_domains) + ")");
    classes.insert(ClassIndex(ex.label));
    domains.insert(ex.domain);
  }
  if (classes.size() < 2) throw Error("data", "fine-tuning set contains a single class");
  if (opts.dat && domains.size() < 2)
    throw Error("data", "domain-adversarial training needs at least two domains in the training set");
}

}  // namespace

FinetuneReport Finetune(Encoder<float>& encoder, HeadParams<float>& heads, const std::vector<LabeledExample>& data,
                        const nn::TrainConfig& cfg, const FinetuneOptions& opts,
                        const std::function<void(int, const LossReport&)>& on_epoch) {
  cfg.Validate();
  opts.grl.Validate();
  if (opts.domain_steps < 1 || !(opts.domain_lr_scale > 0))
    throw Error("config", "domain_steps must be >= 1 and domain_lr_scale > 0");
  CheckFinetuneData(data, heads, opts);

  nn::ParamStore<float> main_group;
  if (!opts.freeze_encoder) encoder.Collect("encoder", main_group, false);
  heads.pd.Collect("pd_head", main_group);
  nn::ParamStore<float> domain_group;
  heads.domain.Collect("domain_head", domain_group);

  std::vector<Matrix<float>> frozen_hidden;
  if (opts.freeze_encoder) {
    frozen_hidden.reserve(data.size());
    ForwardOptions fo;
    fo.logits = false;
    for (const auto& ex : data) frozen_hidden.push_back(encoder.Forward(*ex.features, nullptr, fo, nullptr).hidden);
  }

  Rng rng(cfg.seed);
  const size_t n = data.size();
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  const int64_t steps_per_epoch = static_cast<int64_t>((n + batch - 1) / batch);
  const int64_t total_steps = steps_per_epoch * cfg.epochs;
  int64_t step = 0;
  int64_t domain_step = 0;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  FinetuneReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    LossReport sums;
    for (size_t start = 0; start < n; start += batch) {
      const size_t end = std::min(n, start + batch);
      const float inv_b = 1.0f / static_cast<float>(end - start);
      main_group.ZeroGrad();
      domain_group.ZeroGrad();
      std::vector<Matrix<float>> batch_hidden;
      for (size_t i = start; i < end; ++i) {
        const LabeledExample& ex = data[order[i]];
        typename Encoder<float>::Cache enc_cache;
        Matrix<float> hidden;
        if (opts.freeze_encoder) {
          hidden = frozen_hidden[order[i]];
        } else {
          const auto window = CropWindow(static_cast<int>(ex.features->rows()), opts.crop_frames, &rng);
          const FeatureMatrix feats = CropRows(*ex.features, window);
          ForwardOptions fo{Mode::kTrain, cfg.layerdrop, &rng, false};
          hidden = encoder.Forward(feats, nullptr, fo, &enc_cache).hidden;
        }

        PoolingHead<float>::Cache pd_cache, dom_cache;
        const Matrix<float> pd_logits = PdForward(heads, hidden, -1, &pd_cache);
        Matrix<float> d_hidden;
        if (opts.dat) {
          const Matrix<float> dom_logits = DomainForward(heads, hidden, opts.grl, -1, &dom_cache);
          auto losses = DatLosses<float>(pd_logits, {ClassIndex(ex.label)}, dom_logits, {ex.domain}, opts.grl);
          sums.pd += losses.report.pd;
          sums.domain += losses.report.domain;
          d_hidden = heads.pd.Backward(pd_cache, losses.d_pd_logits * inv_b);
          const Matrix<float> d_dom_hidden = heads.domain.Backward(dom_cache, losses.d_dom_logits * inv_b);
          d_hidden += GrlBackward<float>(d_dom_hidden, opts.grl);
        } else {
          auto ce = nn::SoftmaxCrossEntropy<float>(pd_logits, {ClassIndex(ex.label)});
          sums.pd += ce.loss;
          d_hidden = heads.pd.Backward(pd_cache, ce.dlogits * inv_b);
        }
        if (!opts.freeze_encoder) encoder.Backward(enc_cache, &d_hidden, nullptr);
        if (opts.dat && opts.domain_steps > 1) batch_hidden.push_back(std::move(hidden));
      }
      const double lr = nn::LearningRateAt(step, total_steps, cfg);
      ++step;
      nn::ClipGradNorm(main_group, cfg.max_grad_norm);
      nn::AdamWStep(main_group, cfg, lr, step);
      if (opts.dat) {
        nn::ClipGradNorm(domain_group, cfg.max_grad_norm);
        nn::AdamWStep(domain_group, cfg, lr * opts.domain_lr_scale, ++domain_step);
        // Extra adversary updates on the (now detached) batch features.
        for (int extra = 1; extra < opts.domain_steps; ++extra) {
          domain_group.ZeroGrad();
          for (size_t i = start; i < end; ++i) {
            PoolingHead<float>::Cache dom_cache;
            const Matrix<float> dom_logits = DomainForward(heads, batch_hidden[i - start], opts.grl, -1, &dom_cache);
            auto ce = nn::SoftmaxCrossEntropy<float>(dom_logits, {data[order[i]].domain});
            heads.domain.Backward(dom_cache, ce.dlogits * inv_b);
          }
          nn::ClipGradNorm(domain_group, cfg.max_grad_norm);
          nn::AdamWStep(domain_group, cfg, lr * opts.domain_lr_scale, ++domain_step);
        }
      }
    }
    LossReport mean;
    mean.pd = sums.pd / static_cast<double>(n);
    mean.domain = sums.domain / static_cast<double>(n);
    mean.dat = mean.pd + (opts.dat ? opts.grl.lambda * mean.domain : 0.0);
    report.epochs.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return report;
}

std::vector<double> PredictPd(const Encoder<float>& encoder, const HeadParams<float>& heads,
                              const std::vector<const FeatureMatrix*>& data) {
  std::vector<double> probs;
  probs.reserve(data.size());
  ForwardOptions fo;
  fo.logits = false;
  for (const FeatureMatrix* f : data) {
    const Matrix<float> hidden = encoder.Forward(*f, nullptr, fo, nullptr).hidden;
    const Matrix<float> p = nn::SoftmaxRows<float>(PdForward(heads, hidden));
    probs.push_back(static_cast<double>(p(0, ClassIndex(Label::kPD))));
  }
  return probs;
}

Eigen::RowVectorXd PooledHidden(const Encoder<float>& encoder, const FeatureMatrix& features) {
  ForwardOptions fo;
  fo.logits = false;
  const Matrix<float> hidden = encoder.Forward(features, nullptr, fo, nullptr).hidden;
  return hidden.colwise().mean().cast<double>();
}

}  // namespace pdspeech::model
