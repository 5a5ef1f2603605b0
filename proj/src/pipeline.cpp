// src/pipeline.cpp

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

#include "pdspeech/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "pdspeech/baselines.hpp"
#include "pdspeech/refit.hpp"

namespace pdspeech::pipeline {

namespace fs = std::filesystem;

namespace {

void Log(const Context& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create directory " + dir + ": " + ec.message());
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first failure (by
// index) is rethrown.
template <typename Fn>
void ParallelFor(size_t n, int jobs, Fn fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min<int>(jobs, static_cast<int>(n)); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string Join(const fs::path& a, const std::string& b) { return (a / b).string(); }

eval::FoldPlan LoadFolds(const std::string& path) { return eval::FoldPlan::FromJson(ReadJson(path)); }

std::string Fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void WriteJson(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("io", "short write on " + path);
}

nlohmann::json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", path + ": " + e.what());
  }
}

void WriteSidecar(const std::string& artifact, const Context& ctx, const std::vector<std::string>& inputs,
                  const nlohmann::json& extra, const std::string& config_hash) {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"checksum", FileChecksum(p)}});
  WriteJson(artifact + ".prov.json", {{"artifact", fs::path(artifact).filename().string()},
                                      {"command", ctx.command},
                                      {"config_hash", config_hash.empty() ? ctx.cfg.Hash() : config_hash},
                                      {"seed", ctx.cfg.seed},
                                      {"inputs", in},
                                      {"extra", extra}});
}

std::string SidecarHash(const std::string& artifact) {
  const std::string side = artifact + ".prov.json";
  if (!fs::exists(side)) return "";
  return ReadJson(side).value("config_hash", "");
}

void CheckHash(const Context& ctx, const std::string& hash, const std::string& what) {
  if (hash.empty() || hash == ctx.cfg.Hash() || ctx.force) return;
  throw Error("config", what + " was produced with config " + hash + ", current config is " + ctx.cfg.Hash() +
                            " (use --force to override)");
}

data::Manifest RunSynth(const Context& ctx, const std::string& out_dir) {
  synth::SynthConfig sc = ctx.cfg.synth;
  sc.seed = DeriveSeed(ctx.cfg.seed, 1);
  data::Manifest m = synth::Generate(sc, out_dir);
  WriteSidecar(Join(out_dir, "manifest.jsonl"), ctx, {}, {{"records", m.records.size()}});
  Log(ctx, "synth: " + std::to_string(m.records.size()) + " utterances in " + out_dir);
  return m;
}

PrepStats RunPrep(const Context& ctx, const std::string& manifest_path, const std::string& out_dir) {
  const data::Manifest in = data::ReadManifest(manifest_path);
  EnsureDir(Join(out_dir, "wav"));
  const size_t n = in.records.size();
  std::vector<data::UtteranceRecord> out(n);
  std::vector<char> keep(n, 0);
  std::vector<double> dur_in(n, 0.0);
  ParallelFor(n, ctx.jobs, [&](size_t i) {
    const auto& r = in.records[i];
    audio::AudioClip clip = audio::LoadWav(in.Resolve(r));
    dur_in[i] = clip.DurationSeconds();
    if (clip.sample_rate != audio::kWorkingRate) clip = audio::Resample(clip, audio::kWorkingRate);
    const audio::SilenceResult res = audio::RemoveSilence(clip, ctx.cfg.silence);
    if (res.fully_silent) return;
    const std::string rel = "wav/" + r.utterance_id + ".wav";
    audio::WriteWav(Join(out_dir, rel), res.clip);
    out[i] = r;
    out[i].path = rel;
    out[i].duration = res.clip.DurationSeconds();
    keep[i] = 1;
  });
  PrepStats st;
  data::Manifest m;
  m.base_dir = out_dir;
  for (size_t i = 0; i < n; ++i) {
    ++st.utterances;
    st.seconds_in += dur_in[i];
    if (!keep[i]) {
      ++st.fully_silent;
      Log(ctx, "prep: " + in.records[i].utterance_id + " is fully silent, dropped");
      continue;
    }
    st.seconds_out += out[i].duration;
    m.records.push_back(out[i]);
  }
  const std::string path = Join(out_dir, "manifest.jsonl");
  data::WriteManifest(path, m);
  WriteSidecar(path, ctx, {manifest_path},
               {{"fully_silent", st.fully_silent}, {"seconds_in", st.seconds_in}, {"seconds_out", st.seconds_out}});
  Log(ctx, "prep: " + std::to_string(m.records.size()) + " utterances, " + Fmt(st.seconds_in) + " s -> " +
               Fmt(st.seconds_out) + " s");
  return st;
}

data::Manifest RunMfcc(const Context& ctx, const std::string& manifest_path, const std::string& out_dir) {
  const data::Manifest in = data::ReadManifest(manifest_path);
  EnsureDir(Join(out_dir, "feats"));
  const std::string hash = ctx.cfg.Hash();
  data::Manifest m = in;
  m.base_dir = out_dir;
  ParallelFor(in.records.size(), ctx.jobs, [&](size_t i) {
    const auto& r = in.records[i];
    audio::AudioClip clip = audio::LoadWav(in.Resolve(r));
    if (clip.sample_rate != audio::kWorkingRate) clip = audio::Resample(clip, audio::kWorkingRate);
    const feat::FeatureMatrix f = feat::Mfcc(clip, ctx.cfg.mfcc);
    const std::string rel = "feats/" + r.utterance_id + ".feat";
    feat::WriteFeatureCache(Join(out_dir, rel), f, 1000.0 / ctx.cfg.mfcc.hop_ms, hash);
    m.records[i].path = rel;
  });
  const std::string path = Join(out_dir, "manifest.jsonl");
  data::WriteManifest(path, m);
  WriteSidecar(path, ctx, {manifest_path}, {{"mfcc_config", ctx.cfg.mfcc.Hash()}});
  Log(ctx, "mfcc: " + std::to_string(m.records.size()) + " feature caches in " + out_dir);
  return m;
}

std::vector<const feat::FeatureMatrix*> FeatureSet::Pointers() const {
  std::vector<const feat::FeatureMatrix*> p;
  for (const auto& f : features) p.push_back(&f);
  return p;
}

FeatureSet LoadFeatures(const Context& ctx, const std::string& manifest_path) {
  FeatureSet fs_;
  fs_.manifest = data::ReadManifest(manifest_path);
  fs_.features.resize(fs_.manifest.records.size());
  const int dim = ctx.cfg.mfcc.OutputDim();
  ParallelFor(fs_.features.size(), ctx.jobs, [&](size_t i) {
    const std::string p = fs_.manifest.Resolve(fs_.manifest.records[i]);
    feat::CachedFeatures c = feat::ReadFeatureCache(p);
    if (c.matrix.cols() != dim)
      throw Error("shape", p + ": " + std::to_string(c.matrix.cols()) + " feature columns, config expects " +
                               std::to_string(dim));
    fs_.features[i] = std::move(c.matrix);
  });
  return fs_;
}

void WriteLabels(const std::string& path, const LabelSet& labels) {
  nlohmann::json l = nlohmann::json::object();
  for (const auto& [id, z] : labels.labels) l[id] = z;
  WriteJson(path, {{"kind", "pseudo_labels"},
                   {"k", labels.k},
                   {"stage", labels.stage},
                   {"feature_space", labels.feature_space},
                   {"config_hash", labels.config_hash},
                   {"labels", l}});
}

LabelSet ReadLabels(const std::string& path) {
  const nlohmann::json j = ReadJson(path);
  try {
    if (j.at("kind") != "pseudo_labels") throw Error("format", path + ": not a pseudo-label file");
    LabelSet s;
    s.k = j.at("k").get<int>();
    s.stage = j.at("stage").get<int>();
    s.feature_space = j.at("feature_space").get<std::string>();
    s.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [id, z] : j.at("labels").items()) s.labels[id] = z.get<cluster::PseudoLabels>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", path + ": " + e.what());
  }
}

LabelSet RunPseudolabel(const Context& ctx, const std::string& features_manifest, int stage,
                        const std::string& checkpoint, const std::string& out_dir) {
  if (stage != 1 && stage != 2) throw Error("invalid_argument", "pseudo-label stage must be 1 or 2");
  const FeatureSet data = LoadFeatures(ctx, features_manifest);
  if (data.features.empty()) throw Error("data", "pseudo-labeling over an empty manifest");
  EnsureDir(out_dir);
  const auto& cc = ctx.cfg.cluster;
  LabelSet out;
  out.stage = stage;
  out.config_hash = ctx.cfg.Hash();
  cluster::KMeansResult fit;
  std::vector<std::string> inputs = {features_manifest};
  if (stage == 1) {
    Eigen::Index rows = 0;
    for (const auto& f : data.features) rows += (f.rows() + cc.subsample - 1) / cc.subsample;
    cluster::PointMatrix points(rows, ctx.cfg.mfcc.OutputDim());
    Eigen::Index r = 0;
    for (const auto& f : data.features)
      for (Eigen::Index t = 0; t < f.rows(); t += cc.subsample) points.row(r++) = f.row(t);
    fit = cluster::KMeansFit(points, cc.k_stage1, cc.max_iters, DeriveSeed(ctx.cfg.seed, 301));
    for (size_t i = 0; i < data.features.size(); ++i)
      out.labels[data.manifest.records[i].utterance_id] = cluster::Assign(fit.model, data.features[i]);
  } else {
    if (checkpoint.empty()) throw Error("invalid_argument", "stage 2 needs --checkpoint");
    const model::Checkpoint ck = model::LoadCheckpoint(checkpoint);
    inputs.push_back(checkpoint);
    cluster::RefitOptions ro;
    ro.layer = cc.stage2_layer;
    ro.k = cc.k_stage2;
    ro.max_iters = cc.max_iters;
    ro.subsample = cc.subsample;
    ro.seed = DeriveSeed(ctx.cfg.seed, 302);
    fit = cluster::RefitFromEncoder(ck.encoder, data.Pointers(), ro);
    const int layer = cluster::ResolveLayer(ck.encoder, cc.stage2_layer);
    for (size_t i = 0; i < data.features.size(); ++i)
      out.labels[data.manifest.records[i].utterance_id] =
          cluster::AssignLatent(fit.model, ck.encoder, data.features[i], layer);
  }
  out.k = fit.model.K();
  out.feature_space = fit.model.feature_space;
  const std::string model_path = Join(out_dir, "clusters.bin");
  const std::string labels_path = Join(out_dir, "labels.json");
  cluster::SaveClusterModel(model_path, fit.model);
  WriteLabels(labels_path, out);
  const nlohmann::json extra = {{"stage", stage}, {"k", out.k}, {"iterations", fit.iterations},
                                {"final_inertia", fit.inertia.empty() ? 0.0 : fit.inertia.back()}};
  WriteSidecar(model_path, ctx, inputs, extra);
  WriteSidecar(labels_path, ctx, inputs, extra);
  Log(ctx, "pseudolabel: stage " + std::to_string(stage) + ", K = " + std::to_string(out.k) + ", " +
               std::to_string(fit.iterations) + " iterations");
  return out;
}

model::DaptReport RunDapt(const Context& ctx, const std::string& features_manifest, const std::string& labels_path,
                          const std::string& init, const std::string& out_checkpoint) {
  const FeatureSet data = LoadFeatures(ctx, features_manifest);
  const LabelSet labels = ReadLabels(labels_path);

  // Speaker-level held-out split for the loss curve.
  std::vector<std::string> speakers;
  std::set<std::string> seen;
  for (const auto& r : data.manifest.records)
    if (seen.insert(r.speaker_id).second) speakers.push_back(r.speaker_id);
  if (speakers.size() < 2) throw Error("data", "pretraining needs at least two speakers");
  Rng rng(DeriveSeed(ctx.cfg.seed, 103));
  rng.Shuffle(speakers);
  const size_t n_held = std::clamp<size_t>(
      static_cast<size_t>(std::llround(ctx.cfg.dapt.heldout_fraction * static_cast<double>(speakers.size()))), 1,
      speakers.size() - 1);
  const std::set<std::string> held(speakers.begin(), speakers.begin() + static_cast<std::ptrdiff_t>(n_held));

  std::vector<model::DaptExample> train, heldout;
  std::vector<const feat::FeatureMatrix*> train_feats;
  for (size_t i = 0; i < data.features.size(); ++i) {
    const auto& r = data.manifest.records[i];
    auto it = labels.labels.find(r.utterance_id);
    if (it == labels.labels.end()) throw Error("data", "no pseudo-labels for " + r.utterance_id);
    model::DaptExample ex{&data.features[i], it->second};
    if (held.count(r.speaker_id)) {
      heldout.push_back(ex);
    } else {
      train.push_back(ex);
      train_feats.push_back(&data.features[i]);
    }
  }

  model::Encoder<float> enc;
  std::vector<std::string> inputs = {features_manifest, labels_path};
  if (!init.empty()) {
    enc = model::LoadCheckpoint(init).encoder;
    inputs.push_back(init);
    if (enc.config.num_classes != labels.k) enc.ResetClusterHead(labels.k, DeriveSeed(ctx.cfg.seed, 104));
  } else {
    model::EncoderConfig ec = ctx.cfg.encoder;
    ec.input_dim = ctx.cfg.mfcc.OutputDim();
    ec.num_classes = labels.k;
    enc = model::Encoder<float>(ec);
    enc.Init(DeriveSeed(ctx.cfg.seed, 105));
    const auto [mean, scale] = model::FeatureStats(train_feats);
    enc.SetInputStats(mean, scale);
  }

  model::DaptOptions opts;
  opts.mask = ctx.cfg.dapt.mask;
  opts.crop_frames = ctx.cfg.dapt.crop_frames;
  opts.normalize_loss = ctx.cfg.dapt.normalize_loss;
  const model::DaptReport rep = model::DaptTrain(enc, train, heldout, ctx.cfg.DaptTrain(), opts,
                                                 [&](int epoch, double tr, double he) {
                                                   Log(ctx, "dapt: epoch " + std::to_string(epoch) + " train " +
                                                                Fmt(tr) + " heldout " + Fmt(he));
                                                 });
  model::CheckpointMeta meta;
  meta.seed = ctx.cfg.seed;
  meta.config_hash = ctx.cfg.Hash();
  meta.provenance = {{"stage", "dapt"},
                     {"pseudo_label_stage", labels.stage},
                     {"heldout_loss", rep.heldout_loss},
                     {"train_loss", rep.train_loss}};
  model::SaveCheckpoint(out_checkpoint, enc, nullptr, meta);
  WriteSidecar(out_checkpoint, ctx, inputs, {{"heldout_loss", rep.heldout_loss}, {"empty_masks", rep.empty_masks}});
  return rep;
}

model::FinetuneReport RunFinetune(const Context& ctx, const std::string& features_manifest,
                                  const FinetuneRequest& req, const std::string& out_checkpoint) {
  const FeatureSet data = LoadFeatures(ctx, features_manifest);
  std::vector<std::string> inputs = {features_manifest};
  std::optional<eval::FoldPlan> plan;
  if (!req.folds_path.empty()) {
    plan = LoadFolds(req.folds_path);
    inputs.push_back(req.folds_path);
    if (req.fold < 0 || req.fold >= plan->k) throw Error("invalid_argument", "--fold outside the fold plan");
  }
  std::vector<model::LabeledExample> train;
  std::vector<const feat::FeatureMatrix*> train_feats;
  for (size_t i = 0; i < data.features.size(); ++i) {
    const auto& r = data.manifest.records[i];
    if (plan && plan->FoldOf(r.speaker_id) == req.fold) continue;
    if (!r.label) throw Error("data", "fine-tuning record " + r.utterance_id + " has no label");
    train.push_back({&data.features[i], *r.label, r.domain, r.speaker_id, r.utterance_id});
    train_feats.push_back(&data.features[i]);
  }

  model::Encoder<float> enc;
  if (!req.init.empty()) {
    enc = model::LoadCheckpoint(req.init).encoder;
    inputs.push_back(req.init);
  } else {
    model::EncoderConfig ec = ctx.cfg.encoder;
    ec.input_dim = ctx.cfg.mfcc.OutputDim();
    ec.num_classes = ctx.cfg.cluster.k_stage1;
    enc = model::Encoder<float>(ec);
    enc.Init(DeriveSeed(ctx.cfg.seed, 201));
    if (train_feats.empty()) throw Error("data", "fine-tuning set is empty");
    const auto [mean, scale] = model::FeatureStats(train_feats);
    enc.SetInputStats(mean, scale);
  }
  model::HeadParams<float> heads(enc.config.model_dim, ctx.cfg.heads);
  heads.Init(DeriveSeed(ctx.cfg.seed, 202));

  model::FinetuneOptions opts;
  opts.dat = req.dat;
  opts.freeze_encoder = req.freeze_encoder;
  opts.grl = ctx.cfg.grl;
  opts.crop_frames = ctx.cfg.finetune.crop_frames;
  opts.domain_steps = ctx.cfg.finetune.domain_steps;
  opts.domain_lr_scale = ctx.cfg.finetune.domain_lr_scale;
  nn::TrainConfig tc = ctx.cfg.FinetuneTrain();
  tc.seed = DeriveSeed(tc.seed, static_cast<uint64_t>(req.fold + 1));
  const model::FinetuneReport rep =
      model::Finetune(enc, heads, train, tc, opts, [&](int epoch, const model::LossReport& l) {
        Log(ctx, "finetune: epoch " + std::to_string(epoch) + " pd " + Fmt(l.pd) + " domain " + Fmt(l.domain) +
                     " dat " + Fmt(l.dat));
      });

  model::CheckpointMeta meta;
  meta.seed = ctx.cfg.seed;
  meta.config_hash = ctx.cfg.Hash();
  meta.ablation = {{"dat", req.dat},
                   {"freeze_encoder", req.freeze_encoder},
                   {"grl_lambda", ctx.cfg.grl.lambda},
                   {"dapt_stages", enc.dapt_stages},
                   {"fold", req.fold}};
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& l : rep.epochs) curve.push_back({{"pd", l.pd}, {"domain", l.domain}, {"dat", l.dat}});
  meta.provenance = {{"stage", "finetune"}, {"loss", curve}};
  model::SaveCheckpoint(out_checkpoint, enc, &heads, meta);
  WriteSidecar(out_checkpoint, ctx, inputs, meta.ablation);
  return rep;
}

std::vector<eval::PredictionRecord> RunPredict(const Context& ctx, const std::string& checkpoint,
                                               const std::string& features_manifest, const std::string& folds_path,
                                               int fold, const std::string& out_path) {
  const model::Checkpoint ck = model::LoadCheckpoint(checkpoint);
  if (!ck.heads) throw Error("data", checkpoint + " has no classification heads");
  const FeatureSet data = LoadFeatures(ctx, features_manifest);
  std::vector<std::string> inputs = {checkpoint, features_manifest};
  std::optional<eval::FoldPlan> plan;
  if (!folds_path.empty()) {
    plan = LoadFolds(folds_path);
    inputs.push_back(folds_path);
    if (fold < 0 || fold >= plan->k) throw Error("invalid_argument", "--fold outside the fold plan");
  }
  std::vector<size_t> idx;
  std::vector<const feat::FeatureMatrix*> feats;
  for (size_t i = 0; i < data.features.size(); ++i) {
    if (plan && plan->FoldOf(data.manifest.records[i].speaker_id) != fold) continue;
    if (!data.manifest.records[i].label)
      throw Error("data", "record " + data.manifest.records[i].utterance_id + " has no label to score against");
    idx.push_back(i);
    feats.push_back(&data.features[i]);
  }
  const std::vector<double> probs = model::PredictPd(ck.encoder, *ck.heads, feats);
  std::vector<eval::PredictionRecord> out;
  for (size_t j = 0; j < idx.size(); ++j) {
    const auto& r = data.manifest.records[idx[j]];
    out.push_back({r.utterance_id, r.speaker_id, *r.label, probs[j] >= 0.5 ? Label::kPD : Label::kHC, probs[j],
                   plan ? fold : 0});
  }
  eval::WritePredictions(out_path, out);
  WriteSidecar(out_path, ctx, inputs, {{"fold", fold}, {"records", out.size()}}, ck.meta.config_hash);
  return out;
}

namespace {

struct BaselineData {
  Eigen::MatrixXd rows;  // pooled vectors
  std::vector<Label> labels;
};

BaselineData Subset(const Eigen::MatrixXd& pooled, const std::vector<Label>& labels, const std::vector<size_t>& idx) {
  BaselineData d;
  d.rows.resize(static_cast<Eigen::Index>(idx.size()), pooled.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    d.rows.row(static_cast<Eigen::Index>(i)) = pooled.row(static_cast<Eigen::Index>(idx[i]));
    d.labels.push_back(labels[idx[i]]);
  }
  return d;
}

// Trains on `train` with regularizer `reg` and returns (label, score) per
// test row.
std::vector<std::pair<Label, double>> FitPredict(const std::string& method, const BaselineData& train,
                                                 const Eigen::MatrixXd& test, double reg,
                                                 const config::PipelineConfig& cfg, uint64_t seed) {
  std::vector<std::pair<Label, double>> out;
  if (method == "svm") {
    const auto m = baseline::SvmTrain(train.rows, train.labels, reg, cfg.eval.svm_epochs, seed);
    for (Eigen::Index i = 0; i < test.rows(); ++i) {
      const Eigen::VectorXd x = test.row(i).transpose();
      out.emplace_back(baseline::SvmPredict(m, x), m.Score(x));
    }
    return out;
  }
  const auto st = baseline::Standardizer::Fit(train.rows);
  std::vector<Eigen::VectorXd> ex;
  for (Eigen::Index i = 0; i < train.rows.rows(); ++i) ex.push_back(st.Apply(train.rows.row(i).transpose()));
  const auto dict = baseline::BuildDictionary(
      ex, train.labels, method == "lsrc" ? baseline::LsrcMode::kJoint : baseline::LsrcMode::kPerClass);
  baseline::FistaOptions fo;
  fo.lambda = reg;
  fo.max_iters = cfg.eval.fista_max_iters;
  fo.tol = cfg.eval.fista_tol;
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    const auto r = baseline::LsrcClassify(dict, st.Apply(test.row(i).transpose()), fo);
    out.emplace_back(r.label, r.residual_hc - r.residual_pd);
  }
  return out;
}

}  // namespace

std::vector<eval::PredictionRecord> RunBaseline(const Context& ctx, const std::string& features_manifest,
                                                const std::string& folds_path, const std::string& method,
                                                const std::string& out_path) {
  if (method != "lsrc" && method != "lsrc-cd" && method != "svm")
    throw Error("invalid_argument", "unknown baseline method '" + method + "' (lsrc, lsrc-cd, svm)");
  const FeatureSet data = LoadFeatures(ctx, features_manifest);
  const eval::FoldPlan plan = LoadFolds(folds_path);
  const auto& recs = data.manifest.records;
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(recs.size()), 2 * ctx.cfg.mfcc.OutputDim());
  std::vector<Label> labels;
  for (size_t i = 0; i < recs.size(); ++i) {
    if (!recs[i].label) throw Error("data", "baseline record " + recs[i].utterance_id + " has no label");
    pooled.row(static_cast<Eigen::Index>(i)) = feat::PooledVector(data.features[i]).transpose();
    labels.push_back(*recs[i].label);
  }
  const auto grid = baseline::LogGrid(ctx.cfg.eval.grid_lo, ctx.cfg.eval.grid_hi, ctx.cfg.eval.grid_points);

  std::vector<eval::PredictionRecord> out;
  nlohmann::json chosen = nlohmann::json::array();
  for (int f = 0; f < plan.k; ++f) {
    std::vector<size_t> tr, te;
    for (size_t i = 0; i < recs.size(); ++i) (plan.FoldOf(recs[i].speaker_id) == f ? te : tr).push_back(i);

    // Inner validation speakers, stratified by class.
    std::vector<std::string> cls_speakers[2];
    std::set<std::string> seen;
    for (size_t i : tr)
      if (seen.insert(recs[i].speaker_id).second) cls_speakers[ClassIndex(labels[i])].push_back(recs[i].speaker_id);
    Rng rng(DeriveSeed(ctx.cfg.seed, 401 + static_cast<uint64_t>(f)));
    std::set<std::string> val_speakers;
    for (auto& list : cls_speakers) {
      rng.Shuffle(list);
      if (list.size() < 2) throw Error("data", "fold " + std::to_string(f) + " has too few training speakers");
      const size_t nv = std::clamp<size_t>(
          static_cast<size_t>(std::ceil(ctx.cfg.eval.inner_validation * static_cast<double>(list.size()))), 1,
          list.size() - 1);
      val_speakers.insert(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(nv));
    }
    std::vector<size_t> inner_tr, inner_val;
    for (size_t i : tr) (val_speakers.count(recs[i].speaker_id) ? inner_val : inner_tr).push_back(i);
    const BaselineData itr = Subset(pooled, labels, inner_tr);
    const BaselineData ival = Subset(pooled, labels, inner_val);
    const uint64_t seed = DeriveSeed(ctx.cfg.seed, 451 + static_cast<uint64_t>(f));

    double best_reg = grid.front();
    double best_acc = -1.0;
    for (double reg : grid) {
      const auto pred = FitPredict(method, itr, ival.rows, reg, ctx.cfg, seed);
      size_t correct = 0;
      for (size_t i = 0; i < pred.size(); ++i) correct += pred[i].first == ival.labels[i];
      const double acc = static_cast<double>(correct) / static_cast<double>(pred.size());
      if (acc > best_acc) {
        best_acc = acc;
        best_reg = reg;
      }
    }
    const BaselineData full = Subset(pooled, labels, tr);
    const BaselineData test = Subset(pooled, labels, te);
    const auto pred = FitPredict(method, full, test.rows, best_reg, ctx.cfg, seed);
    for (size_t j = 0; j < te.size(); ++j) {
      const auto& r = recs[te[j]];
      out.push_back({r.utterance_id, r.speaker_id, labels[te[j]], pred[j].first, pred[j].second, f});
    }
    nlohmann::json c = {{"fold", f}, {"regularizer", best_reg}, {"validation_accuracy", best_acc}};
    if (method == "svm") c["C"] = 1.0 / (best_reg * static_cast<double>(tr.size()));
    chosen.push_back(c);
    Log(ctx, "baseline " + method + ": fold " + std::to_string(f) + " regularizer " + Fmt(best_reg) +
                 " validation accuracy " + Fmt(best_acc));
  }
  eval::WritePredictions(out_path, out);
  WriteSidecar(out_path, ctx, {features_manifest, folds_path}, {{"method", method}, {"selected", chosen}});
  return out;
}

eval::FoldPlan RunFolds(const Context& ctx, const std::string& manifest_path, const std::string& out_path) {
  const data::Manifest m = data::ReadManifest(manifest_path);
  const eval::FoldPlan plan = eval::MakeFolds(data::Speakers(m), ctx.cfg.eval.folds, DeriveSeed(ctx.cfg.seed, 501));
  nlohmann::json j = plan.ToJson();
  j["config_hash"] = ctx.cfg.Hash();
  WriteJson(out_path, j);
  WriteSidecar(out_path, ctx, {manifest_path});
  return plan;
}

nlohmann::json RunEval(const Context& ctx, const std::vector<std::string>& prediction_paths, int k,
                       const std::string& out_path) {
  if (prediction_paths.empty()) throw Error("invalid_argument", "eval needs at least one prediction file");
  std::vector<eval::PredictionRecord> all;
  std::string hash;
  for (const auto& p : prediction_paths) {
    const std::string h = SidecarHash(p);
    if (!h.empty()) {
      if (hash.empty()) hash = h;
      else if (h != hash && !ctx.force)
        throw Error("config", p + " was produced with config " + h + ", other predictions with " + hash +
                                  " (use --force to override)");
    }
    auto preds = eval::ReadPredictions(p);
    all.insert(all.end(), preds.begin(), preds.end());
  }
  if (hash.empty()) hash = ctx.cfg.Hash();
  const nlohmann::json report = eval::BuildReport(all, k, hash, ctx.cfg.seed);
  WriteJson(out_path, report);
  WriteSidecar(out_path, ctx, prediction_paths);
  Log(ctx, "eval: " + std::to_string(all.size()) + " predictions over " + std::to_string(k) + " folds -> " + out_path);
  return report;
}

nlohmann::json RunReport(const Context& ctx, const std::vector<std::string>& report_paths, const std::string& out_path) {
  if (report_paths.empty()) throw Error("invalid_argument", "report needs at least one input");
  nlohmann::json rows = nlohmann::json::array();
  std::string hash;
  for (const auto& p : report_paths) {
    const nlohmann::json r = ReadJson(p);
    if (r.value("kind", "") != "report") throw Error("format", p + " is not an eval report");
    const std::string h = r.at("config_hash").get<std::string>();
    if (hash.empty()) hash = h;
    else if (h != hash && !ctx.force)
      throw Error("config", p + " has config hash " + h + ", expected " + hash + " (use --force to override)");
    rows.push_back({{"name", fs::path(p).stem().string()},
                    {"config_hash", h},
                    {"average", r.at("average")},
                    {"pooled", r.at("pooled")}});
  }
  const nlohmann::json summary = {{"kind", "summary"}, {"config_hash", hash}, {"rows", rows}};
  WriteJson(out_path, summary);
  WriteSidecar(out_path, ctx, report_paths);
  return summary;
}

}  // namespace pdspeech::pipeline
