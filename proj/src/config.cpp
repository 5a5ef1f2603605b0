// src/config.cpp

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

#include "pdspeech/config.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <variant>

#include "toml.hpp"

namespace pdspeech::config {

namespace {

using Target = std::variant<int*, double*, bool*, uint64_t*, std::vector<double>*>;

constexpr const char* kPublished = "published recipe";
constexpr const char* kDesk = "desk choice";

struct Field {
  std::string section;  // empty = top level
  std::string key;
  Target target;
  const char* provenance;
  const char* help;
};

void AddTrain(std::vector<Field>& f, const std::string& s, nn::TrainConfig& t, const char* epochs_help) {
  f.push_back({s, "learning_rate", &t.learning_rate, kPublished, "AdamW peak learning rate"});
  f.push_back({s, "beta1", &t.beta1, kDesk, "AdamW first-moment decay"});
  f.push_back({s, "beta2", &t.beta2, kDesk, "AdamW second-moment decay"});
  f.push_back({s, "adam_eps", &t.adam_eps, kDesk, "AdamW denominator epsilon"});
  f.push_back({s, "weight_decay", &t.weight_decay, kDesk, "decoupled weight decay"});
  f.push_back({s, "epochs", &t.epochs, kPublished, epochs_help});
  f.push_back({s, "batch_size", &t.batch_size, kPublished, "utterances per optimizer step"});
  f.push_back({s, "max_grad_norm", &t.max_grad_norm, kPublished, "global gradient-norm clip"});
  f.push_back({s, "layerdrop", &t.layerdrop, kPublished, "probability of skipping an encoder layer"});
  f.push_back({s, "warmup_fraction", &t.warmup_fraction, kDesk, "share of steps in linear warmup"});
}

std::vector<Field> Fields(PipelineConfig& c) {
  std::vector<Field> f;
  f.push_back({"", "seed", &c.seed, kDesk, "base seed; every stage derives its own stream"});

  f.push_back({"silence", "rms_window", &c.silence.rms_window, kPublished, "RMS window in samples"});
  f.push_back({"silence", "rms_threshold", &c.silence.rms_threshold, kPublished, "silence threshold on normalized amplitude"});
  f.push_back({"silence", "min_silence_ms", &c.silence.min_silence_ms, kPublished, "silent runs longer than this are removed"});

  f.push_back({"mfcc", "frame_ms", &c.mfcc.frame_ms, kDesk, "analysis frame length"});
  f.push_back({"mfcc", "hop_ms", &c.mfcc.hop_ms, kDesk, "frame hop"});
  f.push_back({"mfcc", "mel_filters", &c.mfcc.mel_filters, kDesk, "triangular mel filters"});
  f.push_back({"mfcc", "base_coeffs", &c.mfcc.base_coeffs, kPublished, "cepstra per frame (x3 with deltas = 39)"});
  f.push_back({"mfcc", "delta", &c.mfcc.delta, kPublished, "append first-order deltas"});
  f.push_back({"mfcc", "delta_delta", &c.mfcc.delta_delta, kPublished, "append second-order deltas"});
  f.push_back({"mfcc", "preemphasis", &c.mfcc.preemphasis, kDesk, "pre-emphasis coefficient"});
  f.push_back({"mfcc", "low_hz", &c.mfcc.low_hz, kDesk, "lowest filterbank edge"});
  f.push_back({"mfcc", "high_hz", &c.mfcc.high_hz, kDesk, "highest filterbank edge (0 = Nyquist)"});
  f.push_back({"mfcc", "log_floor", &c.mfcc.log_floor, kDesk, "floor applied before the log"});

  f.push_back({"cluster", "k_stage1", &c.cluster.k_stage1, kPublished, "k-means clusters on MFCC frames"});
  f.push_back({"cluster", "k_stage2", &c.cluster.k_stage2, kPublished, "k-means clusters on encoder latents"});
  f.push_back({"cluster", "max_iters", &c.cluster.max_iters, kDesk, "Lloyd iterations"});
  f.push_back({"cluster", "subsample", &c.cluster.subsample, kDesk, "fit on every n-th frame"});
  f.push_back({"cluster", "stage2_layer", &c.cluster.stage2_layer, kDesk, "encoder layer for stage 2 (-1 = middle)"});

  f.push_back({"encoder", "model_dim", &c.encoder.model_dim, kDesk, "hidden width (full scale 768)"});
  f.push_back({"encoder", "num_layers", &c.encoder.num_layers, kDesk, "transformer blocks (full scale 12)"});
  f.push_back({"encoder", "num_heads", &c.encoder.num_heads, kDesk, "attention heads (full scale 12)"});
  f.push_back({"encoder", "ff_dim", &c.encoder.ff_dim, kDesk, "feed-forward width (full scale 3072)"});

  f.push_back({"heads", "hidden_dim", &c.heads.hidden_dim, kPublished, "frame projection width of both heads"});
  f.push_back({"heads", "num_domains", &c.heads.num_domains, kPublished, "domain classifier outputs"});

  AddTrain(f, "dapt", c.dapt.train, "masked-prediction pretraining epochs");
  f.push_back({"dapt", "mask_start_prob", &c.dapt.mask.start_prob, kDesk, "per-frame probability of starting a mask span"});
  f.push_back({"dapt", "mask_span", &c.dapt.mask.span, kDesk, "frames per mask span"});
  f.push_back({"dapt", "crop_frames", &c.dapt.crop_frames, kDesk, "random crop length per utterance"});
  f.push_back({"dapt", "normalize_loss", &c.dapt.normalize_loss, kDesk, "divide the masked loss by the masked count"});
  f.push_back({"dapt", "heldout_fraction", &c.dapt.heldout_fraction, kDesk, "speakers held out for the loss curve"});

  AddTrain(f, "finetune", c.finetune.train, "fine-tuning epochs");
  f.push_back({"finetune", "crop_frames", &c.finetune.crop_frames, kDesk, "random crop length per utterance"});
  f.push_back({"finetune", "domain_steps", &c.finetune.domain_steps, kDesk, "domain head updates per batch (1 = plain reversal)"});
  f.push_back({"finetune", "domain_lr_scale", &c.finetune.domain_lr_scale, kDesk, "domain head learning rate multiplier"});

  f.push_back({"grl", "lambda", &c.grl.lambda, kPublished, "gradient reversal scale"});

  f.push_back({"eval", "folds", &c.eval.folds, kPublished, "speaker-disjoint cross-validation folds"});
  f.push_back({"eval", "unlabeled_fraction", &c.eval.unlabeled_fraction, kDesk, "speakers moved to the unlabeled pretraining split"});
  f.push_back({"eval", "inner_validation", &c.eval.inner_validation, kDesk, "training speakers used to pick baseline hyperparameters"});
  f.push_back({"eval", "grid_lo", &c.eval.grid_lo, kDesk, "smallest baseline regularizer"});
  f.push_back({"eval", "grid_hi", &c.eval.grid_hi, kDesk, "largest baseline regularizer"});
  f.push_back({"eval", "grid_points", &c.eval.grid_points, kDesk, "log-spaced grid size"});
  f.push_back({"eval", "svm_epochs", &c.eval.svm_epochs, kDesk, "Pegasos passes over the data"});
  f.push_back({"eval", "fista_max_iters", &c.eval.fista_max_iters, kDesk, "L1 solver iteration cap"});
  f.push_back({"eval", "fista_tol", &c.eval.fista_tol, kDesk, "L1 solver relative objective tolerance"});

  auto& s = c.synth;
  f.push_back({"synth", "num_domains", &s.num_domains, kDesk, "synthetic domains (2 or 4)"});
  f.push_back({"synth", "speakers_per_cell", &s.speakers_per_cell, kDesk, "speakers per (domain, class)"});
  f.push_back({"synth", "utterances_per_speaker", &s.utterances_per_speaker, kDesk, "utterances per speaker"});
  f.push_back({"synth", "utterance_seconds", &s.utterance_seconds, kDesk, "utterance length"});
  f.push_back({"synth", "domain_tilt", &s.domain_tilt, kDesk, "per-domain spectral tilt coefficient"});
  f.push_back({"synth", "domain_f0_offset", &s.domain_f0_offset, kDesk, "per-domain f0 offset in Hz"});
  f.push_back({"synth", "tremor_depth", &s.tremor_depth, kDesk, "PD amplitude tremor depth"});
  f.push_back({"synth", "tremor_min_hz", &s.tremor_min_hz, kDesk, "lowest tremor rate"});
  f.push_back({"synth", "tremor_max_hz", &s.tremor_max_hz, kDesk, "highest tremor rate"});
  f.push_back({"synth", "jitter_hc", &s.jitter_hc, kDesk, "HC cycle-length perturbation"});
  f.push_back({"synth", "jitter_pd", &s.jitter_pd, kDesk, "PD cycle-length perturbation"});
  f.push_back({"synth", "pause_multiplier_pd", &s.pause_multiplier_pd, kDesk, "PD pause length multiplier"});
  f.push_back({"synth", "long_pause_prob", &s.long_pause_prob, kDesk, "chance of a pause over 0.5 s"});
  f.push_back({"synth", "noise_floor", &s.noise_floor, kDesk, "additive noise standard deviation"});
  return f;
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string FormatValue(const Target& t) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<T, double>) return FormatDouble(*p);
        else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string s = "[";
          for (size_t i = 0; i < p->size(); ++i) s += (i ? ", " : "") + FormatDouble((*p)[i]);
          return s + "]";
        } else return std::to_string(*p);
      },
      t);
}

nlohmann::json JsonValue(const Target& t) {
  return std::visit([](auto* p) { return nlohmann::json(*p); }, t);
}

double NumberOf(const toml::node& n, const std::string& where) {
  if (auto i = n.as_integer()) return static_cast<double>(i->get());
  if (auto f = n.as_floating_point()) return f->get();
  throw Error("config", where + ": expected a number");
}

void Assign(const Field& field, const toml::node& n, const std::string& where) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          auto b = n.as_boolean();
          if (!b) throw Error("config", where + ": expected a boolean");
          *p = b->get();
        } else if constexpr (std::is_same_v<T, double>) {
          *p = NumberOf(n, where);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          auto a = n.as_array();
          if (!a) throw Error("config", where + ": expected an array of numbers");
          p->clear();
          for (size_t i = 0; i < a->size(); ++i) p->push_back(NumberOf(*a->get(i), where + "[" + std::to_string(i) + "]"));
        } else {
          auto i = n.as_integer();
          if (!i) throw Error("config", where + ": expected an integer");
          const int64_t v = i->get();
          if constexpr (std::is_same_v<T, uint64_t>) {
            if (v < 0) throw Error("config", where + ": must be >= 0");
            *p = static_cast<uint64_t>(v);
          } else {
            if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
              throw Error("config", where + ": integer out of range");
            *p = static_cast<int>(v);
          }
        }
      },
      field.target);
}

void ApplyTable(PipelineConfig& cfg, const toml::table& root, const std::string& origin) {
  auto fields = Fields(cfg);
  auto find = [&](const std::string& section, const std::string& key) -> const Field* {
    for (const auto& f : fields)
      if (f.section == section && f.key == key) return &f;
    return nullptr;
  };
  auto known_section = [&](const std::string& section) {
    for (const auto& f : fields)
      if (f.section == section) return true;
    return false;
  };
  for (const auto& [k, v] : root) {
    const std::string key(k.str());
    if (const auto* tbl = v.as_table()) {
      if (!known_section(key)) throw Error("config", origin + ": unknown section [" + key + "]");
      for (const auto& [k2, v2] : *tbl) {
        const std::string sub(k2.str());
        const Field* f = find(key, sub);
        if (!f) throw Error("config", origin + ": unknown key " + key + "." + sub);
        Assign(*f, v2, origin + ": " + key + "." + sub);
      }
    } else {
      const Field* f = find("", key);
      if (!f) throw Error("config", origin + ": unknown key " + key);
      Assign(*f, v, origin + ": " + key);
    }
  }
}

toml::table Parse(const std::string& text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << origin << ":" << e.source().begin.line << ": " << e.description();
    throw Error("config", os.str());
  }
}

}  // namespace

PipelineConfig::PipelineConfig() {
  dapt.train.epochs = 80;
  finetune.train.epochs = 40;
}

void PipelineConfig::Validate() const {
  silence.Validate();
  mfcc.Validate();
  if (cluster.k_stage1 < 1 || cluster.k_stage2 < 1) throw Error("config", "cluster counts must be >= 1");
  if (cluster.max_iters < 1) throw Error("config", "cluster.max_iters must be >= 1");
  if (cluster.subsample < 1) throw Error("config", "cluster.subsample must be >= 1");
  if (cluster.stage2_layer < -1 || cluster.stage2_layer > encoder.num_layers)
    throw Error("config", "cluster.stage2_layer must be -1 or within [0, encoder.num_layers]");
  model::EncoderConfig enc = encoder;
  enc.input_dim = mfcc.OutputDim();
  enc.Validate();
  if (heads.hidden_dim < 1 || heads.num_domains < 1) throw Error("config", "head dimensions must be >= 1");
  dapt.train.Validate();
  finetune.train.Validate();
  if (!(dapt.mask.start_prob >= 0 && dapt.mask.start_prob <= 1)) throw Error("config", "dapt.mask_start_prob must lie in [0, 1]");
  if (dapt.mask.span < 1) throw Error("config", "dapt.mask_span must be >= 1");
  if (dapt.crop_frames < 1 || finetune.crop_frames < 1) throw Error("config", "crop_frames must be >= 1");
  if (finetune.domain_steps < 1 || !(finetune.domain_lr_scale > 0))
    throw Error("config", "finetune.domain_steps must be >= 1 and finetune.domain_lr_scale > 0");
  if (!(dapt.heldout_fraction > 0 && dapt.heldout_fraction < 1)) throw Error("config", "dapt.heldout_fraction must lie in (0, 1)");
  grl.Validate();
  if (eval.folds < 2) throw Error("config", "eval.folds must be >= 2");
  if (!(eval.unlabeled_fraction > 0 && eval.unlabeled_fraction < 1)) throw Error("config", "eval.unlabeled_fraction must lie in (0, 1)");
  if (!(eval.inner_validation > 0 && eval.inner_validation < 1)) throw Error("config", "eval.inner_validation must lie in (0, 1)");
  if (!(eval.grid_lo > 0 && eval.grid_hi >= eval.grid_lo) || eval.grid_points < 1) throw Error("config", "bad eval grid");
  if (eval.svm_epochs < 1 || eval.fista_max_iters < 1 || !(eval.fista_tol >= 0)) throw Error("config", "bad baseline solver settings");
  synth.Validate();
}

nlohmann::json PipelineConfig::ToJson() const {
  auto fields = Fields(const_cast<PipelineConfig&>(*this));
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields) {
    if (f.section.empty()) j[f.key] = JsonValue(f.target);
    else j[f.section][f.key] = JsonValue(f.target);
  }
  return j;
}

std::string PipelineConfig::Hash() const { return HexDigest(Fnv1a64(ToJson().dump())); }

nn::TrainConfig PipelineConfig::DaptTrain() const {
  nn::TrainConfig t = dapt.train;
  t.seed = DeriveSeed(seed, 101);
  return t;
}

nn::TrainConfig PipelineConfig::FinetuneTrain() const {
  nn::TrainConfig t = finetune.train;
  t.seed = DeriveSeed(seed, 102);
  return t;
}

PipelineConfig ParseToml(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  ApplyTable(cfg, Parse(text, origin), origin);
  cfg.Validate();
  return cfg;
}

PipelineConfig LoadToml(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseToml(ss.str(), path);
}

void ApplyOverride(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("config", "override '" + assignment + "' is not key=value");
  std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  while (!key.empty() && key.back() == ' ') key.pop_back();
  const auto dot = key.find('.');
  const std::string doc = dot == std::string::npos ? key + " = " + value
                                                   : "[" + key.substr(0, dot) + "]\n" + key.substr(dot + 1) + " = " + value;
  ApplyTable(cfg, Parse(doc, "override"), "override");
  cfg.Validate();
}

std::string DefaultsTable() {
  PipelineConfig d;
  std::ostringstream os;
  for (const auto& f : Fields(d)) {
    const std::string name = f.section.empty() ? f.key : f.section + "." + f.key;
    os << "  " << name << " = " << FormatValue(f.target) << "  [" << f.provenance << "] " << f.help << "\n";
  }
  return os.str();
}

std::string DefaultsToml() {
  PipelineConfig d;
  std::ostringstream os;
  std::string section;
  for (const auto& f : Fields(d)) {
    if (f.section != section) {
      section = f.section;
      os << "\n[" << section << "]\n";
    }
    os << "# " << f.help << " (" << f.provenance << ")\n" << f.key << " = " << FormatValue(f.target) << "\n";
  }
  return os.str();
}

}  // namespace pdspeech::config
