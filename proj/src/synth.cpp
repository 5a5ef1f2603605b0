// src/synth.cpp

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

#include "pdspeech/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "pdspeech/baselines.hpp"

namespace pdspeech::synth {

namespace fs = std::filesystem;

void SynthConfig::Validate() const {
  if (num_domains < 1 || num_domains > static_cast<int>(domain_tilt.size()) ||
      num_domains > static_cast<int>(domain_f0_offset.size()))
    throw Error("config", "synth.num_domains must be between 1 and the number of domain factor entries");
  if (speakers_per_cell < 1 || utterances_per_speaker < 1) throw Error("config", "synth counts must be positive");
  if (!(utterance_seconds >= 0.5)) throw Error("config", "synth.utterance_seconds must be >= 0.5");
  for (double t : domain_tilt)
    if (!(std::abs(t) < 1)) throw Error("config", "synth.domain_tilt entries must lie in (-1, 1)");
  if (!(tremor_depth >= 0 && tremor_depth < 1)) throw Error("config", "synth.tremor_depth must lie in [0, 1)");
  if (!(tremor_min_hz > 0 && tremor_max_hz >= tremor_min_hz)) throw Error("config", "bad synth tremor band");
  if (!(jitter_hc >= 0 && jitter_pd >= 0 && jitter_hc < 0.2 && jitter_pd < 0.2))
    throw Error("config", "synth jitter must lie in [0, 0.2)");
  if (!(pause_multiplier_pd > 0)) throw Error("config", "synth.pause_multiplier_pd must be > 0");
  if (!(long_pause_prob >= 0 && long_pause_prob <= 1)) throw Error("config", "synth.long_pause_prob must lie in [0, 1]");
  if (!(noise_floor >= 0 && noise_floor < 0.01)) throw Error("config", "synth.noise_floor must lie in [0, 0.01)");
}

nlohmann::json SynthConfig::ToJson() const {
  return {{"num_domains", num_domains},
          {"speakers_per_cell", speakers_per_cell},
          {"utterances_per_speaker", utterances_per_speaker},
          {"utterance_seconds", utterance_seconds},
          {"seed", seed},
          {"domain_tilt", domain_tilt},
          {"domain_f0_offset", domain_f0_offset},
          {"tremor_depth", tremor_depth},
          {"tremor_min_hz", tremor_min_hz},
          {"tremor_max_hz", tremor_max_hz},
          {"jitter_hc", jitter_hc},
          {"jitter_pd", jitter_pd},
          {"pause_multiplier_pd", pause_multiplier_pd},
          {"long_pause_prob", long_pause_prob},
          {"noise_floor", noise_floor}};
}

namespace {

constexpr int kRate = audio::kWorkingRate;

struct Voice {
  double f0 = 150.0;
  double level = 0.08;          // target RMS of voiced audio
  double formants[3][3] = {};   // three vowels x (F1, F2, F3)
};

Voice MakeVoice(const SynthConfig& cfg, const std::string& speaker_id, int domain) {
  Rng rng(DeriveSeed(cfg.seed, Fnv1a64(speaker_id)));
  Voice v;
  v.f0 = rng.Uniform(100.0, 210.0) + cfg.domain_f0_offset[static_cast<size_t>(domain)];
  v.level = rng.Uniform(0.05, 0.12);
  for (auto& f : v.formants) {
    f[0] = rng.Uniform(350.0, 850.0);
    f[1] = rng.Uniform(1000.0, 2200.0);
    f[2] = rng.Uniform(2400.0, 3300.0);
  }
  return v;
}

// Two-pole resonator with unit gain at DC scaled out by its peak gain.
void Resonate(std::vector<double>& x, double freq, double bandwidth) {
  const double r = std::exp(-M_PI * bandwidth / kRate);
  const double a1 = 2.0 * r * std::cos(2.0 * M_PI * freq / kRate);
  const double a2 = -r * r;
  const double g = 1.0 - r;
  double y1 = 0.0, y2 = 0.0;
  for (double& s : x) {
    const double y = g * s + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    s = y;
  }
}

std::vector<double> VoicedSegment(const SynthConfig& cfg, const Voice& v, Label label, size_t n, Rng& rng,
                                  double tremor_hz, double tremor_phase, size_t offset) {
  const bool pd = label == Label::kPD;
  const double jitter = pd ? cfg.jitter_pd : cfg.jitter_hc;
  std::vector<double> src(n, 0.0);
  // Slowly drifting intonation around the speaker's f0.
  const double f0_start = v.f0 * rng.Uniform(0.92, 1.08);
  const double f0_end = v.f0 * rng.Uniform(0.92, 1.08);
  double pos = rng.Uniform(0.0, kRate / f0_start);
  while (pos < static_cast<double>(n)) {
    const size_t i = static_cast<size_t>(pos);
    src[i] += 1.0;
    const double frac = pos / static_cast<double>(n);
    const double f0 = f0_start + (f0_end - f0_start) * frac;
    const double period = kRate / f0 * (1.0 + jitter * rng.Normal());
    pos += std::max(period, 20.0);
  }
  // Glottal low-pass (one real pole), then aspiration noise.
  double y = 0.0;
  for (double& s : src) s = y = s + 0.9 * y;
  for (double& s : src) s += 0.05 * rng.Normal();

  const auto& f = v.formants[rng.Below(3)];
  const double bw[3] = {80.0, 120.0, 180.0};
  for (int k = 0; k < 3; ++k) Resonate(src, f[k] * rng.Uniform(0.95, 1.05), bw[k]);

  // Raised-cosine edges and tremor.
  const size_t ramp = std::min<size_t>(n / 2, kRate / 50);
  for (size_t i = 0; i < n; ++i) {
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / ramp);
    if (n - 1 - i < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(n - 1 - i) / ramp));
    if (pd) {
      const double t = static_cast<double>(offset + i) / kRate;
      env *= 1.0 + cfg.tremor_depth * std::sin(2.0 * M_PI * tremor_hz * t + tremor_phase);
    }
    src[i] *= env;
  }
  return src;
}

}  // namespace

audio::AudioClip SynthesizeUtterance(const SynthConfig& cfg, const std::string& speaker_id, int domain, Label label,
                                     const std::string& utterance_id) {
  cfg.Validate();
  if (domain < 0 || domain >= cfg.num_domains) throw Error("invalid_argument", "domain outside synth config");
  const Voice voice = MakeVoice(cfg, speaker_id, domain);
  Rng rng(DeriveSeed(cfg.seed, Fnv1a64(utterance_id)));
  const bool pd = label == Label::kPD;
  const double tremor_hz = rng.Uniform(cfg.tremor_min_hz, cfg.tremor_max_hz);
  const double tremor_phase = rng.Uniform(0.0, 2.0 * M_PI);

  const size_t total = static_cast<size_t>(std::llround(cfg.utterance_seconds * kRate));
  std::vector<double> out;
  out.reserve(total);
  std::vector<char> voiced;
  voiced.reserve(total);
  auto pause = [&](size_t len) {
    out.insert(out.end(), len, 0.0);
    voiced.insert(voiced.end(), len, 0);
  };
  pause(static_cast<size_t>(rng.Uniform(0.02, 0.08) * kRate));
  while (out.size() < total) {
    const size_t seg = static_cast<size_t>(rng.Uniform(0.15, 0.40) * kRate);
    const auto s = VoicedSegment(cfg, voice, label, seg, rng, tremor_hz, tremor_phase, out.size());
    out.insert(out.end(), s.begin(), s.end());
    voiced.insert(voiced.end(), seg, 1);
    double gap = rng.Uniform(0.05, 0.20) * (pd ? cfg.pause_multiplier_pd : 1.0);
    gap = std::min(gap, 0.45);
    if (rng.Bernoulli(cfg.long_pause_prob)) gap = rng.Uniform(0.6, 0.9);
    pause(static_cast<size_t>(gap * kRate));
  }
  out.resize(total);
  voiced.resize(total);

  // Channel: spectral tilt (two first-order sections), then level and peak normalization.
  const double tilt = cfg.domain_tilt[static_cast<size_t>(domain)];
  for (int pass = 0; pass < 2; ++pass) {
    double prev = 0.0;
    for (double& s : out) {
      const double x = s;
      s = x - tilt * prev;
      prev = x;
    }
  }
  double energy = 0.0;
  size_t nv = 0;
  for (size_t i = 0; i < total; ++i)
    if (voiced[i]) {
      energy += out[i] * out[i];
      ++nv;
    }
  double gain = nv > 0 && energy > 0 ? voice.level / std::sqrt(energy / nv) : 0.0;
  double peak = 0.0;
  for (double s : out) peak = std::max(peak, std::abs(s) * gain);
  if (peak > 0.95) gain *= 0.95 / peak;
  for (double& s : out) s = std::clamp(s * gain + cfg.noise_floor * rng.Normal(), -0.99, 0.99);

  audio::AudioClip clip;
  clip.samples = std::move(out);
  clip.sample_rate = kRate;
  clip.source_id = utterance_id;
  return clip;
}

data::Manifest Generate(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.Validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  if (ec) throw Error("io", "cannot create " + out_dir + ": " + ec.message());
  data::Manifest m;
  m.base_dir = out_dir;
  char buf[64];
  for (int d = 0; d < cfg.num_domains; ++d) {
    for (Label label : {Label::kHC, Label::kPD}) {
      for (int s = 0; s < cfg.speakers_per_cell; ++s) {
        std::snprintf(buf, sizeof(buf), "d%d_%s_%03d", d, LabelName(label), s);
        const std::string speaker = buf;
        for (int u = 0; u < cfg.utterances_per_speaker; ++u) {
          std::snprintf(buf, sizeof(buf), "%s_u%02d", speaker.c_str(), u);
          const std::string utt = buf;
          const audio::AudioClip clip = SynthesizeUtterance(cfg, speaker, d, label, utt);
          const std::string rel = "wav/" + utt + ".wav";
          audio::WriteWav((fs::path(out_dir) / rel).string(), clip);
          m.records.push_back({utt, rel, speaker, label, d, clip.DurationSeconds()});
        }
      }
    }
  }
  data::WriteManifest((fs::path(out_dir) / "manifest.jsonl").string(), m);
  return m;
}

namespace {

Eigen::MatrixXd SelectRows(const Eigen::MatrixXd& m, const std::vector<size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace

CalibrationReport Calibrate(const data::Manifest& m, const Eigen::MatrixXd& pooled, uint64_t seed) {
  if (static_cast<size_t>(pooled.rows()) != m.records.size())
    throw Error("invalid_argument", "pooled matrix rows do not match manifest records");
  // Speaker -> half, alternating within each (domain, label) cell after a shuffle.
  std::map<std::pair<int, int>, std::vector<std::string>> cells;
  std::map<std::string, int> seen;
  for (const auto& r : m.records) {
    if (!r.label) throw Error("data", "calibration needs a labeled manifest");
    if (seen.emplace(r.speaker_id, 0).second) cells[{r.domain, ClassIndex(*r.label)}].push_back(r.speaker_id);
  }
  Rng rng(seed);
  std::map<std::string, int> half;
  for (auto& [key, list] : cells) {
    rng.Shuffle(list);
    for (size_t i = 0; i < list.size(); ++i) half[list[i]] = static_cast<int>(i % 2);
  }
  int num_domains = 0;
  for (const auto& r : m.records) num_domains = std::max(num_domains, r.domain + 1);

  CalibrationReport rep;
  // Domain probe over all utterances.
  size_t dom_correct = 0, dom_total = 0;
  for (int h = 0; h < 2 && num_domains > 1; ++h) {
    std::vector<size_t> tr, te;
    for (size_t i = 0; i < m.records.size(); ++i) (half[m.records[i].speaker_id] == h ? te : tr).push_back(i);
    std::vector<int> ytr, yte;
    for (size_t i : tr) ytr.push_back(m.records[i].domain);
    for (size_t i : te) yte.push_back(m.records[i].domain);
    const auto probe = baseline::TrainProbe(SelectRows(pooled, tr), ytr, num_domains);
    const Eigen::MatrixXd xte = SelectRows(pooled, te);
    for (size_t i = 0; i < te.size(); ++i, ++dom_total)
      if (probe.Predict(xte.row(static_cast<Eigen::Index>(i)).transpose()) == yte[i]) ++dom_correct;
  }
  rep.domain_accuracy = dom_total ? static_cast<double>(dom_correct) / dom_total : 1.0;

  // PD probe within each domain, per-speaker majority vote.
  for (int d = 0; d < num_domains; ++d) {
    std::map<std::string, std::vector<Label>> votes;
    std::map<std::string, Label> truth;
    for (int h = 0; h < 2; ++h) {
      std::vector<size_t> tr, te;
      for (size_t i = 0; i < m.records.size(); ++i)
        if (m.records[i].domain == d) (half[m.records[i].speaker_id] == h ? te : tr).push_back(i);
      std::vector<int> ytr;
      for (size_t i : tr) ytr.push_back(ClassIndex(*m.records[i].label));
      const auto probe = baseline::TrainProbe(SelectRows(pooled, tr), ytr, 2);
      for (size_t i : te) {
        const auto& r = m.records[i];
        votes[r.speaker_id].push_back(
            LabelFromIndex(probe.Predict(pooled.row(static_cast<Eigen::Index>(i)).transpose())));
        truth[r.speaker_id] = *r.label;
      }
    }
    size_t correct = 0;
    for (const auto& [spk, v] : votes) {
      const auto pd = std::count(v.begin(), v.end(), Label::kPD);
      const Label voted = 2 * pd >= static_cast<std::ptrdiff_t>(v.size()) ? Label::kPD : Label::kHC;
      if (voted == truth[spk]) ++correct;
    }
    rep.pd_speaker_accuracy.push_back(votes.empty() ? 0.0 : static_cast<double>(correct) / votes.size());
  }
  return rep;
}

}  // namespace pdspeech::synth
