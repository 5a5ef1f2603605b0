// src/features.cpp

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

#include "pdspeech/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <sstream>

#include "pdspeech/common.hpp"
#include "pdspeech/container.hpp"

namespace pdspeech::feat {

void MfccConfig::Validate() const {
  if (!(frame_ms > 0) || !(hop_ms > 0)) throw Error("config", "mfcc frame_ms and hop_ms must be positive");
  if (mel_filters < 1) throw Error("config", "mfcc.mel_filters must be >= 1");
  if (base_coeffs < 1 || base_coeffs > mel_filters)
    throw Error("config", "mfcc.base_coeffs must be in [1, mel_filters]");
  if (!(log_floor > 0)) throw Error("config", "mfcc.log_floor must be positive");
  if (delta_delta && !delta) throw Error("config", "mfcc.delta_delta requires mfcc.delta");
}

std::string MfccConfig::Hash() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << frame_ms << '|' << hop_ms << '|' << mel_filters << '|' << base_coeffs << '|' << delta << '|'
     << delta_delta << '|' << preemphasis << '|' << low_hz << '|' << high_hz << '|' << log_floor;
  return HexDigest(Fnv1a64(ss.str()));
}

Framing Framing::For(const MfccConfig& cfg, int sample_rate) {
  Framing f;
  f.frame_length = static_cast<int>(std::lround(cfg.frame_ms * sample_rate / 1000.0));
  f.hop = static_cast<int>(std::lround(cfg.hop_ms * sample_rate / 1000.0));
  f.fft_size = 1;
  while (f.fft_size < f.frame_length) f.fft_size <<= 1;
  return f;
}

int Framing::NumFrames(size_t num_samples) const {
  if (num_samples < static_cast<size_t>(frame_length)) return 0;
  return 1 + static_cast<int>((num_samples - frame_length) / hop);
}

namespace {

double HzToMel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

struct MelBank {
  // weights(m, k): filter m applied to FFT bin k.
  Eigen::MatrixXd weights;
  std::vector<double> centers_hz;
};

MelBank BuildMelBank(const MfccConfig& cfg, int sample_rate, int fft_size) {
  const double nyquist = sample_rate / 2.0;
  const double high = cfg.high_hz > 0 ? std::min(cfg.high_hz, nyquist) : nyquist;
  const double mel_lo = HzToMel(cfg.low_hz);
  const double mel_hi = HzToMel(high);
  const int m = cfg.mel_filters;
  const int bins = fft_size / 2 + 1;
  const double step = (mel_hi - mel_lo) / (m + 1);

  MelBank bank;
  bank.weights = Eigen::MatrixXd::Zero(m, bins);
  bank.centers_hz.resize(m);
  for (int j = 0; j < m; ++j) {
    const double left = mel_lo + j * step;
    const double center = left + step;
    const double right = center + step;
    bank.centers_hz[j] = MelToHz(center);
    for (int k = 0; k < bins; ++k) {
      const double mel = HzToMel(static_cast<double>(k) * sample_rate / fft_size);
      if (mel > left && mel <= center)
        bank.weights(j, k) = (mel - left) / (center - left);
      else if (mel > center && mel < right)
        bank.weights(j, k) = (right - mel) / (right - center);
    }
  }
  return bank;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }

  /// Power spectrum |X_k|^2 for k in [0, n/2].
  void PowerSpectrum(Eigen::VectorXd& power) {
    fftw_execute(plan_);
    power.resize(n_ / 2 + 1);
    for (int k = 0; k <= n_ / 2; ++k) power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace

std::vector<double> MelCenterFrequencies(const MfccConfig& cfg, int sample_rate) {
  cfg.Validate();
  const Framing framing = Framing::For(cfg, sample_rate);
  return BuildMelBank(cfg, sample_rate, framing.fft_size).centers_hz;
}

FeatureMatrix FilterbankEnergies(const audio::AudioClip& clip, const MfccConfig& cfg) {
  cfg.Validate();
  const Framing framing = Framing::For(cfg, clip.sample_rate);
  const int frames = framing.NumFrames(clip.samples.size());
  if (frames == 0)
    throw Error("invalid_argument", "clip '" + clip.source_id + "' is shorter than one frame (" +
                                        std::to_string(clip.samples.size()) + " samples)");
  const MelBank bank = BuildMelBank(cfg, clip.sample_rate, framing.fft_size);
  const int len = framing.frame_length;

  std::vector<double> window(len);
  for (int i = 0; i < len; ++i)
    window[i] = len == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (len - 1));

  RealFft fft(framing.fft_size);
  FeatureMatrix energies(frames, cfg.mel_filters);
  Eigen::VectorXd power;
  for (int t = 0; t < frames; ++t) {
    const double* x = clip.samples.data() + static_cast<size_t>(t) * framing.hop;
    double* buf = fft.input();
    for (int i = len - 1; i > 0; --i) buf[i] = (x[i] - cfg.preemphasis * x[i - 1]) * window[i];
    buf[0] = (x[0] - cfg.preemphasis * x[0]) * window[0];
    for (int i = len; i < framing.fft_size; ++i) buf[i] = 0.0;
    fft.PowerSpectrum(power);
    energies.row(t) = (bank.weights * power).transpose();
  }
  return energies;
}

FeatureMatrix Deltas(const FeatureMatrix& m, int window) {
  const Eigen::Index rows = m.rows();
  FeatureMatrix d = FeatureMatrix::Zero(rows, m.cols());
  double denom = 0.0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  for (Eigen::Index t = 0; t < rows; ++t) {
    for (int n = 1; n <= window; ++n) {
      const Eigen::Index ahead = std::min<Eigen::Index>(rows - 1, t + n);
      const Eigen::Index behind = std::max<Eigen::Index>(0, t - n);
      d.row(t) += n * (m.row(ahead) - m.row(behind));
    }
  }
  return d / denom;
}

FeatureMatrix Mfcc(const audio::AudioClip& clip, const MfccConfig& cfg) {
  const FeatureMatrix energies = FilterbankEnergies(clip, cfg);
  const int m = cfg.mel_filters;
  const int c = cfg.base_coeffs;

  // Orthonormal DCT-II.
  Eigen::MatrixXd dct(m, c);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < c; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
      dct(j, k) = scale * std::cos(M_PI * k * (j + 0.5) / m);
    }

  const FeatureMatrix logs = energies.array().max(cfg.log_floor).log().matrix();
  const FeatureMatrix ceps = logs * dct;

  FeatureMatrix out(ceps.rows(), cfg.OutputDim());
  out.leftCols(c) = ceps;
  if (cfg.delta) {
    const FeatureMatrix d1 = Deltas(ceps);
    out.middleCols(c, c) = d1;
    if (cfg.delta_delta) out.rightCols(c) = Deltas(d1);
  }
  if (!out.allFinite()) throw Error("numeric", "non-finite MFCC values for '" + clip.source_id + "'");
  return out;
}

Eigen::VectorXd PooledVector(const FeatureMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw Error("invalid_argument", "pooled_vector: empty feature matrix");
  const Eigen::Index d = m.cols();
  Eigen::VectorXd out(2 * d);
  const Eigen::RowVectorXd mean = m.colwise().mean();
  const Eigen::RowVectorXd var =
      (m.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(m.rows());
  out.head(d) = mean.transpose();
  out.tail(d) = var.array().sqrt().transpose();
  return out;
}

void WriteFeatureCache(const std::string& path, const FeatureMatrix& m, double frame_rate,
                       const std::string& config_hash) {
  nlohmann::json header = {{"kind", "features"},
                           {"rows", m.rows()},
                           {"cols", m.cols()},
                           {"frame_rate", frame_rate},
                           {"config_hash", config_hash}};
  std::vector<float> payload(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) payload[static_cast<size_t>(i)] = static_cast<float>(m.data()[i]);
  WriteContainer(path, std::move(header), payload);
}

CachedFeatures ReadFeatureCache(const std::string& path) {
  Container c = ReadContainer(path);
  if (c.header.value("kind", "") != "features") throw Error("format", path + ": not a feature cache");
  const auto rows = c.header.at("rows").get<Eigen::Index>();
  const auto cols = c.header.at("cols").get<Eigen::Index>();
  if (static_cast<size_t>(rows * cols) != c.payload.size())
    throw Error("format", path + ": feature cache dims do not match payload");
  CachedFeatures out;
  out.matrix.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) out.matrix.data()[i] = c.payload[static_cast<size_t>(i)];
  out.frame_rate = c.header.at("frame_rate").get<double>();
  out.config_hash = c.header.at("config_hash").get<std::string>();
  return out;
}

}  // namespace pdspeech::feat
