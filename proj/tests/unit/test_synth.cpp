// tests/unit/test_synth.cpp

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

#include <set>

#include "doctest.h"
#include "pdspeech/features.hpp"
#include "pdspeech/manifest.hpp"
#include "pdspeech/synth.hpp"
#include "test_util.hpp"

using namespace pdspeech;

namespace {

synth::SynthConfig Small() {
  synth::SynthConfig c;
  c.speakers_per_cell = 5;
  c.utterances_per_speaker = 4;
  c.seed = 3;
  return c;
}

// Labeled manifest with `per_cell` speakers in each (domain, label) cell.
data::Manifest Grid(int domains, int per_cell, int utts = 2) {
  data::Manifest m;
  for (int d = 0; d < domains; ++d)
    for (int c = 0; c < 2; ++c)
      for (int s = 0; s < per_cell; ++s)
        for (int u = 0; u < utts; ++u) {
          const std::string spk = "d" + std::to_string(d) + "c" + std::to_string(c) + "s" + std::to_string(s);
          m.records.push_back({spk + "u" + std::to_string(u), "x.wav", spk, LabelFromIndex(c), d, 1.0});
        }
  return m;
}

}  // namespace

TEST_CASE("generate writes the expected manifest and clean audio") {
  testing::TempDir dir("synth");
  const auto m = synth::Generate(Small(), dir / "a");
  CHECK(m.records.size() == 80);
  m.Validate();
  CHECK(m.AllLabeled());
  std::set<std::string> speakers;
  for (const auto& r : m.records) speakers.insert(r.speaker_id);
  CHECK(speakers.size() == 20);

  for (size_t i = 0; i < m.records.size(); i += 7) {
    const auto clip = audio::LoadWav(m.Resolve(m.records[i]));
    CHECK(clip.sample_rate == audio::kWorkingRate);
    double peak = 0.0;
    for (double s : clip.samples) {
      REQUIRE(std::isfinite(s));
      peak = std::max(peak, std::abs(s));
    }
    CHECK(peak <= 0.99);
    CHECK(peak > 0.01);
  }

  const auto back = data::ReadManifest(dir / "a/manifest.jsonl");
  REQUIRE(back.records.size() == m.records.size());
  CHECK(back.records[5].speaker_id == m.records[5].speaker_id);
}

TEST_CASE("identical seeds give byte-identical audio") {
  testing::TempDir dir("synth_det");
  const auto a = synth::Generate(Small(), dir / "a");
  const auto b = synth::Generate(Small(), dir / "b");
  for (size_t i = 0; i < a.records.size(); ++i)
    CHECK(FileChecksum(a.Resolve(a.records[i])) == FileChecksum(b.Resolve(b.records[i])));
  CHECK(FileChecksum(dir / "a/manifest.jsonl") == FileChecksum(dir / "b/manifest.jsonl"));

  auto other = Small();
  other.seed = 4;
  const auto c1 = synth::SynthesizeUtterance(Small(), "d0_PD_000", 0, Label::kPD, "x");
  const auto c2 = synth::SynthesizeUtterance(other, "d0_PD_000", 0, Label::kPD, "x");
  CHECK(c1.samples != c2.samples);
}

TEST_CASE("synth config validation") {
  auto c = Small();
  c.num_domains = 5;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = Small();
  c.tremor_depth = 1.0;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = Small();
  c.speakers_per_cell = 0;
  CHECK_THROWS_AS(c.Validate(), Error);
}

TEST_CASE("calibration: class and domain are recoverable at default strengths") {
  // Calibration scale: 25 speakers per cell.
  synth::SynthConfig c;
  c.speakers_per_cell = 25;
  c.seed = 1;
  data::Manifest m;
  std::vector<Eigen::VectorXd> rows;
  for (int d = 0; d < c.num_domains; ++d)
    for (int cls = 0; cls < 2; ++cls)
      for (int s = 0; s < c.speakers_per_cell; ++s) {
        const std::string spk = "d" + std::to_string(d) + "_" + LabelName(LabelFromIndex(cls)) + "_" + std::to_string(s);
        for (int u = 0; u < c.utterances_per_speaker; ++u) {
          const std::string utt = spk + "_u" + std::to_string(u);
          const auto clip = synth::SynthesizeUtterance(c, spk, d, LabelFromIndex(cls), utt);
          const auto kept = audio::RemoveSilence(clip, audio::SilenceConfig{});
          REQUIRE(!kept.fully_silent);
          rows.push_back(feat::PooledVector(feat::Mfcc(kept.clip, feat::MfccConfig{})));
          m.records.push_back({utt, "", spk, LabelFromIndex(cls), d, clip.DurationSeconds()});
        }
      }
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) pooled.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  const auto rep = synth::Calibrate(m, pooled, 5);
  REQUIRE(rep.pd_speaker_accuracy.size() == 2);
  for (double a : rep.pd_speaker_accuracy) CHECK(a >= 0.80);
  CHECK(rep.domain_accuracy >= 0.95);
}

TEST_CASE("split_unlabeled examples") {
  const auto m = Grid(1, 5);  // 10 speakers
  const auto [un, lab] = data::SplitUnlabeled(Grid(2, 5), 0.5, 7);
  std::set<std::string> su, sl;
  for (const auto& r : un.records) {
    su.insert(r.speaker_id);
    CHECK(!r.label.has_value());
  }
  for (const auto& r : lab.records) {
    sl.insert(r.speaker_id);
    CHECK(r.label.has_value());
  }
  CHECK(su.size() == 10);
  CHECK(sl.size() == 10);
  for (const auto& s : su) CHECK(sl.count(s) == 0);
  CHECK(un.records.size() + lab.records.size() == 40);

  CHECK_THROWS_AS(data::SplitUnlabeled(m, 0.0, 1), Error);
  CHECK_THROWS_AS(data::SplitUnlabeled(m, 1.0, 1), Error);
  CHECK_THROWS_AS(data::SplitUnlabeled(m, 0.95, 1), Error);
}

TEST_CASE("split_unlabeled is speaker-disjoint on random manifests") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = Grid(1 + static_cast<int>(rng.Below(3)), 2 + static_cast<int>(rng.Below(6)),
                        1 + static_cast<int>(rng.Below(3)));
    const double f = 0.2 + 0.5 * rng.Uniform();
    const auto [un, lab] = data::SplitUnlabeled(m, f, rng.NextU64());
    std::set<std::string> su;
    for (const auto& r : un.records) su.insert(r.speaker_id);
    for (const auto& r : lab.records) CHECK(su.count(r.speaker_id) == 0);
  }
}

TEST_CASE("manifest validation and io") {
  testing::TempDir dir("manifest");
  auto m = Grid(1, 2);
  data::WriteManifest(dir / "m.jsonl", m);
  const auto back = data::ReadManifest(dir / "m.jsonl");
  CHECK(back.records.size() == m.records.size());
  CHECK(back.Resolve(back.records[0]) == (dir.path() / "x.wav").string());
  CHECK(data::Speakers(m).size() == 4);
  CHECK(data::Speakers(m)[0].segments == 2);

  auto dup = m;
  dup.records.push_back(m.records[0]);
  CHECK_THROWS_AS(dup.Validate(), Error);
  auto conflict = m;
  conflict.records[1].label = Label::kPD;  // same speaker as record 0, which is HC
  CHECK_THROWS_AS(conflict.Validate(), Error);

  testing::WriteBytes(dir / "bad.jsonl", "{\"utterance_id\": \"a\", \"label\": \"XX\"}\n");
  CHECK_THROWS_AS(data::ReadManifest(dir / "bad.jsonl"), Error);
  CHECK_THROWS_AS(data::ReadManifest(dir / "none.jsonl"), Error);
}

TEST_CASE("select_fold partitions by speaker") {
  const auto m = Grid(1, 5);
  const auto plan = eval::MakeFolds(data::Speakers(m), 5, 1);
  size_t total = 0;
  for (int f = 0; f < 5; ++f) {
    const auto in = data::SelectFold(m, plan, f, true);
    const auto out = data::SelectFold(m, plan, f, false);
    CHECK(in.records.size() + out.records.size() == m.records.size());
    total += in.records.size();
  }
  CHECK(total == m.records.size());
}
