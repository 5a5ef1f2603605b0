// tests/unit/test_pipeline.cpp

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

#include <filesystem>

#include "doctest.h"
#include "pdspeech/pipeline.hpp"
#include "test_util.hpp"

using namespace pdspeech;
using namespace pdspeech::pipeline;

namespace {

constexpr const char* kTiny = R"(seed = 7
[synth]
speakers_per_cell = 4
utterances_per_speaker = 2
utterance_seconds = 1.5
[cluster]
k_stage1 = 8
k_stage2 = 8
[encoder]
model_dim = 16
num_layers = 2
num_heads = 2
ff_dim = 32
[heads]
hidden_dim = 16
num_domains = 2
[dapt]
epochs = 2
batch_size = 8
learning_rate = 1e-3
[finetune]
epochs = 2
batch_size = 8
learning_rate = 1e-3
[eval]
folds = 2
svm_epochs = 5
grid_points = 2
)";

// One shared tiny workspace: synth -> prep -> mfcc -> folds -> stage-1 labels.
struct Workspace {
  testing::TempDir dir{"pipeline"};
  Context ctx;

  Workspace() {
    ctx.cfg = config::ParseToml(kTiny, "tiny");
    ctx.command = "test";
    RunSynth(ctx, dir / "s");
    RunPrep(ctx, dir / "s/manifest.jsonl", dir / "p");
    RunMfcc(ctx, dir / "p/manifest.jsonl", dir / "f");
    RunFolds(ctx, dir / "f/manifest.jsonl", dir / "folds.json");
    RunPseudolabel(ctx, dir / "f/manifest.jsonl", 1, "", dir / "pl1");
  }
  std::string operator/(const std::string& n) const { return dir / n; }
};

Workspace& Shared() {
  static Workspace w;
  return w;
}

std::string ErrorKind(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

}  // namespace

TEST_CASE("early stages write artifacts with provenance") {
  auto& w = Shared();
  const auto m = data::ReadManifest(w / "f/manifest.jsonl");
  CHECK(m.records.size() == 32);
  const auto side = ReadJson(w / "f/manifest.jsonl.prov.json");
  CHECK(side["config_hash"] == w.ctx.cfg.Hash());
  CHECK(side["seed"] == 7);
  CHECK(side["inputs"].size() == 1);
  CHECK(side["inputs"][0]["checksum"] == FileChecksum(w / "p/manifest.jsonl"));
  CHECK(SidecarHash(w / "f/manifest.jsonl") == w.ctx.cfg.Hash());
  CHECK(SidecarHash(w / "nothing") == "");

  const auto prep = ReadJson(w / "p/manifest.jsonl.prov.json");
  CHECK(prep["extra"].contains("fully_silent"));

  const auto fs = LoadFeatures(w.ctx, w / "f/manifest.jsonl");
  CHECK(fs.features.size() == 32);
  CHECK(fs.features[0].cols() == 39);

  const auto labels = ReadLabels(w / "pl1/labels.json");
  CHECK(labels.k == 8);
  CHECK(labels.stage == 1);
  CHECK(labels.labels.size() == 32);
  CHECK(labels.labels.at(fs.manifest.records[0].utterance_id).size() == static_cast<size_t>(fs.features[0].rows()));
}

TEST_CASE("prep applies the silence settings") {
  auto& w = Shared();
  const auto src = data::ReadManifest(w / "s/manifest.jsonl");
  const auto out = data::ReadManifest(w / "p/manifest.jsonl");
  const auto clip = audio::LoadWav(src.Resolve(src.records[0]));
  const auto expect = audio::RemoveSilence(clip, w.ctx.cfg.silence);
  const auto got = audio::LoadWav(out.Resolve(out.records[0]));
  CHECK(got.samples.size() == expect.clip.samples.size());
}

TEST_CASE("jobs do not change artifacts") {
  auto& w = Shared();
  Context par = w.ctx;
  par.jobs = 3;
  RunMfcc(par, w / "p/manifest.jsonl", w / "f3");
  const auto a = data::ReadManifest(w / "f/manifest.jsonl");
  const auto b = data::ReadManifest(w / "f3/manifest.jsonl");
  for (size_t i = 0; i < a.records.size(); ++i)
    CHECK(FileChecksum(a.Resolve(a.records[i])) == FileChecksum(b.Resolve(b.records[i])));
}

TEST_CASE("dapt, stage-2 labels, fine-tune, predict and eval") {
  auto& w = Shared();
  const auto rep = RunDapt(w.ctx, w / "f/manifest.jsonl", w / "pl1/labels.json", "", w / "d1.ckpt");
  CHECK(rep.heldout_loss.size() == 3);
  const auto l2 = RunPseudolabel(w.ctx, w / "f/manifest.jsonl", 2, w / "d1.ckpt", w / "pl2");
  CHECK(l2.stage == 2);
  CHECK(l2.feature_space == "encoder_layer_1");
  CHECK(ErrorKind([&] { RunPseudolabel(w.ctx, w / "f/manifest.jsonl", 2, "", w / "pl_bad"); }) != "none");

  FinetuneRequest req;
  req.dat = true;
  req.init = w / "d1.ckpt";
  req.folds_path = w / "folds.json";
  std::vector<std::string> preds;
  for (int f = 0; f < 2; ++f) {
    req.fold = f;
    const std::string ck = w / ("ft" + std::to_string(f) + ".ckpt");
    RunFinetune(w.ctx, w / "f/manifest.jsonl", req, ck);
    const auto loaded = model::LoadCheckpoint(ck);
    CHECK(loaded.meta.ablation["dat"] == true);
    CHECK(loaded.meta.ablation["grl_lambda"] == 0.1);
    CHECK(loaded.meta.ablation["fold"] == f);
    CHECK(loaded.heads.has_value());
    preds.push_back(w / ("pred" + std::to_string(f) + ".jsonl"));
    const auto p = RunPredict(w.ctx, ck, w / "f/manifest.jsonl", req.folds_path, f, preds.back());
    CHECK(!p.empty());
    for (const auto& r : p) {
      CHECK(r.fold == f);
      CHECK((r.predicted_label == Label::kPD) == (r.score >= 0.5));
    }
  }
  const auto report = RunEval(w.ctx, preds, 2, w / "report.json");
  CHECK(report["per_fold"].size() == 2);
  CHECK(report["config_hash"] == w.ctx.cfg.Hash());
  CHECK(report["average"]["per_person"].contains("accuracy"));

  // Folds are speaker-disjoint between train and predict.
  const auto plan = eval::FoldPlan::FromJson(ReadJson(w / "folds.json"));
  for (const auto& r : eval::ReadPredictions(preds[0])) CHECK(plan.FoldOf(r.speaker_id) == 0);
}

TEST_CASE("hash mismatches are refused unless forced") {
  auto& w = Shared();
  Context other = w.ctx;
  config::ApplyOverride(other.cfg, "grl.lambda=0.5");
  FinetuneRequest req;
  req.folds_path = w / "folds.json";
  req.fold = 0;
  RunFinetune(other, w / "f/manifest.jsonl", req, w / "alt.ckpt");
  RunPredict(w.ctx, w / "alt.ckpt", w / "f/manifest.jsonl", req.folds_path, 0, w / "alt0.jsonl");
  // The prediction carries the checkpoint's hash, not the predicting context's.
  CHECK(SidecarHash(w / "alt0.jsonl") == other.cfg.Hash());

  RunBaseline(w.ctx, w / "f/manifest.jsonl", w / "folds.json", "svm", w / "svm.jsonl");
  RunEval(w.ctx, {w / "svm.jsonl"}, 2, w / "svm_report.json");
  CHECK(ErrorKind([&] { RunEval(w.ctx, {w / "svm.jsonl", w / "alt0.jsonl"}, 2, w / "mixed.json"); }) == "config");

  RunBaseline(other, w / "f/manifest.jsonl", w / "folds.json", "svm", w / "svm_other.jsonl");
  RunEval(other, {w / "svm_other.jsonl"}, 2, w / "svm_other_report.json");
  CHECK(ErrorKind([&] { RunReport(w.ctx, {w / "svm_report.json", w / "svm_other_report.json"}, w / "sum.json"); }) ==
        "config");
  Context forced = w.ctx;
  forced.force = true;
  const auto sum = RunReport(forced, {w / "svm_report.json", w / "svm_other_report.json"}, w / "sum.json");
  CHECK(sum["rows"].size() == 2);
  CHECK(sum["rows"][0]["name"] == "svm_report");
}

TEST_CASE("baselines share the fold plan") {
  auto& w = Shared();
  const auto plan = eval::FoldPlan::FromJson(ReadJson(w / "folds.json"));
  for (const char* method : {"lsrc", "lsrc-cd", "svm"}) {
    const auto preds = RunBaseline(w.ctx, w / "f/manifest.jsonl", w / "folds.json", method, w / "b.jsonl");
    CHECK(preds.size() == 32);
    for (const auto& p : preds) CHECK(p.fold == plan.FoldOf(p.speaker_id));
    const auto side = ReadJson(w / "b.jsonl.prov.json");
    CHECK(side["extra"]["selected"].size() == 2);
  }
  CHECK(ErrorKind([&] { RunBaseline(w.ctx, w / "f/manifest.jsonl", w / "folds.json", "rf", w / "x.jsonl"); }) ==
        "invalid_argument");
}

TEST_CASE("stage errors carry their kind") {
  auto& w = Shared();
  CHECK(ErrorKind([&] { RunPrep(w.ctx, w / "missing.jsonl", w / "x"); }) == "io");
  testing::WriteBytes(w / "broken.json", "{");
  CHECK(ErrorKind([&] { ReadJson(w / "broken.json"); }) == "format");
  Context bad = w.ctx;
  config::ApplyOverride(bad.cfg, "mfcc.delta_delta=false");
  CHECK(ErrorKind([&] { LoadFeatures(bad, w / "f/manifest.jsonl"); }) != "none");
}
