// tests/unit/test_config.cpp

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

#include "doctest.h"
#include "pdspeech/config.hpp"
#include "test_util.hpp"

using namespace pdspeech;
using namespace pdspeech::config;

TEST_CASE("defaults carry the published constants") {
  const PipelineConfig c;
  CHECK(c.silence.rms_window == 481);
  CHECK(c.silence.rms_threshold == 0.0025);
  CHECK(c.silence.min_silence_ms == 500.0);
  CHECK(c.cluster.k_stage1 == 100);
  CHECK(c.cluster.k_stage2 == 500);
  CHECK(c.dapt.train.learning_rate == 3e-5);
  CHECK(c.finetune.train.learning_rate == 3e-5);
  CHECK(c.dapt.train.batch_size == 128);
  CHECK(c.dapt.train.epochs == 80);
  CHECK(c.finetune.train.epochs == 40);
  CHECK(c.finetune.train.max_grad_norm == 1.0);
  CHECK(c.dapt.train.layerdrop == 0.1);
  CHECK(c.grl.lambda == 0.1);
  CHECK(c.eval.folds == 5);
  CHECK(c.heads.hidden_dim == 256);
  CHECK(c.heads.num_domains == 4);
  CHECK(c.mfcc.OutputDim() == 39);
  CHECK_NOTHROW(c.Validate());
}

TEST_CASE("toml parsing is strict") {
  const auto c = ParseToml("seed = 7\n[grl]\nlambda = 0.5\n[encoder]\nmodel_dim = 32\nnum_heads = 2\n", "t");
  CHECK(c.seed == 7);
  CHECK(c.grl.lambda == 0.5);
  CHECK(c.encoder.model_dim == 32);

  auto kind_of = [](const std::string& text) {
    try {
      ParseToml(text, "t");
    } catch (const Error& e) {
      return e.kind();
    }
    return std::string("none");
  };
  CHECK(kind_of("[nosuch]\nx = 1\n") == "config");
  CHECK(kind_of("[grl]\nlamda = 0.1\n") == "config");
  CHECK(kind_of("bogus = 1\n") == "config");
  CHECK(kind_of("[grl]\nlambda = \"high\"\n") == "config");
  CHECK(kind_of("[eval]\nfolds = 2.5\n") == "config");
  CHECK(kind_of("[eval]\nfolds = 1\n") == "config");
  CHECK(kind_of("[grl\n") == "config");
  CHECK(kind_of("seed = -1\n") == "config");
  CHECK(kind_of("[grl]\nlambda = 1\n") == "none");  // integers accepted for doubles
}

TEST_CASE("load_toml reports missing files as io") {
  try {
    LoadToml("/nonexistent/x.toml");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == "io");
  }
  testing::TempDir dir("config");
  testing::WriteBytes(dir / "c.toml", "[silence]\nrms_window = 241\n");
  CHECK(LoadToml(dir / "c.toml").silence.rms_window == 241);
}

TEST_CASE("overrides") {
  PipelineConfig c;
  ApplyOverride(c, "grl.lambda=2");
  CHECK(c.grl.lambda == 2.0);
  ApplyOverride(c, "seed = 9");
  CHECK(c.seed == 9);
  ApplyOverride(c, "synth.domain_tilt=[0.1, 0.2, 0.3, 0.4]");
  CHECK(c.synth.domain_tilt[3] == 0.4);
  CHECK_THROWS_AS(ApplyOverride(c, "grl.lambda"), Error);
  CHECK_THROWS_AS(ApplyOverride(c, "grl.nosuch=1"), Error);
  CHECK_THROWS_AS(ApplyOverride(c, "grl.lambda=-1"), Error);
}

TEST_CASE("hash tracks every setting") {
  PipelineConfig a, b;
  CHECK(a.Hash() == b.Hash());
  CHECK(a.Hash().size() == 16);
  ApplyOverride(b, "finetune.epochs=41");
  CHECK(a.Hash() != b.Hash());
  // The defaults document parses back to the same configuration.
  CHECK(ParseToml(DefaultsToml(), "defaults").Hash() == a.Hash());
}

TEST_CASE("stage seeds are distinct") {
  PipelineConfig c;
  CHECK(c.DaptTrain().seed != c.FinetuneTrain().seed);
  c.seed = 1;
  CHECK(c.DaptTrain().seed != PipelineConfig{}.DaptTrain().seed);
}

TEST_CASE("defaults table lists every key with provenance") {
  const std::string t = DefaultsTable();
  for (const char* key : {"silence.rms_window = 481  [published recipe]", "silence.rms_threshold = 0.0025  [published recipe]",
                          "grl.lambda = 0.1  [published recipe]", "eval.folds = 5  [published recipe]",
                          "encoder.model_dim", "[desk choice]", "finetune.learning_rate = 3e-05  [published recipe]"})
    CHECK_MESSAGE(t.find(key) != std::string::npos, key);
  size_t lines = 0;
  for (char ch : t) lines += ch == '\n';
  size_t keys = 0;
  const nlohmann::json all = PipelineConfig{}.ToJson();
  for (auto it = all.begin(); it != all.end(); ++it) keys += it->is_object() ? it->size() : 1;
  CHECK(lines == keys);
}
