// include/pdspeech/checkpoint.hpp

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

// Checkpoint container. The header records the schema version, the encoder
// and head configs, input statistics, a tensor index (name and shape, in
// payload order), the seed and free-form provenance; the payload is every
// tensor as float32 in index order.

#include <optional>
#include <string>

#include "pdspeech/heads.hpp"

namespace pdspeech::model {

inline constexpr int kCheckpointSchema = 1;

struct CheckpointMeta {
  uint64_t seed = 0;
  std::string config_hash;
  nlohmann::json provenance = nlohmann::json::object();
  nlohmann::json ablation = nlohmann::json::object();  // dat, freeze_encoder, grl_lambda, ...
};

struct Checkpoint {
  Encoder<float> encoder;
  std::optional<HeadParams<float>> heads;
  CheckpointMeta meta;
};

std::string EncodeCheckpoint(const Encoder<float>& encoder, const HeadParams<float>* heads,
                             const CheckpointMeta& meta);
void SaveCheckpoint(const std::string& path, const Encoder<float>& encoder, const HeadParams<float>* heads,
                    const CheckpointMeta& meta);

/// Throws Error("format") on schema or tensor-index mismatches.
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace pdspeech::model
