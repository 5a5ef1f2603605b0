// include/pdspeech/container.hpp

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

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pdspeech {

// Binary container shared by the feature cache, cluster models and
// checkpoints: one line of compact JSON terminated by '\n', followed by a
// payload of 32-bit IEEE-754 little-endian floats. The header must carry
// "payload_floats" so truncated files are detected on read.
struct Container {
  nlohmann::json header;
  std::vector<float> payload;
};

void WriteContainer(const std::string& path, nlohmann::json header,
                    std::span<const float> payload);

Container ReadContainer(const std::string& path);

/// Serializes to bytes; WriteContainer is this plus a file write.
std::string EncodeContainer(nlohmann::json header, std::span<const float> payload);

Container DecodeContainer(const std::string& bytes, const std::string& origin);

}  // namespace pdspeech
