// src/common.cpp

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

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pdspeech/common.hpp"
#include "pdspeech/container.hpp"

namespace pdspeech {

std::string HexDigest(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

uint32_t ToLittle(uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

std::string FileChecksum(const std::string& path) { return HexDigest(Fnv1a64(ReadAll(path))); }

std::string EncodeContainer(nlohmann::json header, std::span<const float> payload) {
  header["payload_floats"] = payload.size();
  std::string out = header.dump();
  out.push_back('\n');
  const size_t offset = out.size();
  out.resize(offset + payload.size() * 4);
  for (size_t i = 0; i < payload.size(); ++i) {
    const uint32_t bits = ToLittle(std::bit_cast<uint32_t>(payload[i]));
    std::memcpy(out.data() + offset + 4 * i, &bits, 4);
  }
  return out;
}

Container DecodeContainer(const std::string& bytes, const std::string& origin) {
  const size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error("format", origin + ": missing container header line");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", origin + ": bad container header: " + e.what());
  }
  if (!c.header.contains("payload_floats"))
    throw Error("format", origin + ": header lacks payload_floats");
  const size_t n = c.header["payload_floats"].get<size_t>();
  if (bytes.size() - nl - 1 != n * 4)
    throw Error("format", origin + ": payload size mismatch (expected " + std::to_string(n * 4) +
                              " bytes, found " + std::to_string(bytes.size() - nl - 1) + ")");
  c.payload.resize(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, bytes.data() + nl + 1 + 4 * i, 4);
    c.payload[i] = std::bit_cast<float>(ToLittle(bits));
  }
  return c;
}

void WriteContainer(const std::string& path, nlohmann::json header,
                    std::span<const float> payload) {
  const std::string bytes = EncodeContainer(std::move(header), payload);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "write failed for '" + path + "'");
}

Container ReadContainer(const std::string& path) { return DecodeContainer(ReadAll(path), path); }

}  // namespace pdspeech
