// src/checkpoint.cpp

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

#include "pdspeech/checkpoint.hpp"

#include <fstream>

#include "pdspeech/container.hpp"

namespace pdspeech::model {

namespace {

nlohmann::json VectorJson(const Eigen::RowVectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::RowVectorXd JsonVector(const nlohmann::json& a) {
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

// Parameters of both models in payload order.
nn::ParamStore<float> CollectAll(Encoder<float>& encoder, HeadParams<float>* heads) {
  nn::ParamStore<float> store;
  encoder.Collect("encoder", store, true);
  if (heads) {
    heads->pd.Collect("pd_head", store);
    heads->domain.Collect("domain_head", store);
  }
  return store;
}

}  // namespace

std::string EncodeCheckpoint(const Encoder<float>& encoder, const HeadParams<float>* heads,
                             const CheckpointMeta& meta) {
  Encoder<float> enc = encoder;
  std::optional<HeadParams<float>> hp;
  if (heads) hp = *heads;
  nn::ParamStore<float> store = CollectAll(enc, hp ? &*hp : nullptr);

  nlohmann::json index = nlohmann::json::array();
  std::vector<float> payload;
  payload.reserve(store.NumScalars());
  for (const auto& e : store.entries()) {
    index.push_back({{"name", e.name}, {"shape", {e.param->value.rows(), e.param->value.cols()}}});
    payload.insert(payload.end(), e.param->value.data(), e.param->value.data() + e.param->value.size());
  }
  nlohmann::json header = {{"kind", "checkpoint"},
                           {"schema_version", kCheckpointSchema},
                           {"encoder", enc.config.ToJson()},
                           {"input_mean", VectorJson(enc.input_mean)},
                           {"input_scale", VectorJson(enc.input_scale)},
                           {"dapt_stages", enc.dapt_stages},
                           {"heads", hp ? hp->config.ToJson() : nlohmann::json()},
                           {"tensors", index},
                           {"seed", meta.seed},
                           {"config_hash", meta.config_hash},
                           {"provenance", meta.provenance},
                           {"ablation", meta.ablation}};
  return EncodeContainer(header, payload);
}

void SaveCheckpoint(const std::string& path, const Encoder<float>& encoder, const HeadParams<float>* heads,
                    const CheckpointMeta& meta) {
  const std::string bytes = EncodeCheckpoint(encoder, heads, meta);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "short write on " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  Container c = ReadContainer(path);
  const auto& h = c.header;
  try {
    if (h.at("kind") != "checkpoint") throw Error("format", path + ": not a checkpoint");
    if (h.at("schema_version").get<int>() != kCheckpointSchema)
      throw Error("format", path + ": unsupported checkpoint schema " + h.at("schema_version").dump());
    Checkpoint ck;
    ck.encoder = Encoder<float>(EncoderConfig::FromJson(h.at("encoder")));
    const Eigen::RowVectorXd mean = JsonVector(h.at("input_mean"));
    const Eigen::RowVectorXd scale = JsonVector(h.at("input_scale"));
    if (mean.size() > 0) ck.encoder.SetInputStats(mean, scale);
    ck.encoder.dapt_stages = h.at("dapt_stages").get<int>();
    if (!h.at("heads").is_null())
      ck.heads = HeadParams<float>(ck.encoder.config.model_dim, HeadConfig::FromJson(h.at("heads")));
    ck.meta.seed = h.at("seed").get<uint64_t>();
    ck.meta.config_hash = h.at("config_hash").get<std::string>();
    ck.meta.provenance = h.at("provenance");
    ck.meta.ablation = h.at("ablation");

    nn::ParamStore<float> store = CollectAll(ck.encoder, ck.heads ? &*ck.heads : nullptr);
    const auto& index = h.at("tensors");
    if (index.size() != store.entries().size())
      throw Error("format", path + ": tensor index has " + std::to_string(index.size()) + " entries, model expects " +
                                std::to_string(store.entries().size()));
    size_t offset = 0;
    for (size_t i = 0; i < index.size(); ++i) {
      auto& p = *store.entries()[i].param;
      const auto& shape = index[i].at("shape");
      if (index[i].at("name") != store.entries()[i].name || shape[0].get<Eigen::Index>() != p.value.rows() ||
          shape[1].get<Eigen::Index>() != p.value.cols())
        throw Error("format", path + ": tensor " + index[i].dump() + " does not match " + store.entries()[i].name);
      const size_t n = static_cast<size_t>(p.value.size());
      if (offset + n > c.payload.size()) throw Error("format", path + ": payload shorter than tensor index");
      std::copy(c.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                c.payload.begin() + static_cast<std::ptrdiff_t>(offset + n), p.value.data());
      offset += n;
    }
    if (offset != c.payload.size()) throw Error("format", path + ": payload longer than tensor index");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw Error("format", path + ": malformed checkpoint header: " + e.what());
  }
}

}  // namespace pdspeech::model
