//
// Copyright 2026 The viewfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef VIEWFL_MODEL_SERIALIZE_HPP_
#define VIEWFL_MODEL_SERIALIZE_HPP_

// Canonical ModelParams wire form: a manifest of (name, shape) in canonical
// layer order, then one base64 string per layer holding its values as
// little-endian IEEE-754 binary32.

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "viewfl/base/codec.hpp"
#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/model/params.hpp"

namespace viewfl::model {

using nlohmann::json;

inline std::vector<std::uint8_t> LayerBytes(const std::vector<float>& values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
  return out;
}

inline std::vector<float> LayerValues(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 4 != 0) throw FormatError("layer byte length not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

inline json ConfigToJson(const ModelConfig& c) {
  return json{{"n_binary", c.n_binary},
              {"n_numerical", c.n_numerical},
              {"n_categorical", c.n_categorical},
              {"hash_buckets", c.hash_buckets},
              {"embedding_dim", c.embedding_dim},
              {"numeric_dense_dim", c.numeric_dense_dim},
              {"hidden_dims", c.hidden_dims},
              {"seed", c.seed},
              {"config_hash", Hex16(c.Hash())}};
}

inline ModelConfig ConfigFromJson(const json& j) {
  try {
    ModelConfig c;
    c.n_binary = j.at("n_binary").get<std::size_t>();
    c.n_numerical = j.at("n_numerical").get<std::size_t>();
    c.n_categorical = j.at("n_categorical").get<std::size_t>();
    c.hash_buckets = j.at("hash_buckets").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.numeric_dense_dim = j.at("numeric_dense_dim").get<std::size_t>();
    c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.Validate();
    if (j.contains("config_hash") && j.at("config_hash").get<std::string>() != Hex16(c.Hash())) {
      throw FormatError("config_hash does not match config fields");
    }
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  }
}

inline json ManifestToJson(const ModelParams& p) {
  json m = json::array();
  for (const auto& l : p.layers()) m.push_back({{"name", l.spec.name}, {"shape", l.spec.shape}});
  return m;
}

// Adds "manifest" and "layers" members to `out`.
inline void WriteLayers(const ModelParams& p, json& out) {
  out["manifest"] = ManifestToJson(p);
  json layers = json::array();
  for (const auto& l : p.layers()) layers.push_back(Base64Encode(LayerBytes(l.values)));
  out["layers"] = std::move(layers);
}

// Rebuilds params for `config` from "manifest" + "layers" members of `in`.
inline ModelParams ReadLayers(const ModelConfig& config, const json& in) {
  ModelParams p(config);
  try {
    const auto& manifest = in.at("manifest");
    const auto& layers = in.at("layers");
    if (manifest.size() != p.layers().size() || layers.size() != p.layers().size()) {
      throw FormatError("layer count does not match config");
    }
    for (std::size_t i = 0; i < p.layers().size(); ++i) {
      auto& layer = p.layer(i);
      if (manifest[i].at("name").get<std::string>() != layer.spec.name ||
          manifest[i].at("shape").get<std::vector<std::size_t>>() != layer.spec.shape) {
        throw FormatError("manifest entry " + std::to_string(i) + " does not match config");
      }
      auto values = LayerValues(Base64Decode(layers[i].get<std::string>()));
      if (values.size() != layer.size()) {
        throw FormatError("payload size mismatch for layer " + layer.spec.name);
      }
      layer.values = std::move(values);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad layer payload: ") + e.what());
  }
  return p;
}

inline json ParamsToJson(const ModelParams& p) {
  json j{{"config", ConfigToJson(p.config())}};
  WriteLayers(p, j);
  return j;
}

inline ModelParams ParamsFromJson(const json& j) {
  try {
    return ReadLayers(ConfigFromJson(j.at("config")), j);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad params document: ") + e.what());
  }
}

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_SERIALIZE_HPP_
