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

#ifndef VIEWFL_MODEL_CONFIG_HPP_
#define VIEWFL_MODEL_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"

namespace viewfl::model {

inline constexpr std::size_t kNumHiddenLayers = 5;

// Architecture of the viewability network. The input is partitioned into
// binary, numerical and categorical features; binary+numerical go through one
// dense layer, each categorical field has its own embedding table.
struct ModelConfig {
  std::size_t n_binary = 3;
  std::size_t n_numerical = 14;
  std::size_t n_categorical = 9;
  std::size_t hash_buckets = 64;
  std::size_t embedding_dim = 8;
  std::size_t numeric_dense_dim = 16;
  std::vector<std::size_t> hidden_dims = {32, 16, 8, 8, 4};
  std::uint64_t seed = 0;

  // ~393K parameters with the default 3/14/9 inputs.
  static ModelConfig Full() {
    ModelConfig c;
    c.hash_buckets = 2048;
    c.embedding_dim = 16;
    c.numeric_dense_dim = 64;
    c.hidden_dims = {256, 128, 64, 32, 16};
    return c;
  }

  static ModelConfig Desk() { return ModelConfig{}; }

  // Throws ConfigError for a preset name other than "full" or "desk".
  static ModelConfig Preset(const std::string& name) {
    if (name == "full") return Full();
    if (name == "desk") return Desk();
    throw ConfigError("unknown model preset '" + name + "'");
  }

  std::size_t dense_input_dim() const { return n_binary + n_numerical; }
  std::size_t concat_dim() const {
    return numeric_dense_dim + n_categorical * embedding_dim;
  }

  void Validate() const {
    if (hidden_dims.size() != kNumHiddenLayers) {
      throw ConfigError("hidden_dims must have exactly 5 entries");
    }
    if (n_binary + n_numerical == 0 && n_categorical == 0) {
      throw ConfigError("model has no inputs");
    }
    if (n_binary < 1 || n_numerical < 1 || n_categorical < 1 || embedding_dim < 1 ||
        numeric_dense_dim < 1) {
      throw ConfigError("all ModelConfig counts must be >= 1");
    }
    for (const auto h : hidden_dims) {
      if (h < 1) throw ConfigError("hidden layer width must be >= 1");
    }
    if (hash_buckets < 2) throw ConfigError("hash_buckets must be >= 2");
  }

  // Architecture fields only; the seed does not change the wire shape.
  std::string CanonicalText() const {
    std::string s = "n_binary=" + std::to_string(n_binary) +
                    ";n_numerical=" + std::to_string(n_numerical) +
                    ";n_categorical=" + std::to_string(n_categorical) +
                    ";hash_buckets=" + std::to_string(hash_buckets) +
                    ";embedding_dim=" + std::to_string(embedding_dim) +
                    ";numeric_dense_dim=" + std::to_string(numeric_dense_dim) +
                    ";hidden_dims=";
    for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(hidden_dims[i]);
    }
    return s;
  }

  std::uint64_t Hash() const { return Fnv1a64(CanonicalText()); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_CONFIG_HPP_
