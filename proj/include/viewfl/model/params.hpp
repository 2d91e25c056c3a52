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

#ifndef VIEWFL_MODEL_PARAMS_HPP_
#define VIEWFL_MODEL_PARAMS_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/model/config.hpp"

namespace viewfl::model {

struct LayerSpec {
  std::string name;
  std::vector<std::size_t> shape;

  std::size_t size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Positions of each layer inside the canonical order.
struct LayerIndex {
  std::size_t n_categorical;

  static constexpr std::size_t kNumericKernel = 0;
  static constexpr std::size_t kNumericBias = 1;
  std::size_t embedding(std::size_t field) const { return 2 + field; }
  std::size_t hidden_kernel(std::size_t l) const { return 2 + n_categorical + 2 * l; }
  std::size_t hidden_bias(std::size_t l) const { return hidden_kernel(l) + 1; }
  std::size_t output_kernel() const { return hidden_kernel(kNumHiddenLayers); }
  std::size_t output_bias() const { return output_kernel() + 1; }
  std::size_t count() const { return output_bias() + 1; }
};

// Canonical (name, shape) list. Kernels are [fan_in, fan_out] row-major.
inline std::vector<LayerSpec> LayerManifest(const ModelConfig& config) {
  config.Validate();
  std::vector<LayerSpec> m;
  m.push_back({"numeric_dense.kernel", {config.dense_input_dim(), config.numeric_dense_dim}});
  m.push_back({"numeric_dense.bias", {config.numeric_dense_dim}});
  for (std::size_t f = 0; f < config.n_categorical; ++f) {
    m.push_back({"embedding." + std::to_string(f), {config.hash_buckets, config.embedding_dim}});
  }
  std::size_t in = config.concat_dim();
  for (std::size_t l = 0; l < kNumHiddenLayers; ++l) {
    const std::size_t out = config.hidden_dims[l];
    m.push_back({"hidden." + std::to_string(l) + ".kernel", {in, out}});
    m.push_back({"hidden." + std::to_string(l) + ".bias", {out}});
    in = out;
  }
  m.push_back({"output.kernel", {in, 1}});
  m.push_back({"output.bias", {1}});
  return m;
}

inline std::size_t ParameterCount(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& spec : LayerManifest(config)) n += spec.size();
  return n;
}

template <class T>
struct Layer {
  LayerSpec spec;
  std::vector<T> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const Layer&, const Layer&) = default;
};

// Flat, versionable parameter set of the viewability network. T is float for
// stored/wire parameters; double is used by gradient and aggregation checks.
template <class T>
class BasicParams {
 public:
  using value_type = T;

  BasicParams() = default;

  // Zero-filled parameters shaped by `config`.
  explicit BasicParams(ModelConfig config) : config_(std::move(config)) {
    for (auto& spec : LayerManifest(config_)) {
      const std::size_t n = spec.size();
      layers_.push_back(Layer<T>{std::move(spec), std::vector<T>(n, T{0})});
    }
  }

  const ModelConfig& config() const { return config_; }
  std::uint64_t config_hash() const { return config_.Hash(); }
  LayerIndex index() const { return LayerIndex{config_.n_categorical}; }

  std::span<Layer<T>> layers() { return layers_; }
  std::span<const Layer<T>> layers() const { return layers_; }
  Layer<T>& layer(std::size_t i) { return layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return layers_.at(i); }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.size();
    return n;
  }

  bool SameShape(const BasicParams& other) const {
    if (config_hash() != other.config_hash() || layers_.size() != other.layers_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!(layers_[i].spec == other.layers_[i].spec)) return false;
    }
    return true;
  }

  bool AllFinite() const {
    for (const auto& l : layers_) {
      for (const T v : l.values) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  // Visits every scalar in canonical order.
  template <class F>
  void ForEach(F&& f) {
    for (auto& l : layers_) for (T& v : l.values) f(v);
  }
  template <class F>
  void ForEach(F&& f) const {
    for (const auto& l : layers_) for (const T v : l.values) f(v);
  }

  std::vector<T> Flatten() const {
    std::vector<T> out;
    out.reserve(size());
    ForEach([&](T v) { out.push_back(v); });
    return out;
  }

  template <class U>
  BasicParams<U> Cast() const {
    BasicParams<U> out(config_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& dst = out.layer(i).values;
      const auto& src = layers_[i].values;
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<U>(src[j]);
    }
    return out;
  }

  void SetConfig(const ModelConfig& config) {
    if (config.Hash() != config_.Hash()) throw InputError("config architecture mismatch");
    config_ = config;
  }

  friend bool operator==(const BasicParams& a, const BasicParams& b) {
    return a.config_ == b.config_ && a.layers_ == b.layers_;
  }

 private:
  ModelConfig config_;
  std::vector<Layer<T>> layers_;
};

using ModelParams = BasicParams<float>;

// Applies f(dst, src) element-wise over two identically shaped parameter sets.
template <class T, class U, class F>
void ZipApply(BasicParams<T>& dst, const BasicParams<U>& src, F&& f) {
  if (dst.layers().size() != src.layers().size()) throw InputError("parameter shape mismatch");
  for (std::size_t i = 0; i < dst.layers().size(); ++i) {
    auto& d = dst.layer(i).values;
    const auto& s = src.layer(i).values;
    if (d.size() != s.size()) throw InputError("parameter shape mismatch");
    for (std::size_t j = 0; j < d.size(); ++j) f(d[j], s[j]);
  }
}

template <class T>
double L2Norm(const BasicParams<T>& p) {
  double sq = 0.0;
  p.ForEach([&](T v) { sq += static_cast<double>(v) * static_cast<double>(v); });
  return std::sqrt(sq);
}

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_PARAMS_HPP_
