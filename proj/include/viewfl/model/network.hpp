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

#ifndef VIEWFL_MODEL_NETWORK_HPP_
#define VIEWFL_MODEL_NETWORK_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/model/params.hpp"
#include "viewfl/sample.hpp"

namespace viewfl::model {

inline constexpr double kProbClamp = 1e-7;

// Uniform Glorot weights (embeddings included), zero biases. Deterministic
// per config.seed.
inline ModelParams InitParams(const ModelConfig& config) {
  config.Validate();
  ModelParams params(config);
  std::mt19937_64 rng(config.seed);
  for (auto& layer : params.layers()) {
    if (layer.spec.shape.size() != 2) continue;
    const double fan_in = static_cast<double>(layer.spec.shape[0]);
    const double fan_out = static_cast<double>(layer.spec.shape[1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (float& w : layer.values) w = static_cast<float>(dist(rng));
  }
  return params;
}

inline void CheckSample(const ModelConfig& config, const Sample& s) {
  if (s.binary.size() != config.n_binary || s.numerical.size() != config.n_numerical ||
      s.categorical.size() != config.n_categorical) {
    throw InputError("sample partition sizes do not match the model config");
  }
  for (const auto idx : s.categorical) {
    if (idx >= config.hash_buckets) {
      throw InputError("categorical index " + std::to_string(idx) + " out of bucket range");
    }
  }
}

template <class T>
T Sigmoid(T z) {
  if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

// Activations kept for the backward pass.
template <class T>
struct ForwardTrace {
  std::vector<T> dense_in;
  std::vector<T> concat;  // [relu(numeric dense) | emb_0 | ... | emb_{n-1}]
  std::array<std::vector<T>, kNumHiddenLayers> hidden;
  T logit{};
  T prob{};
};

namespace detail {

// out = relu?(b + x * W), W is [in, out] row-major.
template <class T>
void Affine(std::span<const T> x, const std::vector<T>& kernel, const std::vector<T>& bias,
            std::vector<T>& out, bool relu) {
  const std::size_t n_out = bias.size();
  out.assign(bias.begin(), bias.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T xi = x[i];
    if (xi == T{0}) continue;
    const T* row = kernel.data() + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += xi * row[j];
  }
  if (relu) {
    for (auto& v : out) v = std::max(v, T{0});
  }
}

}  // namespace detail

template <class T>
T ForwardOne(const BasicParams<T>& params, const Sample& sample, ForwardTrace<T>& tr) {
  const ModelConfig& cfg = params.config();
  CheckSample(cfg, sample);
  const LayerIndex idx = params.index();

  tr.dense_in.resize(cfg.dense_input_dim());
  for (std::size_t i = 0; i < cfg.n_binary; ++i) tr.dense_in[i] = static_cast<T>(sample.binary[i]);
  for (std::size_t i = 0; i < cfg.n_numerical; ++i) {
    tr.dense_in[cfg.n_binary + i] = static_cast<T>(sample.numerical[i]);
  }

  std::vector<T> dense_out;
  detail::Affine<T>(tr.dense_in, params.layer(LayerIndex::kNumericKernel).values,
                    params.layer(LayerIndex::kNumericBias).values, dense_out, true);
  tr.concat.resize(cfg.concat_dim());
  std::copy(dense_out.begin(), dense_out.end(), tr.concat.begin());
  const std::size_t e = cfg.embedding_dim;
  for (std::size_t f = 0; f < cfg.n_categorical; ++f) {
    const auto& table = params.layer(idx.embedding(f)).values;
    const T* row = table.data() + static_cast<std::size_t>(sample.categorical[f]) * e;
    std::copy(row, row + e, tr.concat.begin() + cfg.numeric_dense_dim + f * e);
  }

  std::span<const T> in = tr.concat;
  for (std::size_t l = 0; l < kNumHiddenLayers; ++l) {
    detail::Affine<T>(in, params.layer(idx.hidden_kernel(l)).values,
                      params.layer(idx.hidden_bias(l)).values, tr.hidden[l], true);
    in = tr.hidden[l];
  }
  std::vector<T> logit;
  detail::Affine<T>(in, params.layer(idx.output_kernel()).values,
                    params.layer(idx.output_bias()).values, logit, false);
  tr.logit = logit[0];
  tr.prob = Sigmoid(tr.logit);
  return tr.prob;
}

// One probability per sample, order preserving.
template <class T>
std::vector<T> Forward(const BasicParams<T>& params, std::span<const Sample> batch) {
  std::vector<T> out;
  out.reserve(batch.size());
  ForwardTrace<T> tr;
  for (const auto& s : batch) out.push_back(ForwardOne(params, s, tr));
  return out;
}

// Mean binary cross-entropy; predictions are clamped into [1e-7, 1 - 1e-7].
template <class P>
double BceLoss(std::span<const P> preds, std::span<const std::uint8_t> labels) {
  if (preds.empty()) throw InputError("bce_loss on empty input");
  if (preds.size() != labels.size()) throw InputError("bce_loss length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double p = std::clamp(static_cast<double>(preds[i]), kProbClamp, 1.0 - kProbClamp);
    sum -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return sum / static_cast<double>(preds.size());
}

template <class T>
struct GradientResult {
  BasicParams<T> grads;
  double loss = 0.0;  // mean BCE of the batch at the input parameters
};

// Exact gradients of the mean BCE over `batch` with respect to every
// parameter. Embedding gradients are only written at looked-up rows.
template <class T>
GradientResult<T> Backward(const BasicParams<T>& params, std::span<const Sample> batch,
                           std::span<const std::uint8_t> labels) {
  if (batch.empty()) throw InputError("backward on empty batch");
  if (batch.size() != labels.size()) throw InputError("labels length mismatch");
  const ModelConfig& cfg = params.config();
  const LayerIndex idx = params.index();
  GradientResult<T> result{BasicParams<T>(cfg), 0.0};
  auto& g = result.grads;
  const T inv_b = T{1} / static_cast<T>(batch.size());

  ForwardTrace<T> tr;
  std::vector<T> upstream, down;
  double loss_sum = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    ForwardOne(params, batch[s], tr);
    const double p = std::clamp(static_cast<double>(tr.prob), kProbClamp, 1.0 - kProbClamp);
    loss_sum -= labels[s] ? std::log(p) : std::log(1.0 - p);

    // d(mean BCE)/d logit for a sigmoid output is (p - y) / B.
    const T dz = (tr.prob - static_cast<T>(labels[s])) * inv_b;
    upstream.assign(1, dz);

    // Output and hidden layers, last to first.
    for (std::size_t step = 0; step <= kNumHiddenLayers; ++step) {
      const std::size_t l = kNumHiddenLayers - step;  // 5 == output layer
      const bool is_output = l == kNumHiddenLayers;
      const std::size_t k_idx = is_output ? idx.output_kernel() : idx.hidden_kernel(l);
      const std::vector<T>& in = l == 0 ? tr.concat : tr.hidden[l - 1];
      if (!is_output) {
        for (std::size_t j = 0; j < upstream.size(); ++j) {
          if (tr.hidden[l][j] <= T{0}) upstream[j] = T{0};
        }
      }
      const std::size_t n_out = upstream.size();
      const auto& w = params.layer(k_idx).values;
      auto& gw = g.layer(k_idx).values;
      auto& gb = g.layer(k_idx + 1).values;
      down.assign(in.size(), T{0});
      for (std::size_t j = 0; j < n_out; ++j) gb[j] += upstream[j];
      for (std::size_t i = 0; i < in.size(); ++i) {
        const T xi = in[i];
        const T* wrow = w.data() + i * n_out;
        T* grow = gw.data() + i * n_out;
        T acc{0};
        for (std::size_t j = 0; j < n_out; ++j) {
          grow[j] += xi * upstream[j];
          acc += wrow[j] * upstream[j];
        }
        down[i] = acc;
      }
      upstream.swap(down);
    }

    // upstream now holds d/d concat.
    const std::size_t d = cfg.numeric_dense_dim;
    {
      auto& gw = g.layer(LayerIndex::kNumericKernel).values;
      auto& gb = g.layer(LayerIndex::kNumericBias).values;
      for (std::size_t j = 0; j < d; ++j) {
        if (tr.concat[j] <= T{0}) upstream[j] = T{0};
        gb[j] += upstream[j];
      }
      for (std::size_t i = 0; i < tr.dense_in.size(); ++i) {
        const T xi = tr.dense_in[i];
        if (xi == T{0}) continue;
        T* grow = gw.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) grow[j] += xi * upstream[j];
      }
    }
    const std::size_t e = cfg.embedding_dim;
    for (std::size_t f = 0; f < cfg.n_categorical; ++f) {
      T* row = g.layer(idx.embedding(f)).values.data() +
               static_cast<std::size_t>(batch[s].categorical[f]) * e;
      const T* src = upstream.data() + d + f * e;
      for (std::size_t k = 0; k < e; ++k) row[k] += src[k];
    }
  }
  result.loss = loss_sum / static_cast<double>(batch.size());
  return result;
}

template <class T>
GradientResult<T> Backward(const BasicParams<T>& params, std::span<const Sample> batch) {
  std::vector<std::uint8_t> labels;
  labels.reserve(batch.size());
  for (const auto& s : batch) labels.push_back(s.label_viewable);
  return Backward(params, batch, labels);
}

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_NETWORK_HPP_
