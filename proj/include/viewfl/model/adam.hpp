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

#ifndef VIEWFL_MODEL_ADAM_HPP_
#define VIEWFL_MODEL_ADAM_HPP_

#include <cmath>
#include <cstdint>

#include "viewfl/base/error.hpp"
#include "viewfl/model/params.hpp"

namespace viewfl::model {

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

template <class T>
struct AdamState {
  BasicParams<T> m;
  BasicParams<T> v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(const ModelConfig& config, AdamHyper h = {})
      : m(config), v(config), hyper(h) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update, in place.
template <class T>
void AdamStep(BasicParams<T>& params, const BasicParams<T>& grads, AdamState<T>& state) {
  if (!params.SameShape(grads) || !params.SameShape(state.m) || !params.SameShape(state.v)) {
    throw InputError("adam_step: shape mismatch");
  }
  const AdamHyper& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t li = 0; li < params.layers().size(); ++li) {
    auto& p = params.layer(li).values;
    const auto& g = grads.layer(li).values;
    auto& m = state.m.layer(li).values;
    auto& v = state.v.layer(li).values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = h.beta1 * static_cast<double>(m[i]) + (1.0 - h.beta1) * gi;
      const double vi = h.beta2 * static_cast<double>(v[i]) + (1.0 - h.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = h.lr * (mi / c1) / (std::sqrt(vi / c2) + h.epsilon);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - step);
    }
  }
}

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_ADAM_HPP_
