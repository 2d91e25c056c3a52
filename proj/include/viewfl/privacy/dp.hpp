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

#ifndef VIEWFL_PRIVACY_DP_HPP_
#define VIEWFL_PRIVACY_DP_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "viewfl/base/error.hpp"
#include "viewfl/model/params.hpp"

namespace viewfl::privacy {

struct DPConfig {
  bool enabled = false;
  double epsilon = 1.0;   // budget per uploaded update
  double delta = 1e-5;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  bool add_noise = true;  // false isolates the clipped-delta part in tests

  void Validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("dp epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dp delta must be in (0, 1)");
    if (!(clip_norm > 0.0)) throw ConfigError("dp clip_norm must be > 0");
  }
};

// Scales `delta` by min(1, C / ||delta||_2) over the whole flattened vector.
template <class T>
void ClipDelta(model::BasicParams<T>& delta, double clip_norm) {
  const double norm = model::L2Norm(delta);
  if (norm <= clip_norm || norm == 0.0) return;
  const double scale = clip_norm / norm;
  delta.ForEach([&](T& v) { v = static_cast<T>(static_cast<double>(v) * scale); });
}

// Gaussian-mechanism calibration: C * sqrt(2 ln(1.25 / delta)) / epsilon.
inline double NoiseSigma(double epsilon, double delta, double clip_norm) {
  DPConfig{true, epsilon, delta, clip_norm}.Validate();
  return clip_norm * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

// global + clip(local - global) + N(0, sigma^2) per element. Returns
// `local` untouched when dp is disabled.
inline model::ModelParams PrivatizeUpdate(const model::ModelParams& local,
                                          const model::ModelParams& global,
                                          const DPConfig& dp) {
  if (!local.SameShape(global)) throw InputError("privatize_update: shape mismatch");
  if (!dp.enabled) return local;
  dp.Validate();
  model::BasicParams<double> delta = local.Cast<double>();
  model::ZipApply(delta, global, [](double& d, float g) { d -= static_cast<double>(g); });
  ClipDelta(delta, dp.clip_norm);

  const double sigma = dp.add_noise ? NoiseSigma(dp.epsilon, dp.delta, dp.clip_norm) : 0.0;
  std::mt19937_64 rng(dp.seed);
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  model::ModelParams out = global;
  model::ZipApply(out, delta, [&](float& o, double d) {
    const double n = sigma > 0.0 ? noise(rng) : 0.0;
    o = static_cast<float>(static_cast<double>(o) + d + n);
  });
  return out;
}

}  // namespace viewfl::privacy

#endif  // VIEWFL_PRIVACY_DP_HPP_
