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

#ifndef VIEWFL_CLIENT_VIEWABILITY_HPP_
#define VIEWFL_CLIENT_VIEWABILITY_HPP_

#include <algorithm>
#include <span>
#include <string>
#include <string_view>

#include "viewfl/base/error.hpp"

namespace viewfl::client {

inline constexpr double kViewableFraction = 0.5;
inline constexpr double kViewableSeconds = 1.0;

struct VisibilityInterval {
  double visible_fraction = 0.0;
  double duration_s = 0.0;
};

// 1 iff one continuous interval has >= 50% visible for >= 1 s.
inline std::uint8_t DeriveViewabilityLabel(std::span<const VisibilityInterval> intervals) {
  for (const auto& iv : intervals) {
    if (iv.visible_fraction >= kViewableFraction && iv.duration_s >= kViewableSeconds) return 1;
  }
  return 0;
}

enum class MetricFlag { kStorage, kUpdate, kInference };

inline std::string_view ToString(MetricFlag f) {
  switch (f) {
    case MetricFlag::kStorage: return "storage";
    case MetricFlag::kUpdate: return "update";
    case MetricFlag::kInference: return "inference";
  }
  return "?";
}

struct MetricUpdate {
  std::string ad_id;
  std::string metric = "viewable";
  std::uint8_t value = 0;
  MetricFlag flag = MetricFlag::kUpdate;
};

enum class InvokerAction { kKeepSchedule, kShortenRefresh, kExtendRefresh };

inline std::string_view ToString(InvokerAction a) {
  switch (a) {
    case InvokerAction::kKeepSchedule: return "keep_schedule";
    case InvokerAction::kShortenRefresh: return "shorten_refresh";
    case InvokerAction::kExtendRefresh: return "extend_refresh";
  }
  return "?";
}

struct InvokerConfig {
  double low_threshold = 0.3;
  double high_threshold = 0.7;
  double baseline_refresh_s = 30.0;
  double min_refresh_s = 15.0;
  double max_refresh_s = 60.0;

  void Validate() const {
    if (!(0.0 <= low_threshold && low_threshold <= high_threshold && high_threshold <= 1.0)) {
      throw ConfigError("invoker thresholds must satisfy 0 <= low <= high <= 1");
    }
    if (!(0.0 < min_refresh_s && min_refresh_s <= max_refresh_s)) {
      throw ConfigError("invoker refresh bounds must satisfy 0 < min <= max");
    }
  }
};

struct InvokerDecision {
  std::string ad_id;
  double predicted_viewable = 0.0;
  InvokerAction action = InvokerAction::kKeepSchedule;
  double new_refresh_s = 0.0;
};

// Likely non-viewable ads expire sooner (refresh halved), likely viewable
// ones stay longer (refresh doubled), both within [min, max].
inline InvokerDecision Invoke(double prediction, double current_refresh_s,
                              const InvokerConfig& cfg = {}, std::string ad_id = {}) {
  InvokerDecision d;
  d.ad_id = std::move(ad_id);
  d.predicted_viewable = prediction;
  d.new_refresh_s = current_refresh_s;
  if (prediction < cfg.low_threshold) {
    d.action = InvokerAction::kShortenRefresh;
    d.new_refresh_s = std::max(cfg.min_refresh_s, current_refresh_s / 2.0);
  } else if (prediction > cfg.high_threshold) {
    d.action = InvokerAction::kExtendRefresh;
    d.new_refresh_s = std::min(cfg.max_refresh_s, current_refresh_s * 2.0);
  }
  return d;
}

}  // namespace viewfl::client

#endif  // VIEWFL_CLIENT_VIEWABILITY_HPP_
