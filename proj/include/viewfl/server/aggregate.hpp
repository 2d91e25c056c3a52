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

#ifndef VIEWFL_SERVER_AGGREGATE_HPP_
#define VIEWFL_SERVER_AGGREGATE_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/server/types.hpp"

namespace viewfl::server {

// FedAvg: theta* = sum_i p_i * theta_i / sum_i p_i, element-wise.
// All updates must share base_tag and config hash.
template <class T>
model::BasicParams<T> Aggregate(std::span<const BasicClientUpdate<T>> updates) {
  if (updates.empty()) throw AggregationError("aggregate needs at least one update");
  const auto& first = updates.front();
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.params.config_hash() != first.params.config_hash()) {
      throw AggregationError("aggregate: mixed config hashes");
    }
    if (!u.params.SameShape(first.params)) throw AggregationError("aggregate: shape mismatch");
    if (u.base_tag != first.base_tag) throw AggregationError("aggregate: mixed base tags");
    if (u.num_samples < 1) throw AggregationError("aggregate: num_samples must be >= 1");
    total += static_cast<double>(u.num_samples);
  }

  model::BasicParams<T> out(first.params.config());
  std::vector<double> acc;
  for (std::size_t li = 0; li < out.layers().size(); ++li) {
    auto& dst = out.layer(li).values;
    acc.assign(dst.size(), 0.0);
    for (const auto& u : updates) {
      const double w = static_cast<double>(u.num_samples) / total;
      const auto& src = u.params.layer(li).values;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += w * static_cast<double>(src[j]);
    }
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<T>(acc[j]);
  }
  if (!out.AllFinite()) throw AggregationError("aggregate produced non-finite parameters");
  return out;
}

enum class StopDecision { kContinue, kStop };

// Stop once the best validation loss is more than `patience` rounds old, or
// the latest round reached max_rounds. The earliest round wins ties;
// entries with a NaN loss are ignored for the patience rule.
inline StopDecision ShouldStop(std::span<const HistoryEntry> history, std::uint64_t patience,
                               std::uint64_t max_rounds) {
  if (history.empty()) return StopDecision::kContinue;
  const std::uint64_t current = history.back().round;
  if (current >= max_rounds) return StopDecision::kStop;
  const HistoryEntry* best = nullptr;
  for (const auto& h : history) {
    if (std::isnan(h.validation_loss)) continue;
    if (!best || h.validation_loss < best->validation_loss) best = &h;
  }
  if (best && current - best->round > patience) return StopDecision::kStop;
  return StopDecision::kContinue;
}

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_AGGREGATE_HPP_
