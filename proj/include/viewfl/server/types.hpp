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

#ifndef VIEWFL_SERVER_TYPES_HPP_
#define VIEWFL_SERVER_TYPES_HPP_

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/model/params.hpp"

namespace viewfl::server {

// Locally trained parameters uploaded by one client (full parameters, not a
// delta). num_samples is the FedAvg weight p_i.
template <class T>
struct BasicClientUpdate {
  std::string client_id;
  std::string base_tag;
  std::uint64_t num_samples = 0;
  bool dp_applied = false;
  model::BasicParams<T> params;
};

using ClientUpdate = BasicClientUpdate<float>;

enum class Selection { kAll, kTopKBySamples };

struct RoundPolicy {
  std::size_t min_clients_per_round = 1;
  double round_timeout_s = 60.0;
  std::uint64_t max_rounds = 100;
  std::uint64_t patience = 7;
  Selection selection = Selection::kAll;
  std::size_t top_k = 0;  // used with kTopKBySamples

  void Validate() const {
    if (min_clients_per_round < 1) throw ConfigError("min_clients_per_round must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
    if (selection == Selection::kTopKBySamples && top_k < 1) {
      throw ConfigError("top_k_by_samples needs top_k >= 1");
    }
  }
};

enum class ServerStatus { kCollecting, kAggregating, kStopped };

inline std::string_view ToString(ServerStatus s) {
  switch (s) {
    case ServerStatus::kCollecting: return "collecting";
    case ServerStatus::kAggregating: return "aggregating";
    case ServerStatus::kStopped: return "stopped";
  }
  return "?";
}

inline ServerStatus ParseServerStatus(std::string_view s) {
  if (s == "collecting") return ServerStatus::kCollecting;
  if (s == "aggregating") return ServerStatus::kAggregating;
  if (s == "stopped") return ServerStatus::kStopped;
  throw FormatError("unknown server status '" + std::string(s) + "'");
}

struct HistoryEntry {
  std::uint64_t round = 0;
  std::string tag;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
  std::optional<double> validation_auc;
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct GlobalModelState {
  model::ModelParams params;
  std::string tag;
  std::uint64_t round = 0;
  std::vector<HistoryEntry> history;
  ServerStatus status = ServerStatus::kCollecting;
};

// "r{round}-{hex8 of config_hash}".
inline std::string MakeTag(std::uint64_t round, std::uint64_t config_hash) {
  return "r" + std::to_string(round) + "-" + Hex8(config_hash);
}

struct ParsedTag {
  std::uint64_t round = 0;
  std::string config_hash8;
};

inline std::optional<ParsedTag> ParseTag(std::string_view tag) {
  if (tag.size() < 4 || tag[0] != 'r') return std::nullopt;
  const auto dash = tag.find('-');
  if (dash == std::string_view::npos || dash == 1 || tag.size() - dash - 1 != 8) return std::nullopt;
  ParsedTag out;
  const auto digits = tag.substr(1, dash - 1);
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), out.round);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) return std::nullopt;
  out.config_hash8 = std::string(tag.substr(dash + 1));
  for (const char c : out.config_hash8) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return std::nullopt;
  }
  return out;
}

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_TYPES_HPP_
