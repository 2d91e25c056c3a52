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

#ifndef VIEWFL_PREPROCESS_SESSION_HPP_
#define VIEWFL_PREPROCESS_SESSION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "viewfl/base/fnv1a.hpp"
#include "viewfl/preprocess/preprocess.hpp"

namespace viewfl::preprocess {

inline constexpr double kDefaultSessionTimeoutS = 30.0 * 60.0;

struct PageRequest {
  std::uint64_t url_hash = 0;
  double timestamp = 0.0;
  friend bool operator==(const PageRequest&, const PageRequest&) = default;
};

// Visit history of one client. The derived counters are always a function
// of `prior_page_requests` and the timeout.
struct SessionState {
  std::uint64_t session_id = 0;  // 0 before the first request
  double session_start = 0.0;
  std::size_t pages_this_session = 0;
  std::vector<PageRequest> prior_page_requests;
  std::size_t pages_visited_total = 0;
  std::optional<double> seconds_since_last_visit;  // empty on the first visit
  std::size_t visits_count = 0;

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

struct SessionUpdate {
  SessionState state;
  std::optional<std::string> warning;  // set when the request was rejected
};

inline SessionState RecomputeSession(std::vector<PageRequest> requests,
                                     double timeout_s = kDefaultSessionTimeoutS) {
  SessionState s;
  s.prior_page_requests = std::move(requests);
  const auto& r = s.prior_page_requests;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i == 0 || r[i].timestamp - r[i - 1].timestamp > timeout_s) {
      ++s.visits_count;
      s.session_start = r[i].timestamp;
      s.pages_this_session = 0;
    }
    ++s.pages_this_session;
  }
  s.session_id = s.visits_count;
  s.pages_visited_total = r.size();
  if (r.size() >= 2) s.seconds_since_last_visit = r.back().timestamp - r[r.size() - 2].timestamp;
  return s;
}

// Appends a page request; a gap longer than `timeout_s` opens a new session.
// A timestamp earlier than the last request is rejected with a warning and
// leaves the state unchanged.
inline SessionUpdate ComputeSessionFeatures(const SessionState& prior, double now,
                                            std::string_view url,
                                            double timeout_s = kDefaultSessionTimeoutS) {
  if (!prior.prior_page_requests.empty() && now < prior.prior_page_requests.back().timestamp) {
    return {prior, "clock regression: page request at " + FormatNumber(now) +
                       " precedes " + FormatNumber(prior.prior_page_requests.back().timestamp)};
  }
  auto requests = prior.prior_page_requests;
  requests.push_back({Fnv1a64(url), now});
  return {RecomputeSession(std::move(requests), timeout_s), std::nullopt};
}

// Session counters as raw values for the registry's session features.
inline void AddSessionFeatures(const SessionState& s, RawRecord& raw) {
  raw["session_pages_this_session"] = static_cast<double>(s.pages_this_session);
  raw["session_pages_visited_total"] = static_cast<double>(s.pages_visited_total);
  raw["session_visits_count"] = static_cast<double>(s.visits_count);
  if (s.seconds_since_last_visit) raw["session_seconds_since_last_visit"] = *s.seconds_since_last_visit;
}

}  // namespace viewfl::preprocess

#endif  // VIEWFL_PREPROCESS_SESSION_HPP_
