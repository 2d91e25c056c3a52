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

#ifndef VIEWFL_CLIENT_EVENTS_HPP_
#define VIEWFL_CLIENT_EVENTS_HPP_

// AdEventLog: one JSON object per line, keys in a fixed order.
//   {"kind":"page_request","ts":T,"page_url":U,"context":{...}}
//   {"kind":"ad_load","ts":T,"page_url":U,"ad_placement_id":P,"ad_id":A,"ad_metadata":{...}}
//   {"kind":"visibility_interval","ts":T,"ad_id":A,"visible_fraction":F,"duration_s":D}
//   {"kind":"session_end","ts":T}
// context/ad_metadata map raw feature names to strings, numbers or booleans.

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "viewfl/base/error.hpp"
#include "viewfl/preprocess/preprocess.hpp"

namespace viewfl::client {

using nlohmann::ordered_json;

enum class EventKind { kPageRequest, kAdLoad, kVisibilityInterval, kSessionEnd };

inline std::string_view ToString(EventKind k) {
  switch (k) {
    case EventKind::kPageRequest: return "page_request";
    case EventKind::kAdLoad: return "ad_load";
    case EventKind::kVisibilityInterval: return "visibility_interval";
    case EventKind::kSessionEnd: return "session_end";
  }
  return "?";
}

inline EventKind ParseEventKind(std::string_view s) {
  if (s == "page_request") return EventKind::kPageRequest;
  if (s == "ad_load") return EventKind::kAdLoad;
  if (s == "visibility_interval") return EventKind::kVisibilityInterval;
  if (s == "session_end") return EventKind::kSessionEnd;
  throw FormatError("unknown event kind '" + std::string(s) + "'");
}

struct AdEvent {
  EventKind kind = EventKind::kPageRequest;
  double timestamp = 0.0;  // seconds
  std::string page_url;
  std::string ad_placement_id;
  std::string ad_id;
  double visible_fraction = 0.0;
  double duration_s = 0.0;
  preprocess::RawRecord ad_metadata;  // ad_load
  preprocess::RawRecord context;      // page_request: user and page values

  friend bool operator==(const AdEvent&, const AdEvent&) = default;
};

inline ordered_json RawToJson(const preprocess::RawRecord& raw) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : raw) {
    std::visit([&](const auto& x) { j[k] = x; }, v);
  }
  return j;
}

inline preprocess::RawRecord RawFromJson(const ordered_json& j) {
  if (!j.is_object()) throw FormatError("raw record must be an object");
  preprocess::RawRecord raw;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) raw[k] = v.get<std::string>();
    else if (v.is_boolean()) raw[k] = v.get<bool>();
    else if (v.is_number()) raw[k] = v.get<double>();
    else if (!v.is_null()) throw FormatError("raw value for '" + k + "' has unsupported type");
  }
  return raw;
}

inline std::string EncodeEvent(const AdEvent& e) {
  ordered_json j;
  j["kind"] = ToString(e.kind);
  j["ts"] = e.timestamp;
  switch (e.kind) {
    case EventKind::kPageRequest:
      j["page_url"] = e.page_url;
      j["context"] = RawToJson(e.context);
      break;
    case EventKind::kAdLoad:
      j["page_url"] = e.page_url;
      j["ad_placement_id"] = e.ad_placement_id;
      j["ad_id"] = e.ad_id;
      j["ad_metadata"] = RawToJson(e.ad_metadata);
      break;
    case EventKind::kVisibilityInterval:
      j["ad_id"] = e.ad_id;
      j["visible_fraction"] = e.visible_fraction;
      j["duration_s"] = e.duration_s;
      break;
    case EventKind::kSessionEnd:
      break;
  }
  return j.dump();
}

// Throws FormatError on malformed lines, including out-of-range fields.
inline AdEvent DecodeEvent(std::string_view line) {
  try {
    const auto j = ordered_json::parse(line);
    AdEvent e;
    e.kind = ParseEventKind(j.at("kind").get<std::string>());
    e.timestamp = j.at("ts").get<double>();
    if (!std::isfinite(e.timestamp)) throw FormatError("non-finite timestamp");
    switch (e.kind) {
      case EventKind::kPageRequest:
        e.page_url = j.at("page_url").get<std::string>();
        if (j.contains("context")) e.context = RawFromJson(j.at("context"));
        break;
      case EventKind::kAdLoad:
        e.page_url = j.value("page_url", "");
        e.ad_placement_id = j.at("ad_placement_id").get<std::string>();
        e.ad_id = j.at("ad_id").get<std::string>();
        if (j.contains("ad_metadata")) e.ad_metadata = RawFromJson(j.at("ad_metadata"));
        if (e.ad_id.empty()) throw FormatError("empty ad_id");
        break;
      case EventKind::kVisibilityInterval:
        e.ad_id = j.at("ad_id").get<std::string>();
        e.visible_fraction = j.at("visible_fraction").get<double>();
        e.duration_s = j.at("duration_s").get<double>();
        if (!(e.visible_fraction >= 0.0 && e.visible_fraction <= 1.0)) {
          throw FormatError("visible_fraction outside [0, 1]");
        }
        if (!(e.duration_s >= 0.0) || !std::isfinite(e.duration_s)) {
          throw FormatError("bad duration_s");
        }
        break;
      case EventKind::kSessionEnd:
        break;
    }
    return e;
  } catch (const ordered_json::exception& ex) {
    throw FormatError(std::string("bad event line: ") + ex.what());
  }
}

struct EventLog {
  std::vector<AdEvent> events;
  std::size_t malformed = 0;
};

// Blank lines are ignored; malformed lines are skipped and counted.
inline EventLog ReadEventLog(std::istream& in) {
  EventLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.events.push_back(DecodeEvent(line));
    } catch (const FormatError&) {
      ++log.malformed;
    }
  }
  return log;
}

inline void WriteEventLog(std::ostream& out, const std::vector<AdEvent>& events) {
  for (const auto& e : events) out << EncodeEvent(e) << '\n';
}

}  // namespace viewfl::client

#endif  // VIEWFL_CLIENT_EVENTS_HPP_
