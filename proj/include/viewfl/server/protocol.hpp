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

#ifndef VIEWFL_SERVER_PROTOCOL_HPP_
#define VIEWFL_SERVER_PROTOCOL_HPP_

// JSON bodies of the model-distribution protocol:
//   GET  /model   -> ModelMessage (200) or no content (204)
//   POST /update  <- ClientUpdate, -> UploadReply
//   GET  /status  -> status document
// Layer payloads use the canonical ModelParams encoding.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "viewfl/model/serialize.hpp"
#include "viewfl/server/types.hpp"

namespace viewfl::server {

using nlohmann::json;

inline constexpr std::string_view kTagCookie = "adfl_tag";

struct ModelMessage {
  std::string tag;
  std::uint64_t round = 0;
  ServerStatus status = ServerStatus::kCollecting;
  model::ModelParams params;
};

inline std::string EncodeModelMessage(const std::string& tag, std::uint64_t round,
                                      ServerStatus status, const model::ModelParams& params) {
  json j{{"tag", tag},
         {"round", round},
         {"status", ToString(status)},
         {"config", model::ConfigToJson(params.config())}};
  model::WriteLayers(params, j);
  return j.dump();
}

inline ModelMessage DecodeModelMessage(std::string_view body) {
  try {
    const json j = json::parse(body);
    ModelMessage m;
    m.tag = j.at("tag").get<std::string>();
    m.round = j.at("round").get<std::uint64_t>();
    m.status = ParseServerStatus(j.at("status").get<std::string>());
    m.params = model::ParamsFromJson(j);
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model message: ") + e.what());
  }
}

inline std::string EncodeUpdate(const ClientUpdate& u) {
  json j{{"client_id", u.client_id},
         {"base_tag", u.base_tag},
         {"num_samples", u.num_samples},
         {"dp_applied", u.dp_applied},
         {"config", model::ConfigToJson(u.params.config())}};
  model::WriteLayers(u.params, j);
  return j.dump();
}

inline ClientUpdate DecodeUpdate(std::string_view body) {
  try {
    const json j = json::parse(body);
    ClientUpdate u;
    u.client_id = j.at("client_id").get<std::string>();
    u.base_tag = j.at("base_tag").get<std::string>();
    u.num_samples = j.at("num_samples").get<std::uint64_t>();
    u.dp_applied = j.value("dp_applied", false);
    u.params = model::ParamsFromJson(j);
    return u;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad update: ") + e.what());
  }
}

enum class UploadStatus { kAccepted, kConflict, kInvalid, kStopped, kUnreachable };

inline std::string_view ToString(UploadStatus s) {
  switch (s) {
    case UploadStatus::kAccepted: return "accepted";
    case UploadStatus::kConflict: return "conflict";
    case UploadStatus::kInvalid: return "invalid";
    case UploadStatus::kStopped: return "stopped";
    case UploadStatus::kUnreachable: return "unreachable";
  }
  return "?";
}

struct UploadReply {
  UploadStatus status = UploadStatus::kInvalid;
  std::string current_tag;
  std::string reason;
};

inline int HttpStatusOf(UploadStatus s) {
  switch (s) {
    case UploadStatus::kAccepted: return 200;
    case UploadStatus::kConflict: return 409;
    case UploadStatus::kInvalid: return 400;
    case UploadStatus::kStopped: return 410;
    case UploadStatus::kUnreachable: return 503;
  }
  return 500;
}

inline std::string EncodeUploadReply(const UploadReply& r) {
  json j{{"result", ToString(r.status)}, {"current_tag", r.current_tag}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j.dump();
}

inline UploadReply DecodeUploadReply(std::string_view body) {
  try {
    const json j = json::parse(body);
    UploadReply r;
    const auto s = j.at("result").get<std::string>();
    if (s == "accepted") r.status = UploadStatus::kAccepted;
    else if (s == "conflict") r.status = UploadStatus::kConflict;
    else if (s == "invalid") r.status = UploadStatus::kInvalid;
    else if (s == "stopped") r.status = UploadStatus::kStopped;
    else throw FormatError("unknown upload result '" + s + "'");
    r.current_tag = j.value("current_tag", "");
    r.reason = j.value("reason", "");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad upload reply: ") + e.what());
  }
}

inline json HistoryToJson(const HistoryEntry& h) {
  const auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return json{{"round", h.round},
              {"tag", h.tag},
              {"validation_loss", num(h.validation_loss)},
              {"validation_accuracy", num(h.validation_accuracy)},
              {"validation_auc", h.validation_auc ? json(*h.validation_auc) : json(nullptr)}};
}

inline HistoryEntry HistoryFromJson(const json& j) {
  const auto num = [](const json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  HistoryEntry h;
  h.round = j.at("round").get<std::uint64_t>();
  h.tag = j.at("tag").get<std::string>();
  h.validation_loss = num(j.at("validation_loss"));
  h.validation_accuracy = num(j.at("validation_accuracy"));
  if (!j.at("validation_auc").is_null()) h.validation_auc = j.at("validation_auc").get<double>();
  return h;
}

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_PROTOCOL_HPP_
