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

#ifndef VIEWFL_SERVER_CHECKPOINT_HPP_
#define VIEWFL_SERVER_CHECKPOINT_HPP_

// Checkpoint file: one header line
//   "viewfl-checkpoint 1 <fnv1a64 hex16 of body>\n"
// followed by a JSON body {tag, round, status, history, model}, where
// "model" is the canonical ModelParams document.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include "json.hpp"
#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/model/serialize.hpp"
#include "viewfl/server/protocol.hpp"
#include "viewfl/server/types.hpp"

namespace viewfl::server {

inline constexpr std::string_view kCheckpointMagic = "viewfl-checkpoint 1 ";

inline std::string EncodeCheckpoint(const GlobalModelState& s) {
  json history = json::array();
  for (const auto& h : s.history) history.push_back(HistoryToJson(h));
  const json body{{"tag", s.tag},
                  {"round", s.round},
                  {"status", ToString(s.status)},
                  {"history", std::move(history)},
                  {"model", model::ParamsToJson(s.params)}};
  const std::string text = body.dump();
  return std::string(kCheckpointMagic) + Hex16(Fnv1a64(text)) + "\n" + text;
}

inline GlobalModelState DecodeCheckpoint(std::string_view data) {
  if (data.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError("not a viewfl checkpoint");
  }
  const auto nl = data.find('\n');
  if (nl == std::string_view::npos || nl != kCheckpointMagic.size() + 16) {
    throw FormatError("malformed checkpoint header");
  }
  const auto digest = data.substr(kCheckpointMagic.size(), 16);
  const auto body = data.substr(nl + 1);
  if (Hex16(Fnv1a64(body)) != digest) throw FormatError("checkpoint checksum mismatch");
  try {
    const json j = json::parse(body);
    GlobalModelState s;
    s.tag = j.at("tag").get<std::string>();
    s.round = j.at("round").get<std::uint64_t>();
    s.status = ParseServerStatus(j.at("status").get<std::string>());
    for (const auto& h : j.at("history")) s.history.push_back(HistoryFromJson(h));
    s.params = model::ParamsFromJson(j.at("model"));
    if (s.tag != MakeTag(s.round, s.params.config_hash())) {
      throw FormatError("checkpoint tag does not match round/config");
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint body: ") + e.what());
  }
}

// Writes a temporary file, then renames it into place.
inline void SaveCheckpoint(const GlobalModelState& s, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint file " + tmp.string());
    const std::string data = EncodeCheckpoint(s);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move checkpoint into place: " + ec.message());
}

inline GlobalModelState LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return DecodeCheckpoint(ss.str());
}

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_CHECKPOINT_HPP_
