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

#ifndef VIEWFL_CLIENT_STORE_HPP_
#define VIEWFL_CLIENT_STORE_HPP_

// Client-local store with three named collections:
//   processedData  samples, one JSON line each (processedData.jsonl)
//   sessionData    SessionState (sessionData.json)
//   configuration  free-form settings (configuration.json)

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/preprocess/session.hpp"
#include "viewfl/sample.hpp"

namespace viewfl::client {

using nlohmann::ordered_json;

inline constexpr std::string_view kProcessedDataStore = "processedData";
inline constexpr std::string_view kConfigurationStore = "configuration";
inline constexpr std::string_view kSessionDataStore = "sessionData";

inline std::string EncodeSample(const Sample& s) {
  ordered_json j;
  j["ad_id"] = s.ad_id;
  j["timestamp"] = s.timestamp;
  j["registry_hash"] = Hex16(s.registry_hash);
  j["label_viewable"] = s.label_viewable;
  j["binary"] = s.binary;
  j["numerical"] = s.numerical;
  j["categorical"] = s.categorical;
  return j.dump();
}

inline Sample DecodeSample(std::string_view line) {
  try {
    const auto j = ordered_json::parse(line);
    Sample s;
    s.ad_id = j.at("ad_id").get<std::string>();
    s.timestamp = j.at("timestamp").get<double>();
    s.registry_hash = ParseHex16(j.at("registry_hash").get<std::string>());
    s.label_viewable = j.at("label_viewable").get<std::uint8_t>();
    s.binary = j.at("binary").get<std::vector<std::uint8_t>>();
    s.numerical = j.at("numerical").get<std::vector<double>>();
    s.categorical = j.at("categorical").get<std::vector<std::uint32_t>>();
    return s;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad sample line: ") + e.what());
  }
}

inline ordered_json SessionToJson(const preprocess::SessionState& s) {
  ordered_json req = ordered_json::array();
  for (const auto& r : s.prior_page_requests) req.push_back({Hex16(r.url_hash), r.timestamp});
  return ordered_json{{"session_id", s.session_id}, {"prior_page_requests", std::move(req)}};
}

// Derived counters are recomputed from the request list, not trusted.
inline preprocess::SessionState SessionFromJson(const ordered_json& j, double timeout_s) {
  std::vector<preprocess::PageRequest> reqs;
  for (const auto& r : j.at("prior_page_requests")) {
    reqs.push_back({ParseHex16(r.at(0).get<std::string>()), r.at(1).get<double>()});
  }
  return preprocess::RecomputeSession(std::move(reqs), timeout_s);
}

class ClientStore {
 public:
  // Inserts or replaces by ad_id, keeping insertion order.
  void Put(Sample s) {
    const auto it = index_.find(s.ad_id);
    if (it != index_.end()) {
      samples_[it->second] = std::move(s);
      return;
    }
    index_.emplace(s.ad_id, samples_.size());
    samples_.push_back(std::move(s));
  }

  Sample* Find(const std::string& ad_id) {
    const auto it = index_.find(ad_id);
    return it == index_.end() ? nullptr : &samples_[it->second];
  }

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }

  preprocess::SessionState session;
  ordered_json configuration = ordered_json::object();

  void Save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
      std::ofstream out(dir / (std::string(kProcessedDataStore) + ".jsonl"), std::ios::trunc);
      for (const auto& s : samples_) out << EncodeSample(s) << '\n';
      if (!out) throw std::runtime_error("failed writing processedData");
    }
    std::ofstream(dir / (std::string(kSessionDataStore) + ".json"), std::ios::trunc)
        << SessionToJson(session).dump() << '\n';
    std::ofstream(dir / (std::string(kConfigurationStore) + ".json"), std::ios::trunc)
        << configuration.dump() << '\n';
  }

  // Missing files load as empty collections.
  static ClientStore Load(const std::filesystem::path& dir,
                          double session_timeout_s = preprocess::kDefaultSessionTimeoutS) {
    ClientStore store;
    if (std::ifstream in(dir / (std::string(kProcessedDataStore) + ".jsonl")); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) store.Put(DecodeSample(line));
      }
    }
    if (std::ifstream in(dir / (std::string(kSessionDataStore) + ".json")); in) {
      store.session = SessionFromJson(ordered_json::parse(in), session_timeout_s);
    }
    if (std::ifstream in(dir / (std::string(kConfigurationStore) + ".json")); in) {
      store.configuration = ordered_json::parse(in);
    }
    return store;
  }

 private:
  std::vector<Sample> samples_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace viewfl::client

#endif  // VIEWFL_CLIENT_STORE_HPP_
