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

#ifndef VIEWFL_SERVER_ENDPOINT_HPP_
#define VIEWFL_SERVER_ENDPOINT_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "viewfl/base/codec.hpp"
#include "viewfl/server/fl_server.hpp"
#include "viewfl/server/protocol.hpp"

namespace viewfl::server {

// Payload bytes as they crossed the wire (after content coding).
struct Traffic {
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t model_downloads = 0;
  std::uint64_t uploads = 0;
};

struct FetchResult {
  enum class Kind { kModel, kNoNewContent, kBadRequest, kUnreachable };
  Kind kind = Kind::kUnreachable;
  std::optional<ModelMessage> message;
  std::string error;
};

// Called with (path, body) for every client-to-server request body.
using OutboundObserver = std::function<void(std::string_view, std::string_view)>;

// What a client sees of the server.
class ModelEndpoint {
 public:
  virtual ~ModelEndpoint() = default;
  virtual FetchResult FetchModel(const std::optional<std::string>& tag,
                                 std::chrono::milliseconds wait) = 0;
  virtual UploadReply Upload(const ClientUpdate& update) = 0;
  virtual Traffic traffic() const = 0;
};

class TrafficCounter {
 public:
  void AddDown(std::uint64_t n, bool model) {
    down_ += n;
    if (model) ++downloads_;
  }
  void AddUp(std::uint64_t n) {
    up_ += n;
    ++uploads_;
  }
  Traffic Get() const { return {down_.load(), up_.load(), downloads_.load(), uploads_.load()}; }

 private:
  std::atomic<std::uint64_t> down_{0}, up_{0}, downloads_{0}, uploads_{0};
};

// Calls an FlServer directly, moving the same gzip-coded bodies as the HTTP
// service. Byte counts match the network path.
class InProcessEndpoint final : public ModelEndpoint {
 public:
  explicit InProcessEndpoint(FlServer& server, OutboundObserver observer = {})
      : server_(server), observer_(std::move(observer)) {}

  FetchResult FetchModel(const std::optional<std::string>& tag,
                         std::chrono::milliseconds wait) override {
    const auto r = server_.HandleGetModel(tag, wait);
    FetchResult out;
    switch (r.kind) {
      case GetModelResult::Kind::kBadRequest:
        out.kind = FetchResult::Kind::kBadRequest;
        out.error = r.error;
        return out;
      case GetModelResult::Kind::kNoNewContent:
        out.kind = FetchResult::Kind::kNoNewContent;
        return out;
      case GetModelResult::Kind::kModel:
        break;
    }
    traffic_.AddDown(r.release->gzip_body.size(), true);
    out.kind = FetchResult::Kind::kModel;
    out.message = DecodeModelMessage(GzipDecompress(r.release->gzip_body));
    return out;
  }

  UploadReply Upload(const ClientUpdate& update) override {
    const std::string body = EncodeUpdate(update);
    if (observer_) observer_("/update", body);
    const std::string wire = GzipCompress(body);
    traffic_.AddUp(wire.size());
    const std::string reply = EncodeUploadReply(server_.HandlePostUpdate(DecodeUpdate(GzipDecompress(wire))));
    traffic_.AddDown(reply.size(), false);
    return DecodeUploadReply(reply);
  }

  Traffic traffic() const override { return traffic_.Get(); }

 private:
  FlServer& server_;
  OutboundObserver observer_;
  TrafficCounter traffic_;
};

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_ENDPOINT_HPP_
