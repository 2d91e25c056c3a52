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

#ifndef VIEWFL_SERVER_HTTP_HPP_
#define VIEWFL_SERVER_HTTP_HPP_

// HTTP binding of FlServer (cpp-httplib). Requires CPPHTTPLIB_ZLIB_SUPPORT so
// gzip-coded request bodies are accepted.
//
//   GET  /model?wait_ms=N   Cookie: adfl_tag=<tag> (or ?tag=<tag>)
//        200 model JSON + Set-Cookie, 204 no new model, 400 malformed tag
//   POST /update            200 accepted, 409 stale tag, 400 invalid, 410 stopped
//   GET  /status            status JSON
//   GET  /registry          feature registry text (when configured)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "httplib.h"
#include "viewfl/base/codec.hpp"
#include "viewfl/server/endpoint.hpp"
#include "viewfl/server/fl_server.hpp"

namespace viewfl::server {

inline constexpr std::string_view kJsonType = "application/json; charset=utf-8";

// Value of `name` in a Cookie header, if present.
inline std::optional<std::string> CookieValue(std::string_view header, std::string_view name) {
  while (!header.empty()) {
    const auto semi = header.find(';');
    auto part = header.substr(0, semi);
    header = semi == std::string_view::npos ? std::string_view{} : header.substr(semi + 1);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    const auto eq = part.find('=');
    if (eq != std::string_view::npos && part.substr(0, eq) == name) {
      return std::string(part.substr(eq + 1));
    }
  }
  return std::nullopt;
}

struct HttpOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds any free port
  std::string static_dir;
  std::string registry_text;
  std::chrono::milliseconds max_wait{30000};
  std::chrono::milliseconds timeout_check_interval{250};
  std::size_t worker_threads = 64;
};

class HttpService {
 public:
  HttpService(FlServer& server, HttpOptions options)
      : server_(server), options_(std::move(options)) {
    const auto threads = options_.worker_threads;
    http_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    http_.Get("/model", [this](const httplib::Request& req, httplib::Response& res) {
      GetModel(req, res);
    });
    http_.Post("/update", [this](const httplib::Request& req, httplib::Response& res) {
      PostUpdate(req, res);
    });
    http_.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(StatusToJson(server_.Status()).dump(), std::string(kJsonType));
    });
    http_.Get("/registry", [this](const httplib::Request&, httplib::Response& res) {
      if (options_.registry_text.empty()) {
        res.status = 404;
        return;
      }
      res.set_content(options_.registry_text, "text/plain; charset=utf-8");
    });
    if (!options_.static_dir.empty()) http_.set_mount_point("/", options_.static_dir);
  }

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;
  ~HttpService() { Stop(); }

  // Binds and serves on background threads. Returns the bound port.
  int Start() {
    if (options_.port == 0) {
      port_ = http_.bind_to_any_port(options_.host);
    } else {
      port_ = http_.bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (port_ < 0) {
      throw std::runtime_error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    listener_ = std::thread([this] { http_.listen_after_bind(); });
    ticker_ = std::thread([this] {
      std::unique_lock lock(tick_mu_);
      while (!stopping_) {
        tick_cv_.wait_for(lock, options_.timeout_check_interval);
        if (stopping_) break;
        lock.unlock();
        server_.CheckRoundTimeout();
        lock.lock();
      }
    });
    http_.wait_until_ready();
    return port_;
  }

  void Stop() {
    {
      std::lock_guard lock(tick_mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    tick_cv_.notify_all();
    server_.Shutdown();
    http_.stop();
    if (listener_.joinable()) listener_.join();
    if (ticker_.joinable()) ticker_.join();
  }

  int port() const { return port_; }

 private:
  void GetModel(const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> tag;
    if (req.has_param("tag")) {
      tag = req.get_param_value("tag");
    } else if (req.has_header("Cookie")) {
      tag = CookieValue(req.get_header_value("Cookie"), kTagCookie);
    }
    auto wait = options_.max_wait;
    if (req.has_param("wait_ms")) {
      try {
        wait = std::min(wait, std::chrono::milliseconds(std::stoll(req.get_param_value("wait_ms"))));
      } catch (const std::exception&) {
        res.status = 400;
        res.set_content(R"({"error":"bad wait_ms"})", std::string(kJsonType));
        return;
      }
    }
    const auto r = server_.HandleGetModel(tag, wait);
    switch (r.kind) {
      case GetModelResult::Kind::kBadRequest:
        res.status = 400;
        res.set_content(json{{"error", r.error}}.dump(), std::string(kJsonType));
        return;
      case GetModelResult::Kind::kNoNewContent:
        res.status = 204;
        return;
      case GetModelResult::Kind::kModel:
        break;
    }
    res.status = 200;
    res.set_header("Set-Cookie", std::string(kTagCookie) + "=" + r.release->tag +
                                     "; Path=/; SameSite=Strict");
    res.set_header("Cache-Control", "no-store");
    if (req.get_header_value("Accept-Encoding").find("gzip") != std::string::npos) {
      res.set_header("Content-Encoding", "gzip");
      res.set_content(r.release->gzip_body, std::string(kJsonType));
    } else {
      res.set_content(r.release->body, std::string(kJsonType));
    }
  }

  void PostUpdate(const httplib::Request& req, httplib::Response& res) {
    UploadReply reply;
    try {
      reply = server_.HandlePostUpdate(DecodeUpdate(req.body));
    } catch (const std::exception& e) {
      reply.status = UploadStatus::kInvalid;
      reply.reason = e.what();
      reply.current_tag = server_.Status(0).tag;
    }
    res.status = HttpStatusOf(reply.status);
    res.set_content(EncodeUploadReply(reply), std::string(kJsonType));
  }

  FlServer& server_;
  HttpOptions options_;
  httplib::Server http_;
  int port_ = -1;
  std::thread listener_;
  std::thread ticker_;
  std::mutex tick_mu_;
  std::condition_variable tick_cv_;
  bool stopping_ = false;
};

// Client side of the HTTP protocol. Bodies travel gzip-coded in both
// directions; traffic counts the coded bytes.
class HttpEndpoint final : public ModelEndpoint {
 public:
  HttpEndpoint(std::string host, int port, OutboundObserver observer = {})
      : host_(std::move(host)), port_(port), observer_(std::move(observer)) {}

  FetchResult FetchModel(const std::optional<std::string>& tag,
                         std::chrono::milliseconds wait) override {
    auto cli = MakeClient(wait);
    httplib::Headers headers{{"Accept-Encoding", "gzip"}};
    if (tag) headers.emplace("Cookie", std::string(kTagCookie) + "=" + *tag);
    const auto res = cli.Get("/model?wait_ms=" + std::to_string(wait.count()), headers);
    FetchResult out;
    if (!res) {
      out.kind = FetchResult::Kind::kUnreachable;
      out.error = httplib::to_string(res.error());
      return out;
    }
    if (res->status == 204) {
      out.kind = FetchResult::Kind::kNoNewContent;
      return out;
    }
    if (res->status != 200) {
      out.kind = FetchResult::Kind::kBadRequest;
      out.error = res->body;
      return out;
    }
    traffic_.AddDown(res->body.size(), true);
    const bool gz = res->get_header_value("Content-Encoding") == "gzip";
    out.kind = FetchResult::Kind::kModel;
    out.message = DecodeModelMessage(gz ? GzipDecompress(res->body) : res->body);
    return out;
  }

  UploadReply Upload(const ClientUpdate& update) override {
    const std::string body = EncodeUpdate(update);
    if (observer_) observer_("/update", body);
    const std::string wire = GzipCompress(body);
    auto cli = MakeClient(std::chrono::milliseconds(0));
    const auto res = cli.Post("/update", {{"Content-Encoding", "gzip"}}, wire,
                              std::string(kJsonType));
    if (!res) {
      UploadReply r;
      r.status = UploadStatus::kUnreachable;
      r.reason = httplib::to_string(res.error());
      return r;
    }
    traffic_.AddUp(wire.size());
    traffic_.AddDown(res->body.size(), false);
    return DecodeUploadReply(res->get_header_value("Content-Encoding") == "gzip"
                                 ? GzipDecompress(res->body)
                                 : res->body);
  }

  Traffic traffic() const override { return traffic_.Get(); }

 private:
  httplib::Client MakeClient(std::chrono::milliseconds wait) const {
    httplib::Client cli(host_, port_);
    cli.set_decompress(false);
    cli.set_connection_timeout(std::chrono::seconds(5));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(wait) +
                         std::chrono::seconds(30));
    return cli;
  }

  std::string host_;
  int port_;
  OutboundObserver observer_;
  TrafficCounter traffic_;
};

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_HTTP_HPP_
