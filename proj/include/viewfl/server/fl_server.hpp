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

#ifndef VIEWFL_SERVER_FL_SERVER_HPP_
#define VIEWFL_SERVER_FL_SERVER_HPP_

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "viewfl/base/codec.hpp"
#include "viewfl/model/metrics.hpp"
#include "viewfl/server/aggregate.hpp"
#include "viewfl/server/checkpoint.hpp"
#include "viewfl/server/protocol.hpp"
#include "viewfl/server/types.hpp"

namespace viewfl::server {

// A published global model. Immutable after release.
struct ModelRelease {
  std::string tag;
  std::uint64_t round = 0;
  ServerStatus status = ServerStatus::kCollecting;
  model::ModelParams params;
  std::string body;       // EncodeModelMessage
  std::string gzip_body;  // gzip(body)
};

struct ServerOptions {
  std::optional<std::filesystem::path> checkpoint_path;
  // Invoked under the server lock for every release, including round 0.
  std::function<void(const std::shared_ptr<const ModelRelease>&)> on_release;
};

struct GetModelResult {
  enum class Kind { kModel, kNoNewContent, kBadRequest };
  Kind kind = Kind::kNoNewContent;
  std::shared_ptr<const ModelRelease> release;
  std::string error;
};

struct StatusReport {
  std::uint64_t round = 0;
  std::string tag;
  ServerStatus status = ServerStatus::kCollecting;
  std::size_t clients_this_round = 0;
  std::vector<HistoryEntry> history_tail;
  std::string checkpoint_error;
};

inline json StatusToJson(const StatusReport& s) {
  json tail = json::array();
  for (const auto& h : s.history_tail) tail.push_back(HistoryToJson(h));
  json j{{"round", s.round},
         {"tag", s.tag},
         {"status", ToString(s.status)},
         {"clients_this_round", s.clients_this_round},
         {"history", std::move(tail)}};
  if (!s.checkpoint_error.empty()) j["checkpoint_error"] = s.checkpoint_error;
  return j;
}

// Round-based FedAvg coordinator. Rounds close when min_clients_per_round
// distinct clients have uploaded on the current tag, or on timeout with at
// least one update. All state transitions happen under one mutex;
// aggregation and release are a single critical section.
class FlServer {
 public:
  using Clock = std::chrono::steady_clock;

  // Fresh server at round 0.
  FlServer(model::ModelParams initial, RoundPolicy policy, std::vector<Sample> validation,
           ServerOptions options = {})
      : policy_(policy), validation_(std::move(validation)), options_(std::move(options)) {
    policy_.Validate();
    if (!initial.AllFinite()) throw ConfigError("initial parameters are not finite");
    state_.params = std::move(initial);
    state_.round = 0;
    state_.tag = MakeTag(0, state_.params.config_hash());
    state_.history.push_back(Validate(0, state_.tag, state_.params));
    if (ShouldStop(state_.history, policy_.patience, policy_.max_rounds) == StopDecision::kStop) {
      state_.status = ServerStatus::kStopped;
    }
    PersistLocked();
    PublishLocked();
  }

  // Resumes from a loaded checkpoint.
  FlServer(GlobalModelState resumed, RoundPolicy policy, std::vector<Sample> validation,
           ServerOptions options = {})
      : policy_(policy), validation_(std::move(validation)), options_(std::move(options)) {
    policy_.Validate();
    state_ = std::move(resumed);
    if (state_.status == ServerStatus::kAggregating) state_.status = ServerStatus::kCollecting;
    PublishLocked();
  }

  FlServer(const FlServer&) = delete;
  FlServer& operator=(const FlServer&) = delete;

  ~FlServer() { Shutdown(); }

  // Absent or different tag: returns the current model. Current tag: holds
  // the request until a new tag is released or `wait` elapses.
  GetModelResult HandleGetModel(const std::optional<std::string>& client_tag,
                                std::chrono::milliseconds wait) {
    if (client_tag && !ParseTag(*client_tag)) {
      return {GetModelResult::Kind::kBadRequest, nullptr, "malformed tag"};
    }
    std::unique_lock lock(mu_);
    if (!client_tag || *client_tag != release_->tag) {
      return {GetModelResult::Kind::kModel, release_, {}};
    }
    if (state_.status == ServerStatus::kStopped || shutting_down_) {
      return {GetModelResult::Kind::kNoNewContent, release_, {}};
    }
    const std::string held = *client_tag;
    const bool released = released_cv_.wait_for(
        lock, wait, [&] { return release_->tag != held || shutting_down_; });
    if (released && release_->tag != held) return {GetModelResult::Kind::kModel, release_, {}};
    return {GetModelResult::Kind::kNoNewContent, release_, {}};
  }

  UploadReply HandlePostUpdate(ClientUpdate update) {
    std::unique_lock lock(mu_);
    UploadReply reply;
    reply.current_tag = state_.tag;
    if (state_.status == ServerStatus::kStopped) {
      reply.status = UploadStatus::kStopped;
      return reply;
    }
    if (update.base_tag != state_.tag) {
      reply.status = UploadStatus::kConflict;
      reply.reason = "stale base_tag " + update.base_tag;
      return reply;
    }
    if (update.client_id.empty() || update.num_samples < 1 ||
        !update.params.SameShape(state_.params) || !update.params.AllFinite()) {
      reply.status = UploadStatus::kInvalid;
      reply.reason = "update failed validation";
      return reply;
    }
    if (pending_.empty()) round_opened_ = Clock::now();
    pending_.insert_or_assign(update.client_id, std::move(update));
    if (pending_.size() >= policy_.min_clients_per_round) AggregateLocked();
    reply.status = UploadStatus::kAccepted;
    reply.current_tag = state_.tag;
    return reply;
  }

  // Closes the round if it has been open past round_timeout_s with at least
  // one buffered update. Returns true when a new model was released.
  bool CheckRoundTimeout(Clock::time_point now = Clock::now()) {
    std::unique_lock lock(mu_);
    if (pending_.empty() || state_.status == ServerStatus::kStopped) return false;
    const std::chrono::duration<double> open = now - round_opened_;
    if (open.count() < policy_.round_timeout_s) return false;
    AggregateLocked();
    return true;
  }

  // Wakes every held request; they return no-new-content.
  void Shutdown() {
    {
      std::lock_guard lock(mu_);
      shutting_down_ = true;
    }
    released_cv_.notify_all();
  }

  StatusReport Status(std::size_t tail = 10) const {
    std::lock_guard lock(mu_);
    StatusReport s;
    s.round = state_.round;
    s.tag = state_.tag;
    s.status = state_.status;
    s.clients_this_round = pending_.size();
    const auto n = std::min(tail, state_.history.size());
    s.history_tail.assign(state_.history.end() - static_cast<std::ptrdiff_t>(n), state_.history.end());
    s.checkpoint_error = checkpoint_error_;
    return s;
  }

  GlobalModelState Snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  std::shared_ptr<const ModelRelease> CurrentRelease() const {
    std::lock_guard lock(mu_);
    return release_;
  }

  const RoundPolicy& policy() const { return policy_; }

 private:
  HistoryEntry Validate(std::uint64_t round, const std::string& tag,
                        const model::ModelParams& params) const {
    HistoryEntry h;
    h.round = round;
    h.tag = tag;
    if (validation_.empty()) {
      h.validation_loss = std::numeric_limits<double>::quiet_NaN();
      h.validation_accuracy = std::numeric_limits<double>::quiet_NaN();
      return h;
    }
    const auto r = model::Evaluate(params, validation_);
    h.validation_loss = r.loss;
    h.validation_accuracy = r.accuracy;
    h.validation_auc = r.auc;
    return h;
  }

  void AggregateLocked() {
    state_.status = ServerStatus::kAggregating;
    std::vector<ClientUpdate> selected;
    selected.reserve(pending_.size());
    for (auto& [id, u] : pending_) selected.push_back(std::move(u));
    pending_.clear();
    if (policy_.selection == Selection::kTopKBySamples && selected.size() > policy_.top_k) {
      std::stable_sort(selected.begin(), selected.end(),
                       [](const ClientUpdate& a, const ClientUpdate& b) {
                         return a.num_samples > b.num_samples;
                       });
      selected.resize(policy_.top_k);
    }
    auto params = Aggregate<float>(selected);
    params.SetConfig(state_.params.config());
    state_.params = std::move(params);
    state_.round += 1;
    state_.tag = MakeTag(state_.round, state_.params.config_hash());
    state_.history.push_back(Validate(state_.round, state_.tag, state_.params));
    state_.status =
        ShouldStop(state_.history, policy_.patience, policy_.max_rounds) == StopDecision::kStop
            ? ServerStatus::kStopped
            : ServerStatus::kCollecting;
    PersistLocked();
    PublishLocked();
    round_opened_ = Clock::now();
    released_cv_.notify_all();
  }

  void PersistLocked() {
    if (!options_.checkpoint_path) return;
    try {
      SaveCheckpoint(state_, *options_.checkpoint_path);
      checkpoint_error_.clear();
    } catch (const std::exception& e) {
      checkpoint_error_ = e.what();
    }
  }

  void PublishLocked() {
    auto r = std::make_shared<ModelRelease>();
    r->tag = state_.tag;
    r->round = state_.round;
    r->status = state_.status;
    r->params = state_.params;
    r->body = EncodeModelMessage(r->tag, r->round, r->status, r->params);
    r->gzip_body = GzipCompress(r->body);
    release_ = std::move(r);
    if (options_.on_release) options_.on_release(release_);
  }

  mutable std::mutex mu_;
  std::condition_variable released_cv_;
  RoundPolicy policy_;
  std::vector<Sample> validation_;
  ServerOptions options_;
  GlobalModelState state_;
  std::shared_ptr<const ModelRelease> release_;
  std::map<std::string, ClientUpdate> pending_;
  Clock::time_point round_opened_ = Clock::now();
  std::string checkpoint_error_;
  bool shutting_down_ = false;
};

}  // namespace viewfl::server

#endif  // VIEWFL_SERVER_FL_SERVER_HPP_
