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

#ifndef VIEWFL_CLIENT_CLIENT_HPP_
#define VIEWFL_CLIENT_CLIENT_HPP_

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "viewfl/base/fnv1a.hpp"
#include "viewfl/client/events.hpp"
#include "viewfl/client/store.hpp"
#include "viewfl/client/viewability.hpp"
#include "viewfl/model/network.hpp"
#include "viewfl/model/train.hpp"
#include "viewfl/preprocess/feature_registry.hpp"
#include "viewfl/preprocess/preprocess.hpp"
#include "viewfl/preprocess/session.hpp"
#include "viewfl/privacy/dp.hpp"
#include "viewfl/server/endpoint.hpp"

namespace viewfl::client {

struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  // Null skips the wait.
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct ClientConfig {
  std::shared_ptr<const preprocess::FeatureRegistry> registry;
  InvokerConfig invoker;
  double session_timeout_s = preprocess::kDefaultSessionTimeoutS;
  std::size_t min_samples = 50;
  model::TrainOptions train;  // rounds = local passes per FL round
  privacy::DPConfig dp;
  RetryPolicy retry;
  std::chrono::milliseconds long_poll_wait{30000};
  bool run_inference = true;
};

struct ClientState {
  std::string client_id;
  ClientStore store;
  std::optional<model::ModelParams> local_params;  // the model named by the cookie
  std::string model_tag_cookie;
  std::string last_uploaded_tag;
  preprocess::RawRecord static_cache;  // context captured once per page
  std::string current_page;
  std::map<std::string, std::vector<VisibilityInterval>, std::less<>> intervals;
  std::map<std::string, double, std::less<>> refresh_s;  // per placement
  std::size_t anomalies = 0;
  std::size_t fl_rounds = 0;
};

struct ReplayResult {
  std::vector<std::string> new_ad_ids;
  std::vector<InvokerDecision> decisions;
  std::vector<MetricUpdate> metric_updates;
  std::vector<std::string> warnings;
  std::size_t anomalies = 0;
};

// Replays events in order. page_request refreshes the context cache and
// session counters; ad_load stores a label-0 sample and, when a model is
// present, runs inference and the invoker; visibility_interval re-derives
// the ad's label from all of its intervals. session_end flushes the store to
// `store_dir` when one is given.
inline ReplayResult Replay(std::span<const AdEvent> log, ClientState& state,
                           const ClientConfig& cfg,
                           const std::filesystem::path* store_dir = nullptr) {
  if (!cfg.registry) throw ConfigError("client config has no feature registry");
  const auto& registry = *cfg.registry;
  ReplayResult result;
  std::optional<double> last_ts;
  if (!state.store.session.prior_page_requests.empty()) {
    last_ts = state.store.session.prior_page_requests.back().timestamp;
  }
  const auto anomaly = [&] {
    ++result.anomalies;
    ++state.anomalies;
  };

  for (const auto& e : log) {
    if (last_ts && e.timestamp < *last_ts) {
      result.warnings.push_back("out-of-order event at " + preprocess::FormatNumber(e.timestamp));
      anomaly();
      continue;
    }
    last_ts = e.timestamp;
    switch (e.kind) {
      case EventKind::kPageRequest: {
        auto upd = preprocess::ComputeSessionFeatures(state.store.session, e.timestamp,
                                                      e.page_url, cfg.session_timeout_s);
        if (upd.warning) {
          result.warnings.push_back(*upd.warning);
          anomaly();
          break;
        }
        state.store.session = std::move(upd.state);
        state.static_cache = e.context;
        state.current_page = e.page_url;
        break;
      }
      case EventKind::kAdLoad: {
        if (state.store.Find(e.ad_id)) {
          anomaly();
          break;
        }
        preprocess::RawRecord ad_raw = e.ad_metadata;
        ad_raw["ad_placement_id"] = e.ad_placement_id;
        preprocess::RawRecord ctx_raw = state.static_cache;
        preprocess::AddSessionFeatures(state.store.session, ctx_raw);
        const auto ad = preprocess::PreprocessRecord(ad_raw, registry, preprocess::Side::kAd);
        const auto ctx =
            preprocess::PreprocessRecord(ctx_raw, registry, preprocess::Side::kContext);
        state.anomalies += ad.anomalies + ctx.anomalies;
        result.anomalies += ad.anomalies + ctx.anomalies;
        Sample s = preprocess::AssembleSample(ad, ctx, e.ad_id, e.timestamp);
        state.store.Put(s);
        state.intervals[e.ad_id];
        result.new_ad_ids.push_back(e.ad_id);
        result.metric_updates.push_back({e.ad_id, "viewable", 0, MetricFlag::kStorage});
        if (cfg.run_inference && state.local_params) {
          const double p = model::Forward(*state.local_params, std::span<const Sample>(&s, 1))[0];
          auto [it, inserted] =
              state.refresh_s.try_emplace(e.ad_placement_id, cfg.invoker.baseline_refresh_s);
          auto d = Invoke(p, it->second, cfg.invoker, e.ad_id);
          it->second = d.new_refresh_s;
          result.metric_updates.push_back(
              {e.ad_id, "viewable", static_cast<std::uint8_t>(p > 0.5), MetricFlag::kInference});
          result.decisions.push_back(std::move(d));
        }
        break;
      }
      case EventKind::kVisibilityInterval: {
        Sample* s = state.store.Find(e.ad_id);
        const auto it = state.intervals.find(e.ad_id);
        if (!s || it == state.intervals.end()) {
          anomaly();
          break;
        }
        it->second.push_back({e.visible_fraction, e.duration_s});
        s->label_viewable = DeriveViewabilityLabel(it->second);
        result.metric_updates.push_back(
            {e.ad_id, "viewable", s->label_viewable, MetricFlag::kUpdate});
        break;
      }
      case EventKind::kSessionEnd:
        if (store_dir) state.store.Save(*store_dir);
        break;
    }
  }
  return result;
}

// Chronological 80:10:10 split of the stored samples.
struct DataSplit {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
};

inline DataSplit ChronologicalSplit(std::vector<Sample> samples) {
  std::stable_sort(samples.begin(), samples.end(),
                   [](const Sample& a, const Sample& b) { return a.timestamp < b.timestamp; });
  const std::size_t n = samples.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  DataSplit out;
  const auto begin = std::make_move_iterator(samples.begin());
  out.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                        begin + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_val),
                  std::make_move_iterator(samples.end()));
  return out;
}

enum class RoundOutcome {
  kUploaded,
  kSkippedTooFewSamples,
  kNoNewModel,
  kServerStopped,
  kRejected,
  kUnreachable,
};

inline std::string_view ToString(RoundOutcome o) {
  switch (o) {
    case RoundOutcome::kUploaded: return "uploaded";
    case RoundOutcome::kSkippedTooFewSamples: return "skipped_too_few_samples";
    case RoundOutcome::kNoNewModel: return "no_new_model";
    case RoundOutcome::kServerStopped: return "server_stopped";
    case RoundOutcome::kRejected: return "rejected";
    case RoundOutcome::kUnreachable: return "unreachable";
  }
  return "?";
}

struct RoundResult {
  RoundOutcome outcome = RoundOutcome::kNoNewModel;
  std::string trained_on_tag;
  server::UploadReply reply;
  std::optional<model::TrainReport> train;
  std::size_t attempts = 0;
  std::size_t num_samples = 0;
};

namespace detail {

enum class Sync { kCurrent, kNoNewModel, kStopped, kUnreachable, kBadRequest };

// Brings local_params to the server's current model. `wait` is the
// long-poll budget used when the client already holds the current tag.
inline Sync SyncModel(ClientState& state, server::ModelEndpoint& ep, const ClientConfig& cfg,
                      std::chrono::milliseconds wait, std::size_t& attempts) {
  std::optional<std::string> tag;
  if (!state.model_tag_cookie.empty() && state.local_params) tag = state.model_tag_cookie;
  auto backoff = cfg.retry.initial_backoff;
  for (std::size_t a = 0; a < std::max<std::size_t>(1, cfg.retry.max_attempts); ++a) {
    ++attempts;
    auto r = ep.FetchModel(tag, wait);
    switch (r.kind) {
      case server::FetchResult::Kind::kModel: {
        const auto& m = *r.message;
        state.local_params = m.params;
        state.model_tag_cookie = m.tag;
        return m.status == server::ServerStatus::kStopped ? Sync::kStopped : Sync::kCurrent;
      }
      case server::FetchResult::Kind::kNoNewContent:
        return Sync::kNoNewModel;
      case server::FetchResult::Kind::kBadRequest:
        return Sync::kBadRequest;
      case server::FetchResult::Kind::kUnreachable:
        if (a + 1 < cfg.retry.max_attempts) {
          if (cfg.retry.sleep) cfg.retry.sleep(backoff);
          backoff = std::chrono::milliseconds(
              static_cast<long long>(static_cast<double>(backoff.count()) * cfg.retry.multiplier));
        }
        break;
    }
  }
  return Sync::kUnreachable;
}

}  // namespace detail

// One participation: sync the global model, train on the training split,
// optionally privatize, upload. A client that already uploaded on its cookie
// tag long-polls for the next release first.
inline RoundResult ClientFlRound(ClientState& state, server::ModelEndpoint& endpoint,
                                 const ClientConfig& cfg) {
  RoundResult result;
  if (state.store.size() < cfg.min_samples) {
    result.outcome = RoundOutcome::kSkippedTooFewSamples;
    return result;
  }
  auto split = ChronologicalSplit(state.store.samples());
  result.num_samples = split.train.size();
  if (split.train.empty()) {
    result.outcome = RoundOutcome::kSkippedTooFewSamples;
    return result;
  }

  const bool already_uploaded =
      !state.last_uploaded_tag.empty() && state.last_uploaded_tag == state.model_tag_cookie;
  auto wait = already_uploaded ? cfg.long_poll_wait : std::chrono::milliseconds(0);

  for (int conflict_retries = 0;; ++conflict_retries) {
    const auto sync = detail::SyncModel(state, endpoint, cfg, wait, result.attempts);
    switch (sync) {
      case detail::Sync::kUnreachable:
        result.outcome = RoundOutcome::kUnreachable;
        return result;
      case detail::Sync::kStopped:
        result.outcome = RoundOutcome::kServerStopped;
        return result;
      case detail::Sync::kBadRequest:
        result.outcome = RoundOutcome::kRejected;
        return result;
      case detail::Sync::kNoNewModel:
        if (already_uploaded && conflict_retries == 0) {
          result.outcome = RoundOutcome::kNoNewModel;
          return result;
        }
        break;  // our cached model is current
      case detail::Sync::kCurrent:
        break;
    }
    if (!state.local_params) {
      result.outcome = RoundOutcome::kUnreachable;
      return result;
    }

    const auto round = server::ParseTag(state.model_tag_cookie).value_or(server::ParsedTag{}).round;
    model::ModelParams trained = *state.local_params;
    auto opts = cfg.train;
    opts.seed = DeriveSeed(cfg.train.seed, round);
    result.train = model::TrainLocal(trained, split.train, opts);
    result.trained_on_tag = state.model_tag_cookie;

    server::ClientUpdate update;
    update.client_id = state.client_id;
    update.base_tag = state.model_tag_cookie;
    update.num_samples = split.train.size();
    if (cfg.dp.enabled) {
      auto dp = cfg.dp;
      dp.seed = DeriveSeed(DeriveSeed(cfg.dp.seed, Fnv1a64(state.client_id)), round);
      update.params = privacy::PrivatizeUpdate(trained, *state.local_params, dp);
      update.dp_applied = true;
    } else {
      update.params = std::move(trained);
    }

    auto backoff = cfg.retry.initial_backoff;
    for (std::size_t a = 0; a < std::max<std::size_t>(1, cfg.retry.max_attempts); ++a) {
      ++result.attempts;
      result.reply = endpoint.Upload(update);
      if (result.reply.status != server::UploadStatus::kUnreachable) break;
      if (a + 1 < cfg.retry.max_attempts) {
        if (cfg.retry.sleep) cfg.retry.sleep(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * cfg.retry.multiplier));
      }
    }
    switch (result.reply.status) {
      case server::UploadStatus::kAccepted:
        state.last_uploaded_tag = update.base_tag;
        ++state.fl_rounds;
        result.outcome = RoundOutcome::kUploaded;
        return result;
      case server::UploadStatus::kConflict:
        if (conflict_retries == 0) {
          wait = std::chrono::milliseconds(0);
          continue;  // re-download and retry once
        }
        result.outcome = RoundOutcome::kRejected;
        return result;
      case server::UploadStatus::kStopped:
        result.outcome = RoundOutcome::kServerStopped;
        return result;
      case server::UploadStatus::kUnreachable:
        result.outcome = RoundOutcome::kUnreachable;
        return result;
      case server::UploadStatus::kInvalid:
        result.outcome = RoundOutcome::kRejected;
        return result;
    }
  }
}

}  // namespace viewfl::client

#endif  // VIEWFL_CLIENT_CLIENT_HPP_
