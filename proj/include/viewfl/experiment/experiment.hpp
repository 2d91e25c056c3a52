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

#ifndef VIEWFL_EXPERIMENT_EXPERIMENT_HPP_
#define VIEWFL_EXPERIMENT_EXPERIMENT_HPP_

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "viewfl/client/client.hpp"
#include "viewfl/datagen/generator.hpp"
#include "viewfl/model/metrics.hpp"
#include "viewfl/model/network.hpp"
#include "viewfl/model/train.hpp"
#include "viewfl/server/endpoint.hpp"
#include "viewfl/server/fl_server.hpp"

namespace viewfl::experiment {

using nlohmann::json;

enum class Mode { kFl, kCentralized };
enum class Scheduler { kSequential, kConcurrent };

inline std::string_view ToString(Mode m) { return m == Mode::kFl ? "fl" : "centralized"; }

inline Mode ParseMode(std::string_view s) {
  if (s == "fl") return Mode::kFl;
  if (s == "centralized" || s == "cl") return Mode::kCentralized;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

struct ExperimentConfig {
  Mode mode = Mode::kFl;
  Scheduler scheduler = Scheduler::kSequential;
  std::size_t n_users = 50;
  std::string preset = "desk";
  server::RoundPolicy policy;  // min_clients_per_round 0: every eligible client
  privacy::DPConfig dp;
  std::size_t local_rounds = 15;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir;
  datagen::GenConfig gen;  // n_users and seed are taken from this config
  std::size_t validation_users = 20;

  ExperimentConfig() { policy.min_clients_per_round = 0; }

  void Validate() const {
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
    if (n_users < 1) throw ConfigError("n_users must be >= 1");
    if (local_rounds < 1 || batch_size < 1) throw ConfigError("local_rounds and batch_size must be >= 1");
    if (mode == Mode::kFl && dp.enabled) dp.Validate();
    server::RoundPolicy p = policy;
    p.min_clients_per_round = std::max<std::size_t>(1, p.min_clients_per_round);
    p.Validate();
    model::ModelConfig::Preset(preset).Validate();
  }
};

struct RoundRecord {
  std::uint64_t round = 0;
  std::string tag;
  server::HistoryEntry validation;
  model::EvalReport test;
  std::uint64_t bytes_down = 0;  // during this round
  std::uint64_t bytes_up = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  Mode mode = Mode::kFl;
  std::size_t n_clients = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t rounds = 0;
  std::uint64_t best_round = 0;
  model::EvalReport best_test;  // model selected by validation loss
  model::EvalReport last_test;  // last released model
  std::uint64_t bytes_down = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t round_trips = 0;
  std::size_t param_count = 0;
  std::vector<RoundRecord> trace;

  double bytes_per_round_trip() const {
    return round_trips ? static_cast<double>(bytes_down + bytes_up) / static_cast<double>(round_trips)
                       : 0.0;
  }
};

struct PreparedClients {
  std::vector<client::ClientState> clients;
  std::vector<Sample> pooled_train;
  std::vector<Sample> pooled_test;
};

inline std::shared_ptr<const preprocess::FeatureRegistry> RegistryFor(const model::ModelConfig& c) {
  return std::make_shared<const preprocess::FeatureRegistry>(
      preprocess::DefaultRegistry(c.hash_buckets));
}

// Samples of every ad of `users`, produced by the client pipeline.
inline std::vector<Sample> ReplayAll(const std::vector<datagen::UserLog>& users,
                                     const client::ClientConfig& cfg) {
  std::vector<Sample> out;
  for (const auto& u : users) {
    client::ClientState st;
    st.client_id = u.user_id;
    client::Replay(u.events, st, cfg);
    out.insert(out.end(), st.store.samples().begin(), st.store.samples().end());
  }
  return out;
}

// Server-held validation data from a seed no client uses.
inline std::vector<Sample> ValidationSet(const ExperimentConfig& cfg, std::uint64_t seed,
                                         const client::ClientConfig& ccfg) {
  datagen::GenConfig g = cfg.gen;
  g.n_users = cfg.validation_users;
  g.seed = DeriveSeed(seed, 0x76616c6964ULL);
  return ReplayAll(datagen::Generate(g).users, ccfg);
}

inline double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double StdDev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace detail {

inline std::uint64_t BestRound(const std::vector<server::HistoryEntry>& history) {
  const server::HistoryEntry* best = nullptr;
  for (const auto& h : history) {
    if (std::isnan(h.validation_loss)) continue;
    if (!best || h.validation_loss < best->validation_loss) best = &h;
  }
  return best ? best->round : history.back().round;
}

inline model::EvalReport SafeEvaluate(const model::ModelParams& p, const std::vector<Sample>& data) {
  if (data.empty()) return {};
  return model::Evaluate(p, data);
}

}  // namespace detail

inline SeedResult RunSeed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.Validate();
  auto mcfg = model::ModelConfig::Preset(cfg.preset);
  mcfg.seed = DeriveSeed(seed, 0x696e6974ULL);

  client::ClientConfig ccfg;
  ccfg.registry = RegistryFor(mcfg);
  ccfg.registry->CheckBinding(mcfg);
  ccfg.train.rounds = cfg.local_rounds;
  ccfg.train.batch_size = cfg.batch_size;
  ccfg.train.seed = DeriveSeed(seed, 0x747261696eULL);
  ccfg.min_samples = cfg.gen.min_samples_per_user;
  ccfg.dp = cfg.dp;
  ccfg.dp.seed = DeriveSeed(seed, 0x6470ULL);
  ccfg.retry.sleep = nullptr;
  ccfg.long_poll_wait = cfg.scheduler == Scheduler::kSequential ? std::chrono::milliseconds(0)
                                                                 : std::chrono::milliseconds(60000);

  datagen::GenConfig g = cfg.gen;
  g.n_users = cfg.n_users;
  g.seed = seed;
  const auto data = datagen::Generate(g);
  const auto validation = ValidationSet(cfg, seed, ccfg);

  SeedResult res;
  res.seed = seed;
  res.mode = cfg.mode;
  res.param_count = model::ParameterCount(mcfg);

  std::vector<client::ClientState> clients;
  std::vector<Sample> pooled_train, pooled_test;
  for (const auto& u : data.users) {
    client::ClientState st;
    st.client_id = u.user_id;
    client::Replay(u.events, st, ccfg);
    auto split = client::ChronologicalSplit(st.store.samples());
    pooled_train.insert(pooled_train.end(), split.train.begin(), split.train.end());
    pooled_test.insert(pooled_test.end(), split.test.begin(), split.test.end());
    if (st.store.size() >= ccfg.min_samples) clients.push_back(std::move(st));
  }
  res.n_clients = clients.size();
  res.n_train = pooled_train.size();
  res.n_test = pooled_test.size();
  if (clients.empty()) throw TrainingError("no client reaches min_samples");

  if (cfg.mode == Mode::kCentralized) {
    // One model on the merged training splits; one epoch per round.
    auto params = model::InitParams(mcfg);
    std::vector<server::HistoryEntry> history;
    std::vector<model::ModelParams> snapshots;
    const auto record = [&](std::uint64_t round) {
      server::HistoryEntry h;
      h.round = round;
      h.tag = server::MakeTag(round, mcfg.Hash());
      const auto v = model::Evaluate(params, validation);
      h.validation_loss = v.loss;
      h.validation_accuracy = v.accuracy;
      h.validation_auc = v.auc;
      history.push_back(h);
      RoundRecord rr;
      rr.round = round;
      rr.tag = h.tag;
      rr.validation = h;
      rr.test = detail::SafeEvaluate(params, pooled_test);
      res.trace.push_back(rr);
    };
    record(0);
    model::TrainOptions opts = ccfg.train;
    opts.rounds = 1;
    for (std::uint64_t round = 1;; ++round) {
      opts.seed = DeriveSeed(ccfg.train.seed, round);
      model::TrainLocal(params, pooled_train, opts);
      record(round);
      if (server::ShouldStop(history, cfg.policy.patience, cfg.policy.max_rounds) ==
          server::StopDecision::kStop) {
        break;
      }
    }
    res.rounds = history.back().round;
    res.best_round = detail::BestRound(history);
    res.best_test = res.trace[res.best_round].test;
    res.last_test = res.trace.back().test;
    return res;
  }

  // Federated mode.
  std::vector<std::shared_ptr<const server::ModelRelease>> releases;
  std::mutex releases_mu;
  server::ServerOptions sopts;
  sopts.on_release = [&](const std::shared_ptr<const server::ModelRelease>& r) {
    std::lock_guard lock(releases_mu);
    releases.push_back(r);
  };
  server::RoundPolicy policy = cfg.policy;
  if (policy.min_clients_per_round == 0) policy.min_clients_per_round = clients.size();
  policy.min_clients_per_round = std::min(policy.min_clients_per_round, clients.size());
  server::FlServer srv(model::InitParams(mcfg), policy, validation, sopts);
  server::InProcessEndpoint endpoint(srv);

  std::vector<server::Traffic> traffic_at_round{endpoint.traffic()};
  if (cfg.scheduler == Scheduler::kSequential) {
    for (;;) {
      bool any_uploaded = false;
      for (auto& c : clients) {
        const auto r = client::ClientFlRound(c, endpoint, ccfg);
        if (r.outcome == client::RoundOutcome::kUploaded) any_uploaded = true;
      }
      // Pass k closes round k.
      traffic_at_round.push_back(endpoint.traffic());
      if (srv.Status().status == server::ServerStatus::kStopped || !any_uploaded) break;
    }
  } else {
    std::vector<std::thread> threads;
    for (auto& c : clients) {
      threads.emplace_back([&, cp = &c] {
        for (;;) {
          const auto r = client::ClientFlRound(*cp, endpoint, ccfg);
          if (r.outcome != client::RoundOutcome::kUploaded &&
              r.outcome != client::RoundOutcome::kNoNewModel) {
            break;
          }
        }
      });
    }
    for (auto& t : threads) t.join();
  }

  const auto state = srv.Snapshot();
  const auto traffic = endpoint.traffic();
  res.bytes_down = traffic.bytes_down;
  res.bytes_up = traffic.bytes_up;
  res.round_trips = traffic.uploads;
  res.rounds = state.round;
  res.best_round = detail::BestRound(state.history);

  for (const auto& h : state.history) {
    RoundRecord rr;
    rr.round = h.round;
    rr.tag = h.tag;
    rr.validation = h;
    for (const auto& rel : releases) {
      if (rel->tag == h.tag) {
        rr.test = detail::SafeEvaluate(rel->params, pooled_test);
        break;
      }
    }
    if (cfg.scheduler == Scheduler::kSequential && h.round >= 1 &&
        h.round < traffic_at_round.size()) {
      rr.bytes_down = traffic_at_round[h.round].bytes_down - traffic_at_round[h.round - 1].bytes_down;
      rr.bytes_up = traffic_at_round[h.round].bytes_up - traffic_at_round[h.round - 1].bytes_up;
    }
    res.trace.push_back(rr);
  }
  res.best_test = res.trace[res.best_round].test;
  res.last_test = res.trace.back().test;
  return res;
}

// ---- Artifacts -------------------------------------------------------------

inline std::string Num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string Num(const std::optional<double>& v) { return v ? Num(*v) : ""; }

inline constexpr std::string_view kTraceHeader =
    "round,tag,val_loss,val_accuracy,val_auc,test_loss,test_accuracy,test_auc,bytes_down,bytes_up";

inline void WriteTraceCsv(const SeedResult& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << kTraceHeader << '\n';
  for (const auto& t : r.trace) {
    out << t.round << ',' << t.tag << ',' << Num(t.validation.validation_loss) << ','
        << Num(t.validation.validation_accuracy) << ',' << Num(t.validation.validation_auc) << ','
        << Num(t.test.loss) << ',' << Num(t.test.accuracy) << ',' << Num(t.test.auc) << ','
        << t.bytes_down << ',' << t.bytes_up << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline constexpr std::string_view kSummaryHeader =
    "seed,mode,n_clients,rounds,best_round,test_loss,test_accuracy,test_auc,last_test_auc,"
    "bytes_down,bytes_up,round_trips,bytes_per_round_trip,param_count";

inline json ConfigToJson(const ExperimentConfig& c) {
  return json{{"mode", ToString(c.mode)},
              {"scheduler", c.scheduler == Scheduler::kSequential ? "sequential" : "concurrent"},
              {"n_users", c.n_users},
              {"preset", c.preset},
              {"local_rounds", c.local_rounds},
              {"batch_size", c.batch_size},
              {"seeds", c.seeds},
              {"policy",
               {{"min_clients_per_round", c.policy.min_clients_per_round},
                {"round_timeout_s", c.policy.round_timeout_s},
                {"max_rounds", c.policy.max_rounds},
                {"patience", c.policy.patience}}},
              {"dp",
               {{"enabled", c.dp.enabled},
                {"epsilon", c.dp.epsilon},
                {"delta", c.dp.delta},
                {"clip_norm", c.dp.clip_norm}}},
              {"gen",
               {{"days", c.gen.days},
                {"min_samples_per_user", c.gen.min_samples_per_user},
                {"skew_exponent", c.gen.skew_exponent},
                {"ads_per_day", c.gen.ads_per_day},
                {"label_noise", c.gen.label_noise}}},
              {"validation_users", c.validation_users}};
}

struct ExperimentSummary {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;

  std::vector<double> Collect(double (*f)(const SeedResult&)) const {
    std::vector<double> v;
    for (const auto& s : seeds) v.push_back(f(s));
    return v;
  }
  std::vector<double> Aucs() const {
    return Collect([](const SeedResult& s) { return s.best_test.auc.value_or(NAN); });
  }
};

inline json SummaryToJson(const ExperimentSummary& s) {
  const auto aucs = s.Aucs();
  const auto losses = s.Collect([](const SeedResult& r) { return r.best_test.loss; });
  const auto rounds = s.Collect([](const SeedResult& r) { return static_cast<double>(r.rounds); });
  const auto bprt = s.Collect([](const SeedResult& r) { return r.bytes_per_round_trip(); });
  const auto total_mb = s.Collect([](const SeedResult& r) {
    return static_cast<double>(r.bytes_down + r.bytes_up) / 1e6;
  });
  return json{{"config", ConfigToJson(s.config)},
              {"n_seeds", s.seeds.size()},
              {"param_count", s.seeds.empty() ? 0 : s.seeds.front().param_count},
              {"test_auc_mean", Mean(aucs)},
              {"test_auc_std", StdDev(aucs)},
              {"test_loss_mean", Mean(losses)},
              {"rounds_mean", Mean(rounds)},
              {"bytes_per_round_trip_mean", Mean(bprt)},
              {"total_mb_mean", Mean(total_mb)}};
}

inline void WriteArtifacts(const ExperimentSummary& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream sum(dir / "summary.csv", std::ios::trunc);
  sum << kSummaryHeader << '\n';
  for (const auto& r : s.seeds) {
    WriteTraceCsv(r, dir / ("seed_" + std::to_string(r.seed) + ".csv"));
    sum << r.seed << ',' << ToString(r.mode) << ',' << r.n_clients << ',' << r.rounds << ','
        << r.best_round << ',' << Num(r.best_test.loss) << ',' << Num(r.best_test.accuracy) << ','
        << Num(r.best_test.auc) << ',' << Num(r.last_test.auc) << ',' << r.bytes_down << ','
        << r.bytes_up << ',' << r.round_trips << ',' << Num(r.bytes_per_round_trip()) << ','
        << r.param_count << '\n';
  }
  std::ofstream(dir / "summary.json", std::ios::trunc) << SummaryToJson(s).dump(2) << '\n';
}

// Runs every seed; writes artifacts when config.output_dir is set.
inline ExperimentSummary RunExperiment(const ExperimentConfig& cfg) {
  cfg.Validate();
  ExperimentSummary s;
  s.config = cfg;
  for (const auto seed : cfg.seeds) s.seeds.push_back(RunSeed(cfg, seed));
  if (!cfg.output_dir.empty()) WriteArtifacts(s, cfg.output_dir);
  return s;
}

}  // namespace viewfl::experiment

#endif  // VIEWFL_EXPERIMENT_EXPERIMENT_HPP_
