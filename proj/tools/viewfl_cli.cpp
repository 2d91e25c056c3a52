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

// viewfl command-line tool: data generation, server, client fleet,
// experiments, benchmarks and reports.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "viewfl/client/client.hpp"
#include "viewfl/datagen/generator.hpp"
#include "viewfl/experiment/benchmark.hpp"
#include "viewfl/experiment/experiment.hpp"
#include "viewfl/experiment/report.hpp"
#include "viewfl/server/checkpoint.hpp"
#include "viewfl/server/http.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace viewfl;

namespace {

std::atomic<bool> g_interrupted{false};

void OnSignal(int) { g_interrupted = true; }

std::string EnvOr(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

// Settings shared by several subcommands. Precedence: flags, then the
// VIEWFL_PORT / VIEWFL_DATA_DIR environment, then the config file.
struct Common {
  std::string config_file;
  std::string data_dir;
  int port = -1;
  std::string host = "127.0.0.1";
  json file = json::object();

  void Resolve() {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("cannot open config file " + config_file);
      file = json::parse(in, nullptr, true, true);
    }
    if (data_dir.empty()) data_dir = EnvOr("VIEWFL_DATA_DIR", file.value("data_dir", "viewfl_data"));
    if (port < 0) port = std::stoi(EnvOr("VIEWFL_PORT", std::to_string(file.value("port", 8080))));
    host = file.value("host", host);
  }
};

// Fills unset numeric options from the config file.
template <class T>
void FromFile(const json& j, const char* key, T& value, const CLI::App* app, const char* flag) {
  if (app->count(flag) == 0 && j.contains(key)) value = j.at(key).get<T>();
}

std::vector<Sample> ServerValidationSet(std::size_t users, std::uint64_t seed,
                                        const model::ModelConfig& mcfg) {
  datagen::GenConfig g;
  g.n_users = users;
  g.seed = seed;
  client::ClientConfig ccfg;
  ccfg.registry = experiment::RegistryFor(mcfg);
  return experiment::ReplayAll(datagen::Generate(g).users, ccfg);
}

std::vector<std::uint64_t> ParseSeeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

std::vector<double> ParseDoubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viewfl: federated ad-viewability prediction toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_file, "JSON config file");
  app.add_option("--data-dir", common.data_dir, "Data directory (env VIEWFL_DATA_DIR)");
  app.add_option("--port", common.port, "Server port (env VIEWFL_PORT)");
  app.add_option("--host", common.host, "Server host");

  // generate-data
  auto* gen_cmd = app.add_subcommand("generate-data", "Generate synthetic per-user ad-event logs");
  datagen::GenConfig gen;
  std::string gen_logs, gen_manifest;
  gen_cmd->add_option("--users", gen.n_users, "Number of users")->capture_default_str();
  gen_cmd->add_option("--days", gen.days, "Horizon in days")->capture_default_str();
  gen_cmd->add_option("--min-samples", gen.min_samples_per_user, "Minimum ads per user")->capture_default_str();
  gen_cmd->add_option("--skew", gen.skew_exponent, "Power-law exponent of user sizes")->capture_default_str();
  gen_cmd->add_option("--ads-per-day", gen.ads_per_day, "Extra ads per day of the top user")->capture_default_str();
  gen_cmd->add_option("--label-noise", gen.label_noise, "Label flip probability")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  gen_cmd->add_option("--logs", gen_logs, "Log output directory (default <data-dir>/logs)");
  gen_cmd->add_option("--manifest", gen_manifest, "Manifest CSV path (default <data-dir>/manifest.csv)");

  // run-server
  auto* srv_cmd = app.add_subcommand("run-server", "Serve the global model over HTTP");
  std::string preset = "desk";
  std::uint64_t model_seed = 1;
  server::RoundPolicy policy;
  std::string selection = "all";
  std::string checkpoint, static_dir;
  bool resume = false, exit_when_stopped = false;
  std::size_t validation_users = 20;
  std::uint64_t validation_seed = 987654321;
  long long max_wait_ms = 30000;
  srv_cmd->add_option("--preset", preset, "Model preset (desk|full)")->capture_default_str();
  srv_cmd->add_option("--seed", model_seed, "Initialisation seed")->capture_default_str();
  srv_cmd->add_option("--min-clients", policy.min_clients_per_round, "Updates per round")->capture_default_str();
  srv_cmd->add_option("--round-timeout", policy.round_timeout_s, "Round timeout in seconds")->capture_default_str();
  srv_cmd->add_option("--max-rounds", policy.max_rounds, "Maximum rounds")->capture_default_str();
  srv_cmd->add_option("--patience", policy.patience, "Early-stopping patience")->capture_default_str();
  srv_cmd->add_option("--selection", selection, "all | top_k_by_samples")->capture_default_str();
  srv_cmd->add_option("--top-k", policy.top_k, "k for top_k_by_samples");
  srv_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
  srv_cmd->add_flag("--resume", resume, "Resume from --checkpoint");
  srv_cmd->add_option("--static-dir", static_dir, "Directory served at /");
  srv_cmd->add_option("--validation-users", validation_users, "Users in the server validation set")->capture_default_str();
  srv_cmd->add_option("--validation-seed", validation_seed, "Seed of the server validation set")->capture_default_str();
  srv_cmd->add_option("--max-wait-ms", max_wait_ms, "Long-poll hold limit")->capture_default_str();
  srv_cmd->add_flag("--exit-when-stopped", exit_when_stopped, "Exit once early stopping fires");

  // run-clients
  auto* cli_cmd = app.add_subcommand("run-clients", "Replay logs and train against a server");
  std::string client_logs, store_root;
  std::size_t max_clients = 0, local_rounds = 15, batch_size = 32, min_samples = 50;
  std::uint64_t client_seed = 1;
  double dp_epsilon = 0.0, dp_clip = 1.0, dp_delta = 1e-5;
  long long client_wait_ms = 30000;
  cli_cmd->add_option("--logs", client_logs, "Directory of <user>.jsonl logs (default <data-dir>/logs)");
  cli_cmd->add_option("--clients", max_clients, "Use at most N logs (0 = all)");
  cli_cmd->add_option("--local-rounds", local_rounds, "Local passes per FL round")->capture_default_str();
  cli_cmd->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
  cli_cmd->add_option("--min-samples", min_samples, "Minimum stored samples to train")->capture_default_str();
  cli_cmd->add_option("--seed", client_seed, "Training seed")->capture_default_str();
  cli_cmd->add_option("--dp-epsilon", dp_epsilon, "Enable DP with this epsilon");
  cli_cmd->add_option("--dp-clip", dp_clip, "DP clip norm")->capture_default_str();
  cli_cmd->add_option("--dp-delta", dp_delta, "DP delta")->capture_default_str();
  cli_cmd->add_option("--store-dir", store_root, "Persist client stores under this directory");
  cli_cmd->add_option("--wait-ms", client_wait_ms, "Long-poll wait")->capture_default_str();

  // run-experiment
  auto* exp_cmd = app.add_subcommand("run-experiment", "Run an FL or centralized experiment in-process");
  experiment::ExperimentConfig exp;
  std::string exp_mode = "fl", exp_seeds = "1", exp_out, dp_sweep, exp_scheduler = "sequential";
  double exp_eps = 0.0;
  exp_cmd->add_option("--mode", exp_mode, "fl | centralized")->capture_default_str();
  exp_cmd->add_option("--scheduler", exp_scheduler, "sequential | concurrent")->capture_default_str();
  exp_cmd->add_option("--users", exp.n_users, "Number of users")->capture_default_str();
  exp_cmd->add_option("--preset", exp.preset, "Model preset")->capture_default_str();
  exp_cmd->add_option("--seeds", exp_seeds, "Comma-separated seeds")->capture_default_str();
  exp_cmd->add_option("--out", exp_out, "Output directory (default <data-dir>/runs/<mode>)");
  exp_cmd->add_option("--patience", exp.policy.patience, "Early-stopping patience")->capture_default_str();
  exp_cmd->add_option("--max-rounds", exp.policy.max_rounds, "Maximum rounds")->capture_default_str();
  exp_cmd->add_option("--min-clients", exp.policy.min_clients_per_round, "Updates per round (0 = all)");
  exp_cmd->add_option("--local-rounds", exp.local_rounds, "Local passes per round")->capture_default_str();
  exp_cmd->add_option("--days", exp.gen.days, "Data horizon in days")->capture_default_str();
  exp_cmd->add_option("--label-noise", exp.gen.label_noise, "Label flip probability")->capture_default_str();
  exp_cmd->add_option("--dp-epsilon", exp_eps, "Enable DP with this epsilon");
  exp_cmd->add_option("--dp-sweep", dp_sweep, "Comma-separated epsilons; one sub-run each plus no-DP");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "Latency and memory of one client");
  experiment::BenchmarkConfig bench;
  std::string bench_out;
  bench_cmd->add_option("--preset", bench.preset, "Model preset")->capture_default_str();
  bench_cmd->add_option("--samples", bench.n_samples, "Samples on the client")->capture_default_str();
  bench_cmd->add_option("--reps", bench.repetitions, "Repetitions")->capture_default_str();
  bench_cmd->add_option("--local-rounds", bench.local_rounds, "Local passes timed per repetition")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "Write the report JSON here");

  // report
  auto* rep_cmd = app.add_subcommand("report", "Summarise run artifacts or write golden vectors");
  std::string rep_dir, rep_out, golden_dir;
  rep_cmd->add_option("run_dir", rep_dir, "Run directory");
  rep_cmd->add_option("--out", rep_out, "Output directory (default run_dir)");
  rep_cmd->add_option("--golden", golden_dir, "Write golden vectors to this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    common.Resolve();
    const fs::path data_dir = common.data_dir;

    if (gen_cmd->parsed()) {
      const auto& f = common.file.value("gen", json::object());
      FromFile(f, "users", gen.n_users, gen_cmd, "--users");
      FromFile(f, "days", gen.days, gen_cmd, "--days");
      FromFile(f, "label_noise", gen.label_noise, gen_cmd, "--label-noise");
      FromFile(f, "seed", gen.seed, gen_cmd, "--seed");
      const fs::path logs = gen_logs.empty() ? data_dir / "logs" : fs::path(gen_logs);
      const fs::path manifest = gen_manifest.empty() ? data_dir / "manifest.csv" : fs::path(gen_manifest);
      const auto data = datagen::Generate(gen);
      datagen::WriteDataset(data, logs, manifest);
      std::cout << "top_x,n_users,min,mean,max\n";
      for (const auto& b : datagen::PartitionReport(data)) {
        std::cout << b.top_x << ',' << b.n_users << ',' << b.min << ',' << b.mean << ',' << b.max << '\n';
      }
      std::cerr << "wrote " << data.users.size() << " logs to " << logs << " and manifest " << manifest << '\n';
      return 0;
    }

    if (srv_cmd->parsed()) {
      const auto& f = common.file.value("server", json::object());
      FromFile(f, "preset", preset, srv_cmd, "--preset");
      FromFile(f, "seed", model_seed, srv_cmd, "--seed");
      FromFile(f, "min_clients_per_round", policy.min_clients_per_round, srv_cmd, "--min-clients");
      FromFile(f, "round_timeout_s", policy.round_timeout_s, srv_cmd, "--round-timeout");
      FromFile(f, "max_rounds", policy.max_rounds, srv_cmd, "--max-rounds");
      FromFile(f, "patience", policy.patience, srv_cmd, "--patience");
      FromFile(f, "selection", selection, srv_cmd, "--selection");
      FromFile(f, "top_k", policy.top_k, srv_cmd, "--top-k");
      FromFile(f, "checkpoint", checkpoint, srv_cmd, "--checkpoint");
      FromFile(f, "static_dir", static_dir, srv_cmd, "--static-dir");
      if (selection == "all") policy.selection = server::Selection::kAll;
      else if (selection == "top_k_by_samples") policy.selection = server::Selection::kTopKBySamples;
      else throw ConfigError("unknown selection '" + selection + "'");

      auto mcfg = model::ModelConfig::Preset(preset);
      mcfg.seed = model_seed;
      const auto validation = ServerValidationSet(validation_users, validation_seed, mcfg);
      server::ServerOptions sopts;
      if (!checkpoint.empty()) sopts.checkpoint_path = checkpoint;
      std::unique_ptr<server::FlServer> srv;
      if (resume && !checkpoint.empty() && fs::exists(checkpoint)) {
        try {
          srv = std::make_unique<server::FlServer>(server::LoadCheckpoint(checkpoint), policy,
                                                   validation, sopts);
          std::cerr << "resumed from " << checkpoint << '\n';
        } catch (const FormatError& e) {
          std::cerr << "checkpoint unusable (" << e.what() << "); starting from round 0\n";
        }
      }
      if (!srv) srv = std::make_unique<server::FlServer>(model::InitParams(mcfg), policy, validation, sopts);

      server::HttpOptions hopts;
      hopts.host = common.host;
      hopts.port = common.port;
      hopts.static_dir = static_dir;
      hopts.registry_text = preprocess::DefaultRegistry(mcfg.hash_buckets).Render();
      hopts.max_wait = std::chrono::milliseconds(max_wait_ms);
      server::HttpService http(*srv, hopts);
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      const int port = http.Start();
      std::cerr << "serving " << srv->Status().tag << " on " << common.host << ':' << port << '\n';
      while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        if (exit_when_stopped && srv->Status().status == server::ServerStatus::kStopped) break;
      }
      http.Stop();
      std::cout << server::StatusToJson(srv->Status()).dump(2) << '\n';
      return 0;
    }

    if (cli_cmd->parsed()) {
      const fs::path logs = client_logs.empty() ? data_dir / "logs" : fs::path(client_logs);
      if (!fs::is_directory(logs)) throw ConfigError("log directory " + logs.string() + " not found");
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(logs)) {
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      if (max_clients && files.size() > max_clients) files.resize(max_clients);
      if (files.empty()) throw ConfigError("no .jsonl logs in " + logs.string());

      server::HttpEndpoint probe(common.host, common.port);
      const auto first = probe.FetchModel(std::nullopt, std::chrono::milliseconds(0));
      if (first.kind != server::FetchResult::Kind::kModel) {
        throw std::runtime_error("server " + common.host + ":" + std::to_string(common.port) +
                                 " unreachable: " + first.error);
      }
      client::ClientConfig ccfg;
      ccfg.registry = experiment::RegistryFor(first.message->params.config());
      ccfg.train.rounds = local_rounds;
      ccfg.train.batch_size = batch_size;
      ccfg.train.seed = client_seed;
      ccfg.min_samples = min_samples;
      ccfg.long_poll_wait = std::chrono::milliseconds(client_wait_ms);
      if (dp_epsilon > 0.0) {
        ccfg.dp.enabled = true;
        ccfg.dp.epsilon = dp_epsilon;
        ccfg.dp.clip_norm = dp_clip;
        ccfg.dp.delta = dp_delta;
        ccfg.dp.seed = client_seed;
      }
      std::mutex out_mu;
      std::vector<std::thread> threads;
      for (const auto& path : files) {
        threads.emplace_back([&, path] {
          std::ifstream in(path);
          const auto log = client::ReadEventLog(in);
          client::ClientState st;
          st.client_id = path.stem().string();
          const fs::path store = store_root.empty() ? fs::path() : fs::path(store_root) / st.client_id;
          if (!store.empty()) st.store = client::ClientStore::Load(store);
          server::HttpEndpoint ep(common.host, common.port);
          std::size_t attempts = 0;
          client::detail::SyncModel(st, ep, ccfg, std::chrono::milliseconds(0), attempts);
          const auto rep = client::Replay(log.events, st, ccfg, store.empty() ? nullptr : &store);
          if (!store.empty()) st.store.Save(store);
          {
            std::lock_guard lock(out_mu);
            std::cerr << st.client_id << ": " << st.store.size() << " samples, "
                      << rep.decisions.size() << " invoker decisions, "
                      << rep.anomalies + log.malformed << " anomalies\n";
          }
          while (!g_interrupted) {
            const auto r = client::ClientFlRound(st, ep, ccfg);
            std::lock_guard lock(out_mu);
            std::cerr << st.client_id << ": " << client::ToString(r.outcome) << ' '
                      << r.trained_on_tag << '\n';
            if (r.outcome != client::RoundOutcome::kUploaded &&
                r.outcome != client::RoundOutcome::kNoNewModel) {
              break;
            }
          }
        });
      }
      std::signal(SIGINT, OnSignal);
      for (auto& t : threads) t.join();
      return 0;
    }

    if (exp_cmd->parsed()) {
      exp.mode = experiment::ParseMode(exp_mode);
      exp.scheduler = exp_scheduler == "concurrent" ? experiment::Scheduler::kConcurrent
                                                    : experiment::Scheduler::kSequential;
      exp.seeds = ParseSeeds(exp_seeds);
      const fs::path out = exp_out.empty() ? data_dir / "runs" / exp_mode : fs::path(exp_out);
      std::vector<std::pair<fs::path, experiment::ExperimentConfig>> runs;
      if (!dp_sweep.empty()) {
        auto base = exp;
        base.output_dir = out / "no_dp";
        runs.emplace_back(base.output_dir, base);
        for (const double eps : ParseDoubles(dp_sweep)) {
          auto c = exp;
          c.dp.enabled = true;
          c.dp.epsilon = eps;
          c.output_dir = out / ("eps_" + experiment::Num(eps));
          runs.emplace_back(c.output_dir, c);
        }
      } else {
        if (exp_eps > 0.0) {
          exp.dp.enabled = true;
          exp.dp.epsilon = exp_eps;
        }
        exp.output_dir = out;
        runs.emplace_back(out, exp);
      }
      for (auto& [dir, c] : runs) {
        const auto s = experiment::RunExperiment(c);
        const auto j = experiment::SummaryToJson(s);
        std::cout << dir.string() << ": auc " << j["test_auc_mean"] << " +- " << j["test_auc_std"]
                  << ", rounds " << j["rounds_mean"] << '\n';
      }
      return 0;
    }

    if (bench_cmd->parsed()) {
      const auto rep = experiment::RunBenchmark(bench);
      std::cout << experiment::BenchmarkCsv(rep);
      if (!bench_out.empty()) {
        std::ofstream(bench_out, std::ios::trunc) << experiment::BenchmarkToJson(rep).dump(2) << '\n';
      }
      return 0;
    }

    if (rep_cmd->parsed()) {
      if (!golden_dir.empty()) {
        for (const auto& p : experiment::WriteGolden(golden_dir)) std::cout << p.string() << '\n';
        if (rep_dir.empty()) return 0;
      }
      if (rep_dir.empty()) throw ConfigError("report needs a run directory or --golden");
      const auto r = experiment::Report(rep_dir, rep_out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& p : r.files) std::cout << p.string() << '\n';
      return r.warnings.empty() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
