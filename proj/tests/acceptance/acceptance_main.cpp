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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Criterion names given as arguments select a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "viewfl/client/client.hpp"
#include "viewfl/datagen/generator.hpp"
#include "viewfl/experiment/benchmark.hpp"
#include "viewfl/experiment/experiment.hpp"
#include "viewfl/model/network.hpp"
#include "viewfl/model/serialize.hpp"
#include "viewfl/server/http.hpp"

namespace {

using namespace viewfl;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kFedAvgTol = 1e-12;
constexpr double kFedAvgMaxSeconds = 5.0;
constexpr double kGradRelTol = 1e-6;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelFloor = 1e-3;
constexpr std::size_t kGradMaxParams = 5000;
constexpr double kGradMaxSeconds = 60.0;
constexpr double kClMinAuc = 0.80;
constexpr double kFlMaxGap = 0.05;
constexpr double kFlClMaxSeconds = 600.0;
constexpr double kDpSlack = 0.02;
constexpr double kDpMaxSeconds = 1200.0;
constexpr double kPreprocessMaxMs = 1.0;
constexpr double kInferenceMaxMs = 10.0;
constexpr double kRoundMaxMs = 2000.0;
constexpr double kLatencyMaxSeconds = 120.0;
constexpr double kCommTol = 0.20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---- FedAvg ---------------------------------------------------------------

Outcome FedAvgCorrectness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto cfg = model::ModelConfig::Desk();
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t k = 1 + rng() % 5;
    std::vector<server::BasicClientUpdate<double>> ups;
    for (std::size_t i = 0; i < k; ++i) {
      model::BasicParams<double> p(cfg);
      p.ForEach([&](double& v) { v = n01(rng); });
      ups.push_back({"c" + std::to_string(i), "r0-00000000", 1 + rng() % 1000, false, std::move(p)});
    }
    const auto got = server::Aggregate<double>(ups).Flatten();
    std::vector<std::vector<double>> flat;
    long double den = 0;
    for (const auto& u : ups) {
      flat.push_back(u.params.Flatten());
      den += static_cast<long double>(u.num_samples);
    }
    for (std::size_t j = 0; j < got.size(); ++j) {
      long double num = 0;
      for (std::size_t i = 0; i < k; ++i) num += static_cast<long double>(ups[i].num_samples) * flat[i][j];
      worst = std::max(worst, std::abs(got[j] - static_cast<double>(num / den)));
    }
  }
  const double s = Seconds(t0);
  return {worst <= kFedAvgTol && s < kFedAvgMaxSeconds,
          Fmt("100 sets, max abs err %.3g (tol %.0e), %.2f s (limit %.0f s)", worst, kFedAvgTol, s,
              kFedAvgMaxSeconds)};
}

// ---- Gradients ------------------------------------------------------------

Outcome GradientCorrectness() {
  const auto t0 = Clock::now();
  model::ModelConfig c;
  c.n_binary = 3;
  c.n_numerical = 14;
  c.n_categorical = 9;
  c.hash_buckets = 16;
  c.embedding_dim = 4;
  c.numeric_dense_dim = 16;
  c.hidden_dims = {32, 16, 8, 8, 4};
  const auto count = model::ParameterCount(c);
  if (count > kGradMaxParams) return {false, Fmt("config has %zu params", count)};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> w(0.0, 0.5);
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    model::BasicParams<double> p(c);
    p.ForEach([&](double& v) { v = w(rng); });
    Sample s;
    for (std::size_t i = 0; i < c.n_binary; ++i) s.binary.push_back(u01(rng) < 0.5);
    for (std::size_t i = 0; i < c.n_numerical; ++i) s.numerical.push_back(u01(rng));
    for (std::size_t i = 0; i < c.n_categorical; ++i) {
      s.categorical.push_back(static_cast<std::uint32_t>(rng() % c.hash_buckets));
    }
    s.label_viewable = point % 2;
    const std::span<const Sample> batch(&s, 1);
    const std::vector<std::uint8_t> y{s.label_viewable};
    const auto g = model::Backward<double>(p, batch);
    for (std::size_t l = 0; l < p.layers().size(); ++l) {
      auto& vals = p.layer(l).values;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double saved = vals[i];
        vals[i] = saved + kGradStep;
        const double up = model::BceLoss<double>(model::Forward(p, batch), y);
        vals[i] = saved - kGradStep;
        const double down = model::BceLoss<double>(model::Forward(p, batch), y);
        vals[i] = saved;
        const double fd = (up - down) / (2.0 * kGradStep);
        const double an = g.grads.layer(l).values[i];
        worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), kGradRelFloor}));
      }
    }
  }
  const double s = Seconds(t0);
  return {worst <= kGradRelTol && s < kGradMaxSeconds,
          Fmt("%zu params, 20 points, max rel err %.3g (tol %.0e, floor %.0e, h %.0e), %.1f s",
              count, worst, kGradRelTol, kGradRelFloor, kGradStep, s)};
}

// ---- FL vs CL -------------------------------------------------------------

experiment::ExperimentConfig Fifty(experiment::Mode mode, std::vector<std::uint64_t> seeds) {
  experiment::ExperimentConfig c;
  c.mode = mode;
  c.n_users = 50;
  c.preset = "desk";
  c.gen.label_noise = 0.1;
  c.seeds = std::move(seeds);
  return c;
}

double MeanAuc(const experiment::ExperimentSummary& s) { return experiment::Mean(s.Aucs()); }

Outcome FlVsCl() {
  const auto t0 = Clock::now();
  const auto cl = experiment::RunExperiment(Fifty(experiment::Mode::kCentralized, {1, 2, 3}));
  const auto fl = experiment::RunExperiment(Fifty(experiment::Mode::kFl, {1, 2, 3}));
  const double a_cl = MeanAuc(cl), a_fl = MeanAuc(fl);
  const double s = Seconds(t0);
  return {a_cl >= kClMinAuc && a_fl >= a_cl - kFlMaxGap && s < kFlClMaxSeconds,
          Fmt("CL auc %.4f (min %.2f), FL auc %.4f (min CL-%.2f), 3 seeds, %.0f s", a_cl,
              kClMinAuc, a_fl, kFlMaxGap, s)};
}

// ---- DP ordering ----------------------------------------------------------

Outcome DpOrdering() {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  auto base = Fifty(experiment::Mode::kFl, seeds);
  const auto none = experiment::RunExperiment(base);
  base.dp.enabled = true;
  base.dp.epsilon = 1.0;
  const auto e1 = experiment::RunExperiment(base);
  base.dp.epsilon = 0.1;
  const auto e01 = experiment::RunExperiment(base);
  const double a0 = MeanAuc(none), a1 = MeanAuc(e1), a2 = MeanAuc(e01);
  double best_round_dp = 0.0;
  for (const auto* s : {&e1, &e01}) {
    for (const auto& r : s->seeds) best_round_dp += static_cast<double>(r.best_round);
  }
  best_round_dp /= 10.0;
  const double s = Seconds(t0);
  return {a0 >= a1 && a1 >= a2 - kDpSlack && s < kDpMaxSeconds,
          Fmt("auc no-dp %.4f >= eps1 %.4f >= eps0.1 %.4f - %.2f; mean best round under DP %.1f; %.0f s",
              a0, a1, a2, kDpSlack, best_round_dp, s)};
}

// ---- Early stopping -------------------------------------------------------

// Drives a real FlServer whose validation loss is scripted through the
// output bias of an otherwise all-zero model: p = sigmoid(b) for every
// sample, so the loss is a convex function of b with its minimum at
// logit(positive rate).
Outcome EarlyStopping() {
  const auto cfg = model::ModelConfig::Desk();
  std::vector<Sample> val;
  {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      Sample s;
      s.binary.assign(cfg.n_binary, 0);
      s.numerical.assign(cfg.n_numerical, 0.5);
      s.categorical.assign(cfg.n_categorical, static_cast<std::uint32_t>(rng() % cfg.hash_buckets));
      s.label_viewable = i < 30 ? 1 : 0;
      val.push_back(std::move(s));
    }
  }
  const double opt = std::log(0.3 / 0.7);
  const auto with_bias = [&](double b) {
    model::ModelParams p(cfg);
    p.layers().back().values[0] = static_cast<float>(b);
    return p;
  };

  std::string detail;
  bool pass = true;
  for (const std::uint64_t patience : {7u, 11u, 20u}) {
    for (const std::uint64_t k : {4u, 12u}) {
      server::RoundPolicy pol;
      pol.min_clients_per_round = 1;
      pol.patience = patience;
      pol.max_rounds = 1000;
      server::FlServer srv(with_bias(opt - 6.0), pol, val);
      std::uint64_t stopped_at = 0;
      for (std::uint64_t r = 1; r <= 200; ++r) {
        const double b = r <= k ? opt - 0.5 * static_cast<double>(k - r + 1)
                                : opt - 0.5 - 0.1 * static_cast<double>(r - k);
        srv.HandlePostUpdate({"c", srv.CurrentRelease()->tag, 1, false, with_bias(b)});
        if (srv.Status().status == server::ServerStatus::kStopped) {
          stopped_at = srv.Status().round;
          break;
        }
      }
      const bool ok = stopped_at == k + patience + 1;
      pass = pass && ok;
      detail += Fmt("p%llu/k%llu->%llu%s ", static_cast<unsigned long long>(patience),
                    static_cast<unsigned long long>(k), static_cast<unsigned long long>(stopped_at),
                    ok ? "" : "(!)");
    }
  }
  return {pass, "stop round k+patience+1: " + detail};
}

// ---- Latency --------------------------------------------------------------

Outcome Latency() {
  const auto t0 = Clock::now();
  experiment::BenchmarkConfig bc;  // full preset, 374 samples, 15 local rounds
  const auto r = experiment::RunBenchmark(bc);
  const double s = Seconds(t0);
  return {r.preprocess.mean <= kPreprocessMaxMs && r.inference.mean <= kInferenceMaxMs &&
              r.train.mean <= kRoundMaxMs && s < kLatencyMaxSeconds,
          Fmt("full preset (%zu params), 374 samples: preprocess %.4f ms/sample (<= %.0f), "
              "inference %.3f ms/sample (<= %.0f), round %.1f ms (<= %.0f), %.0f s",
              r.param_count, r.preprocess.mean, kPreprocessMaxMs, r.inference.mean,
              kInferenceMaxMs, r.train.mean, kRoundMaxMs, s)};
}

// ---- Communication --------------------------------------------------------

Outcome Communication() {
  experiment::ExperimentConfig c;
  c.mode = experiment::Mode::kFl;
  c.preset = "full";
  c.n_users = 3;
  c.local_rounds = 1;
  c.policy.max_rounds = 2;
  c.validation_users = 2;
  c.seeds = {1};
  const auto r = experiment::RunSeed(c, 1);
  const double raw = 2.0 * 4.0 * static_cast<double>(r.param_count);
  const double bprt = r.bytes_per_round_trip();
  const double ratio = bprt / raw;
  return {std::abs(ratio - 1.0) <= kCommTol,
          Fmt("full preset P=%zu: %.0f bytes/round trip vs 2*4*P=%.0f, ratio %.4f (tol %.2f), "
              "%zu round trips",
              r.param_count, bprt, raw, ratio, kCommTol, static_cast<std::size_t>(r.round_trips))};
}

// ---- Protocol conformance -------------------------------------------------

Outcome Protocol() {
  std::string detail;
  // Bit-exact serialization, including awkward float values.
  auto cfg = model::ModelConfig::Full();
  auto p = model::InitParams(cfg);
  auto& v0 = p.layer(0).values;
  v0[0] = -0.0f;
  v0[1] = std::numeric_limits<float>::denorm_min();
  v0[2] = std::numeric_limits<float>::max();
  v0[3] = std::numeric_limits<float>::lowest();
  v0[4] = std::nextafter(1.0f, 2.0f);
  const auto back = server::DecodeModelMessage(
      server::EncodeModelMessage("r0-00000000", 0, server::ServerStatus::kCollecting, p));
  bool bit_exact = back.params.layers().size() == p.layers().size();
  for (std::size_t l = 0; bit_exact && l < p.layers().size(); ++l) {
    const auto& a = p.layer(l).values;
    const auto& b = back.params.layer(l).values;
    bit_exact = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  }
  detail += bit_exact ? "round trip bit-exact; " : "round trip differs; ";

  // Scripted 3-client round over HTTP with held model requests.
  server::RoundPolicy pol;
  pol.min_clients_per_round = 3;
  server::FlServer srv(model::InitParams(model::ModelConfig::Desk()), pol, {});
  server::HttpOptions ho;
  ho.worker_threads = 16;
  ho.max_wait = 20000ms;
  server::HttpService http(srv, ho);
  const int port = http.Start();
  const auto t0 = srv.CurrentRelease()->tag;
  std::vector<std::future<server::FetchResult>> held;
  for (int i = 0; i < 3; ++i) {
    held.push_back(std::async(std::launch::async, [&, port] {
      server::HttpEndpoint ep("127.0.0.1", port);
      return ep.FetchModel(t0, 15000ms);
    }));
  }
  std::this_thread::sleep_for(200ms);
  server::HttpEndpoint ep("127.0.0.1", port);
  const auto boot = ep.FetchModel(std::nullopt, 0ms);
  bool ok = boot.kind == server::FetchResult::Kind::kModel && boot.message->tag == t0;
  std::set<std::string> tags_seen;
  for (const char* id : {"a", "b", "c"}) {
    const auto before = srv.CurrentRelease()->tag;
    tags_seen.insert(before);
    const auto reply = ep.Upload({id, t0, 10, false, boot.message->params});
    ok = ok && reply.status == server::UploadStatus::kAccepted;
  }
  const auto t1 = srv.CurrentRelease()->tag;
  const bool advanced_once = tags_seen == std::set<std::string>{t0} &&
                             server::ParseTag(t1)->round == 1 && srv.Status().round == 1;
  std::size_t released = 0;
  for (auto& f : held) {
    if (f.wait_for(10s) != std::future_status::ready) continue;
    const auto r = f.get();
    released += r.kind == server::FetchResult::Kind::kModel && r.message->tag == t1;
  }
  const auto stale = ep.Upload({"d", t0, 10, false, boot.message->params});
  const bool stale_rejected = stale.status == server::UploadStatus::kConflict && stale.current_tag == t1;
  http.Stop();
  detail += Fmt("3-client round advanced tag once: %s; held requests released %zu/3; stale upload %s",
                advanced_once && ok ? "yes" : "no", released, stale_rejected ? "rejected (409)" : "accepted");
  return {bit_exact && ok && advanced_once && released == 3 && stale_rejected, detail};
}

// ---- Pipeline labels ------------------------------------------------------

Outcome PipelineLabels() {
  datagen::GenConfig g;
  g.n_users = 4;
  g.min_samples_per_user = 250;
  g.ads_per_day = 0.0;
  g.seed = 11;
  const auto d = datagen::Generate(g);
  client::ClientConfig cc;
  cc.registry = std::make_shared<const preprocess::FeatureRegistry>(preprocess::DefaultRegistry(64));
  std::size_t ads = 0, mismatches = 0;
  for (const auto& u : d.users) {
    std::map<std::string, std::uint8_t> oracle;
    std::map<std::string, std::vector<client::VisibilityInterval>> ivs;
    for (const auto& e : u.events) {
      if (e.kind == client::EventKind::kAdLoad) ivs[e.ad_id];
      if (e.kind == client::EventKind::kVisibilityInterval) {
        ivs[e.ad_id].push_back({e.visible_fraction, e.duration_s});
      }
    }
    for (const auto& [id, list] : ivs) oracle[id] = client::DeriveViewabilityLabel(list);
    client::ClientState st;
    client::Replay(u.events, st, cc);
    for (const auto& s : st.store.samples()) {
      ++ads;
      const auto it = oracle.find(s.ad_id);
      mismatches += it == oracle.end() || it->second != s.label_viewable;
    }
    mismatches += oracle.size() != st.store.size();
  }
  return {ads == 1000 && mismatches == 0, Fmt("%zu ads replayed, %zu mismatches", ads, mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"fedavg_correctness", FedAvgCorrectness},
      {"gradient_correctness", GradientCorrectness},
      {"fl_vs_cl_gap", FlVsCl},
      {"dp_ordering", DpOrdering},
      {"early_stopping", EarlyStopping},
      {"latency_bounds", Latency},
      {"communication_accounting", Communication},
      {"protocol_conformance", Protocol},
      {"pipeline_label_correctness", PipelineLabels},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
