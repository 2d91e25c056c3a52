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

#ifndef VIEWFL_EXPERIMENT_BENCHMARK_HPP_
#define VIEWFL_EXPERIMENT_BENCHMARK_HPP_

#include <sys/resource.h>

#include <chrono>
#include <string>
#include <vector>

#include "json.hpp"
#include "viewfl/client/client.hpp"
#include "viewfl/datagen/generator.hpp"
#include "viewfl/experiment/experiment.hpp"
#include "viewfl/model/network.hpp"
#include "viewfl/model/train.hpp"

namespace viewfl::experiment {

struct BenchmarkConfig {
  std::string preset = "full";
  std::size_t n_samples = 374;
  std::size_t repetitions = 10;
  std::size_t local_rounds = 15;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct Timing {
  std::string name;
  std::string unit;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> samples;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::size_t param_count = 0;
  Timing preprocess{"preprocess", "ms/sample", 0.0, 0.0, {}};
  Timing inference{"inference", "ms/sample", 0.0, 0.0, {}};
  Timing train{"train", "ms/round", 0.0, 0.0, {}};
  long peak_rss_kb = 0;
};

inline long PeakRssKb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

namespace detail {

inline void Finish(Timing& t) {
  t.mean = Mean(t.samples);
  t.std = StdDev(t.samples);
}

struct CapturedAd {
  preprocess::RawRecord ad;
  preprocess::RawRecord context;
};

}  // namespace detail

// One synthetic client with exactly n_samples ads. Each repetition times
// preprocessing and inference over every ad, and train_local over
// local_rounds passes (reported per pass).
inline BenchmarkReport RunBenchmark(const BenchmarkConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  auto mcfg = model::ModelConfig::Preset(cfg.preset);
  mcfg.seed = cfg.seed;
  BenchmarkReport rep;
  rep.config = cfg;
  rep.param_count = model::ParameterCount(mcfg);

  datagen::GenConfig g;
  g.n_users = 1;
  g.min_samples_per_user = cfg.n_samples;
  g.ads_per_day = 0.0;
  g.max_ads_per_day = static_cast<double>(cfg.n_samples);
  g.days = 1;
  g.seed = cfg.seed;
  const auto data = datagen::Generate(g);

  client::ClientConfig ccfg;
  ccfg.registry = RegistryFor(mcfg);
  client::ClientState st;
  client::Replay(data.users.front().events, st, ccfg);
  const std::vector<Sample> samples = st.store.samples();

  // Raw records exactly as the replay captured them.
  std::vector<detail::CapturedAd> raws;
  {
    preprocess::SessionState session;
    preprocess::RawRecord ctx;
    for (const auto& e : data.users.front().events) {
      if (e.kind == client::EventKind::kPageRequest) {
        session = preprocess::ComputeSessionFeatures(session, e.timestamp, e.page_url).state;
        ctx = e.context;
        preprocess::AddSessionFeatures(session, ctx);
      } else if (e.kind == client::EventKind::kAdLoad) {
        auto ad = e.ad_metadata;
        ad["ad_placement_id"] = e.ad_placement_id;
        raws.push_back({std::move(ad), ctx});
      }
    }
  }

  const auto params = model::InitParams(mcfg);
  const auto& registry = *ccfg.registry;
  volatile double sink = 0.0;
  for (std::size_t r = 0; r < cfg.repetitions; ++r) {
    auto t0 = Clock::now();
    for (const auto& raw : raws) {
      const auto a = preprocess::PreprocessRecord(raw.ad, registry, preprocess::Side::kAd);
      const auto c = preprocess::PreprocessRecord(raw.context, registry, preprocess::Side::kContext);
      const auto s = preprocess::AssembleSample(a, c, "bench", 0.0);
      sink = sink + s.numerical[0];
    }
    auto t1 = Clock::now();
    rep.preprocess.samples.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(raws.size()));

    t0 = Clock::now();
    for (const auto& s : samples) {
      sink = sink + model::Forward(params, std::span<const Sample>(&s, 1))[0];
    }
    t1 = Clock::now();
    rep.inference.samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                                    static_cast<double>(samples.size()));

    auto trained = params;
    model::TrainOptions opts;
    opts.rounds = cfg.local_rounds;
    opts.batch_size = cfg.batch_size;
    opts.seed = DeriveSeed(cfg.seed, r);
    t0 = Clock::now();
    model::TrainLocal(trained, samples, opts);
    t1 = Clock::now();
    rep.train.samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                                static_cast<double>(cfg.local_rounds));
  }
  detail::Finish(rep.preprocess);
  detail::Finish(rep.inference);
  detail::Finish(rep.train);
  rep.peak_rss_kb = PeakRssKb();
  return rep;
}

inline nlohmann::json BenchmarkToJson(const BenchmarkReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const Timing* t : {&r.preprocess, &r.inference, &r.train}) {
    rows.push_back({{"name", t->name}, {"unit", t->unit}, {"mean", t->mean}, {"std", t->std},
                    {"repetitions", t->samples.size()}});
  }
  return {{"preset", r.config.preset},
          {"param_count", r.param_count},
          {"n_samples", r.config.n_samples},
          {"local_rounds", r.config.local_rounds},
          {"timings", rows},
          {"peak_rss_kb", r.peak_rss_kb}};
}

inline std::string BenchmarkCsv(const BenchmarkReport& r) {
  std::string out = "metric,unit,mean,std\n";
  for (const Timing* t : {&r.preprocess, &r.inference, &r.train}) {
    out += t->name + "," + t->unit + "," + Num(t->mean) + "," + Num(t->std) + "\n";
  }
  out += "peak_rss,kb," + std::to_string(r.peak_rss_kb) + ",\n";
  return out;
}

}  // namespace viewfl::experiment

#endif  // VIEWFL_EXPERIMENT_BENCHMARK_HPP_
