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

#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "viewfl/datagen/generator.hpp"
#include "viewfl/model/metrics.hpp"

namespace viewfl::datagen {
namespace {

using client::EventKind;

std::string Serialize(const Dataset& d) {
  std::ostringstream out;
  for (const auto& u : d.users) client::WriteEventLog(out, u.events);
  return out.str();
}

double BayesAuc(const Dataset& d) {
  std::vector<double> p;
  std::vector<std::uint8_t> y;
  for (const auto& t : d.manifest) {
    p.push_back(t.propensity);
    y.push_back(t.label);
  }
  return model::Auc<double>(p, y);
}

GenConfig Small(std::uint64_t seed = 3) {
  GenConfig g;
  g.n_users = 20;
  g.seed = seed;
  return g;
}

TEST(GenerateTest, DeterministicPerSeed) {
  const auto a = Generate(Small());
  const auto b = Generate(Small());
  EXPECT_EQ(Serialize(a), Serialize(b));
  EXPECT_NE(Serialize(a), Serialize(Generate(Small(4))));
}

TEST(GenerateTest, EveryUserHasAtLeastMinAds) {
  GenConfig g;
  g.n_users = 100;
  const auto d = Generate(g);
  ASSERT_EQ(d.users.size(), 100u);
  for (const auto& u : d.users) {
    std::size_t loads = 0;
    for (const auto& e : u.events) loads += e.kind == EventKind::kAdLoad;
    EXPECT_EQ(loads, u.n_ads);
    EXPECT_GE(u.n_ads, 50u);
  }
}

TEST(GenerateTest, LogsChronologicalAndLabelsConsistent) {
  const auto d = Generate(Small());
  std::map<std::string, std::uint8_t> derived;
  for (const auto& u : d.users) {
    for (std::size_t i = 1; i < u.events.size(); ++i) {
      ASSERT_LE(u.events[i - 1].timestamp, u.events[i].timestamp) << u.user_id << " " << i;
    }
    for (const auto& e : u.events) {
      if (e.kind == EventKind::kAdLoad) derived.emplace(e.ad_id, 0);
      if (e.kind == EventKind::kVisibilityInterval && e.visible_fraction >= 0.5 &&
          e.duration_s >= 1.0) {
        derived[e.ad_id] = 1;
      }
    }
  }
  ASSERT_EQ(derived.size(), d.manifest.size());
  for (const auto& t : d.manifest) EXPECT_EQ(derived.at(t.ad_id), t.label) << t.ad_id;
}

TEST(GenerateTest, BayesOracleAuc) {
  GenConfig g;
  g.n_users = 50;
  g.label_noise = 0.05;
  EXPECT_GE(BayesAuc(Generate(g)), 0.90);
  // With balanced classes and noise rho, even a perfect scorer is capped at
  // (1-rho)^2 + rho(1-rho) = 0.90 for rho = 0.1.
  g.label_noise = 0.1;
  const double auc = BayesAuc(Generate(g));
  EXPECT_GE(auc, 0.88);
  EXPECT_LE(auc, 0.905);
}

TEST(GenerateTest, NoiseMonotonicallyDegradesOracle) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double prev = 1.0;
    for (const double noise : {0.0, 0.1, 0.2, 0.3, 0.4}) {
      auto g = Small(seed);
      g.label_noise = noise;
      const double auc = BayesAuc(Generate(g));
      EXPECT_LT(auc, prev) << seed << " " << noise;
      prev = auc;
    }
  }
}

TEST(GenerateTest, InvalidConfigs) {
  GenConfig g;
  g.max_ads_per_day = 5.0;
  EXPECT_THROW(Generate(g), ConfigError);
  g = GenConfig{};
  g.label_noise = 0.5;
  EXPECT_THROW(Generate(g), ConfigError);
  g = GenConfig{};
  g.n_users = 0;
  EXPECT_THROW(Generate(g), ConfigError);
  g = GenConfig{};
  g.signal.ad = -1.0;
  EXPECT_THROW(Generate(g), ConfigError);
}

TEST(PartitionTest, SingleUserStatsEqualItsCount) {
  auto g = Small();
  g.n_users = 1;
  const auto d = Generate(g);
  const auto rep = PartitionReport(d);
  ASSERT_EQ(rep.size(), 4u);
  for (const auto& b : rep) {
    EXPECT_EQ(b.n_users, 1u);
    EXPECT_EQ(b.min, static_cast<double>(d.users[0].n_ads));
    EXPECT_EQ(b.mean, b.min);
    EXPECT_EQ(b.max, b.min);
  }
}

TEST(PartitionTest, OracleStatsOnHandCounts) {
  const std::vector<std::size_t> counts{5, 1, 9, 3};
  const std::array<std::size_t, 2> tops{2, 10};
  const auto r = PartitionReport(counts, tops);
  EXPECT_EQ(r[0].min, 5.0);
  EXPECT_EQ(r[0].mean, 7.0);
  EXPECT_EQ(r[0].max, 9.0);
  EXPECT_EQ(r[1].n_users, 4u);
  EXPECT_EQ(r[1].mean, 4.5);
  EXPECT_EQ(r[1].min, 1.0);
}

TEST(PartitionTest, ZeroSkewIsNearUniform) {
  GenConfig g;
  g.n_users = 100;
  g.skew_exponent = 0.0;
  const auto d = Generate(g);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& u : d.users) {
    lo = std::min(lo, u.n_ads);
    hi = std::max(hi, u.n_ads);
  }
  EXPECT_LE(static_cast<double>(hi) / static_cast<double>(lo), 1.2);
}

TEST(PartitionTest, LongerHorizonHasLargerTopMean) {
  GenConfig g;
  g.n_users = 60;
  const auto ten = PartitionReport(Generate(g));
  g.days = 30;
  const auto thirty = PartitionReport(Generate(g));
  EXPECT_GT(thirty[1].mean, ten[1].mean);
  EXPECT_GT(ten[0].mean, ten[1].mean);  // rank skew
}

TEST(WriteDatasetTest, LogsReadBackAndManifestSeparate) {
  const auto dir = viewfl::testing::TempDir("datagen");
  auto g = Small();
  g.n_users = 3;
  const auto d = Generate(g);
  WriteDataset(d, dir / "logs", dir / "manifest.csv");
  for (const auto& u : d.users) {
    std::ifstream in(dir / "logs" / (u.user_id + ".jsonl"));
    const auto log = client::ReadEventLog(in);
    EXPECT_EQ(log.malformed, 0u);
    EXPECT_EQ(log.events, u.events);
  }
  std::ifstream m(dir / "manifest.csv");
  std::string header;
  std::getline(m, header);
  EXPECT_EQ(header, "user_id,ad_id,propensity,clean_label,label");
  std::size_t rows = 0;
  for (std::string line; std::getline(m, line);) ++rows;
  EXPECT_EQ(rows, d.manifest.size());
  std::ifstream log0(dir / "logs" / (d.users[0].user_id + ".jsonl"));
  const std::string text((std::istreambuf_iterator<char>(log0)), {});
  EXPECT_EQ(text.find("propensity"), std::string::npos);
  EXPECT_EQ(UserId(7), "user0007");
}

}  // namespace
}  // namespace viewfl::datagen
