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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "viewfl/model/network.hpp"
#include "viewfl/privacy/dp.hpp"

namespace viewfl::privacy {
namespace {

using model::BasicParams;
using model::ModelConfig;
using model::ModelParams;
using viewfl::testing::RandomParams;
using viewfl::testing::TinyConfig;

double NormOracle(const BasicParams<double>& p) {
  long double sq = 0;
  for (const auto v : p.Flatten()) sq += static_cast<long double>(v) * v;
  return static_cast<double>(std::sqrt(sq));
}

TEST(ClipDeltaTest, InsideBallUnchanged) {
  auto d = RandomParams<double>(TinyConfig(), 1);
  const double n = NormOracle(d);
  d.ForEach([&](double& v) { v *= 0.5 / n; });
  const auto before = d;
  ClipDelta(d, 1.0);
  EXPECT_EQ(d, before);
}

TEST(ClipDeltaTest, TwiceTheBoundIsHalved) {
  auto d = RandomParams<double>(TinyConfig(), 2);
  const double n = NormOracle(d);
  d.ForEach([&](double& v) { v *= 2.0 / n; });
  const auto before = d.Flatten();
  ClipDelta(d, 1.0);
  const auto after = d.Flatten();
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_NEAR(after[i], before[i] / 2.0, 1e-15);
  EXPECT_NEAR(NormOracle(d), 1.0, 1e-12);
}

TEST(ClipDeltaTest, RandomDeltasMatchNormOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto d = RandomParams<double>(TinyConfig(), seed, 0.01 + 0.2 * static_cast<double>(seed % 7));
    const double before = NormOracle(d);
    const double c = 0.5 + static_cast<double>(seed % 3);
    ClipDelta(d, c);
    EXPECT_NEAR(NormOracle(d), std::min(before, c), 1e-9);
  }
}

TEST(NoiseSigmaTest, Examples) {
  EXPECT_NEAR(NoiseSigma(1.0, 1e-5, 1.0), std::sqrt(2.0 * std::log(1.25e5)), 1e-12);
  EXPECT_NEAR(NoiseSigma(1.0, 1e-5, 1.0), 4.84481, 1e-5);
  EXPECT_NEAR(NoiseSigma(0.1, 1e-5, 1.0) / NoiseSigma(1.0, 1e-5, 1.0), 10.0, 1e-12);
  EXPECT_NEAR(NoiseSigma(0.5, 1e-5, 2.0) / NoiseSigma(0.5, 1e-5, 1.0), 2.0, 1e-12);
  EXPECT_THROW(NoiseSigma(0.0, 1e-5, 1.0), ConfigError);
  EXPECT_THROW(NoiseSigma(1.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(NoiseSigma(1.0, 1e-5, 0.0), ConfigError);
}

TEST(PrivatizeTest, DisabledReturnsLocal) {
  const auto c = TinyConfig();
  const auto local = RandomParams<float>(c, 1);
  const auto global = RandomParams<float>(c, 2);
  EXPECT_EQ(PrivatizeUpdate(local, global, DPConfig{}), local);
}

TEST(PrivatizeTest, NoNoiseGivesGlobalPlusClippedDelta) {
  const auto c = TinyConfig();
  const auto local = RandomParams<float>(c, 3);
  const auto global = RandomParams<float>(c, 4);
  DPConfig dp;
  dp.enabled = true;
  dp.add_noise = false;
  const auto out = PrivatizeUpdate(local, global, dp);
  auto delta = local.Cast<double>();
  model::ZipApply(delta, global, [](double& d, float g) { d -= g; });
  const double scale = std::min(1.0, 1.0 / NormOracle(delta));
  const auto fo = out.Flatten(), fl = local.Flatten(), fg = global.Flatten();
  double dev = 0.0;
  for (std::size_t i = 0; i < fo.size(); ++i) {
    const double expect = fg[i] + scale * (static_cast<double>(fl[i]) - fg[i]);
    EXPECT_EQ(fo[i], static_cast<float>(expect));
    dev += (static_cast<double>(fo[i]) - fg[i]) * (static_cast<double>(fo[i]) - fg[i]);
  }
  EXPECT_LE(std::sqrt(dev), 1.0 + 1e-5);
}

TEST(PrivatizeTest, PureNoiseMomentsOnZeroDelta) {
  auto c = ModelConfig::Full();  // 393K elements
  const ModelParams global(c);
  DPConfig dp;
  dp.enabled = true;
  dp.epsilon = 1.0;
  dp.seed = 99;
  const auto out = PrivatizeUpdate(global, global, dp);
  const auto v = out.Flatten();
  ASSERT_GE(v.size(), 100000u);
  double sum = 0, sq = 0;
  for (const float x : v) {
    sum += x;
    sq += static_cast<double>(x) * x;
  }
  const double n = static_cast<double>(v.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  const double sigma = NoiseSigma(1.0, 1e-5, 1.0);
  EXPECT_NEAR(sd, sigma, 0.05 * sigma);
  EXPECT_NEAR(mean, 0.0, 0.05 * sigma);
}

TEST(PrivatizeTest, SeededAndShapeChecked) {
  const auto c = TinyConfig();
  const auto local = RandomParams<float>(c, 5);
  const auto global = RandomParams<float>(c, 6);
  DPConfig dp;
  dp.enabled = true;
  dp.seed = 7;
  EXPECT_EQ(PrivatizeUpdate(local, global, dp), PrivatizeUpdate(local, global, dp));
  dp.seed = 8;
  EXPECT_NE(PrivatizeUpdate(local, global, dp).Flatten(), PrivatizeUpdate(local, global, DPConfig{true, 1.0, 1e-5, 1.0, 7}).Flatten());
  EXPECT_THROW(PrivatizeUpdate(local, ModelParams(ModelConfig::Desk()), dp), InputError);
}

}  // namespace
}  // namespace viewfl::privacy
