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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "viewfl/server/fl_server.hpp"

namespace viewfl::server {
namespace {

using namespace std::chrono_literals;
using model::BasicParams;
using model::ModelConfig;
using model::ModelParams;
using viewfl::testing::RandomParams;
using viewfl::testing::TinyConfig;

using DoubleUpdate = BasicClientUpdate<double>;

BasicParams<double> Filled(const ModelConfig& c, double v) {
  BasicParams<double> p(c);
  p.ForEach([&](double& x) { x = v; });
  return p;
}

DoubleUpdate Upd(std::string id, std::uint64_t n, BasicParams<double> p) {
  return DoubleUpdate{std::move(id), "r0-00000000", n, false, std::move(p)};
}

// Direct element-wise weighted mean in long double.
std::vector<double> Eq1Oracle(const std::vector<DoubleUpdate>& ups) {
  const auto n = ups.front().params.size();
  std::vector<long double> num(n, 0.0L);
  long double den = 0.0L;
  for (const auto& u : ups) {
    const auto f = u.params.Flatten();
    for (std::size_t i = 0; i < n; ++i) num[i] += static_cast<long double>(u.num_samples) * f[i];
    den += static_cast<long double>(u.num_samples);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(num[i] / den);
  return out;
}

TEST(AggregateTest, Examples) {
  const auto c = TinyConfig();
  std::vector<DoubleUpdate> two{Upd("a", 5, Filled(c, 0.0)), Upd("b", 5, Filled(c, 4.0))};
  for (const double v : Aggregate<double>(two).Flatten()) EXPECT_EQ(v, 2.0);
  two[0].num_samples = 1;
  two[1].num_samples = 3;
  for (const double v : Aggregate<double>(two).Flatten()) EXPECT_EQ(v, 3.0);
  const auto p = RandomParams<double>(c, 3);
  std::vector<DoubleUpdate> one{Upd("a", 17, p)};
  EXPECT_EQ(Aggregate<double>(one), p);
  const auto pf = RandomParams<float>(c, 3);
  std::vector<ClientUpdate> onef{ClientUpdate{"a", "t", 9, false, pf}};
  EXPECT_EQ(Aggregate<float>(onef), pf);
}

TEST(AggregateTest, RandomCasesMatchOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = TinyConfig();
    const std::size_t k = 1 + rng() % 5;
    std::vector<DoubleUpdate> ups;
    for (std::size_t i = 0; i < k; ++i) {
      ups.push_back(Upd("c" + std::to_string(i), 1 + rng() % 400, RandomParams<double>(c, rng())));
    }
    const auto got = Aggregate<double>(ups).Flatten();
    const auto want = Eq1Oracle(ups);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(AggregateTest, ReorderSplitAndConvexity) {
  const auto c = TinyConfig();
  std::vector<DoubleUpdate> ups{Upd("a", 10, RandomParams<double>(c, 1)),
                                Upd("b", 30, RandomParams<double>(c, 2)),
                                Upd("c", 7, RandomParams<double>(c, 3))};
  const auto base = Aggregate<double>(ups).Flatten();

  auto rev = ups;
  std::reverse(rev.begin(), rev.end());
  const auto r = Aggregate<double>(rev).Flatten();
  auto split = ups;
  split[0].num_samples = 5;
  split.push_back(Upd("a2", 5, ups[0].params));
  const auto s = Aggregate<double>(split).Flatten();

  std::vector<std::vector<double>> flat;
  for (const auto& u : ups) flat.push_back(u.params.Flatten());
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(r[i], base[i], 1e-12);
    EXPECT_NEAR(s[i], base[i], 1e-12);
    const double lo = std::min({flat[0][i], flat[1][i], flat[2][i]});
    const double hi = std::max({flat[0][i], flat[1][i], flat[2][i]});
    EXPECT_GE(base[i], lo);
    EXPECT_LE(base[i], hi);
  }
}

TEST(AggregateTest, Errors) {
  auto c = TinyConfig();
  std::vector<DoubleUpdate> none;
  EXPECT_THROW(Aggregate<double>(none), AggregationError);
  auto c2 = c;
  c2.hash_buckets = 5;
  std::vector<DoubleUpdate> mixed{Upd("a", 1, Filled(c, 1.0)), Upd("b", 1, Filled(c2, 1.0))};
  EXPECT_THROW(Aggregate<double>(mixed), AggregationError);
  std::vector<DoubleUpdate> tags{Upd("a", 1, Filled(c, 1.0)), Upd("b", 1, Filled(c, 1.0))};
  tags[1].base_tag = "r1-00000000";
  EXPECT_THROW(Aggregate<double>(tags), AggregationError);
  std::vector<DoubleUpdate> zero{Upd("a", 0, Filled(c, 1.0))};
  EXPECT_THROW(Aggregate<double>(zero), AggregationError);
}

std::vector<HistoryEntry> Scripted(const std::vector<double>& losses) {
  std::vector<HistoryEntry> h;
  for (std::size_t r = 0; r < losses.size(); ++r) h.push_back({r, "", losses[r], 0.0, {}});
  return h;
}

// First round at which ShouldStop fires when fed the sequence one round at a time.
std::optional<std::uint64_t> StopRound(const std::vector<double>& losses, std::uint64_t patience,
                                       std::uint64_t max_rounds) {
  for (std::size_t n = 1; n <= losses.size(); ++n) {
    const auto h = Scripted({losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(n)});
    if (ShouldStop(h, patience, max_rounds) == StopDecision::kStop) return n - 1;
  }
  return std::nullopt;
}

TEST(ShouldStopTest, Examples) {
  std::vector<double> l(19, 5.0);
  for (std::size_t r = 0; r <= 10; ++r) l[r] = 10.0 - static_cast<double>(r) * 0.5;
  EXPECT_EQ(ShouldStop(Scripted(l), 7, 100), StopDecision::kStop);  // best 10, round 18
  l.pop_back();
  EXPECT_EQ(ShouldStop(Scripted(l), 7, 100), StopDecision::kContinue);  // round 17

  std::vector<double> down;
  for (int r = 0; r < 50; ++r) down.push_back(1.0 / (r + 1));
  EXPECT_EQ(StopRound(down, 7, 40), 40u);
  EXPECT_EQ(StopRound(down, 7, 1000), std::nullopt);
}

TEST(ShouldStopTest, StopsAtBestPlusPatiencePlusOne) {
  for (const std::uint64_t patience : {1u, 7u, 11u, 20u}) {
    for (const std::size_t k : {0u, 3u, 10u}) {
      std::vector<double> l;
      for (std::size_t r = 0; r <= k; ++r) l.push_back(2.0 - 0.1 * static_cast<double>(r));
      for (std::size_t r = 0; r < 40; ++r) l.push_back(l[k] + 0.01 * static_cast<double>(r + 1));
      EXPECT_EQ(StopRound(l, patience, 1000), k + patience + 1) << patience << " " << k;
    }
  }
}

TEST(ShouldStopTest, TiesAndNaN) {
  // Equal later losses do not move the best round.
  EXPECT_EQ(StopRound({1.0, 0.5, 0.5, 0.5, 0.5}, 2, 100), 4u);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(StopRound({nan, nan, nan, nan}, 2, 100), std::nullopt);
  EXPECT_EQ(StopRound({1.0, nan, nan, nan, nan}, 2, 100), 3u);
}

TEST(TagTest, FormatAndParse) {
  EXPECT_EQ(MakeTag(0, 0x1234abcd5678ef90ULL), "r0-5678ef90");
  const auto t = ParseTag("r12-deadbeef");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->round, 12u);
  EXPECT_EQ(t->config_hash8, "deadbeef");
  for (const char* bad : {"", "r", "r1", "x1-deadbeef", "r-deadbeef", "r1-dead", "r1-deadbeeg",
                          "r1-DEADBEEF", "r1x-deadbeef", "r1-deadbeef0"}) {
    EXPECT_FALSE(ParseTag(bad)) << bad;
  }
}

TEST(ProtocolTest, RoundTrips) {
  const auto p = RandomParams<float>(TinyConfig(), 5);
  const auto tag = MakeTag(3, p.config_hash());
  const auto m = DecodeModelMessage(EncodeModelMessage(tag, 3, ServerStatus::kStopped, p));
  EXPECT_EQ(m.tag, tag);
  EXPECT_EQ(m.round, 3u);
  EXPECT_EQ(m.status, ServerStatus::kStopped);
  EXPECT_EQ(m.params, p);

  const ClientUpdate u{"client-1", tag, 42, true, p};
  const auto body = EncodeUpdate(u);
  const auto j = json::parse(body);
  for (const char* key : {"client_id", "base_tag", "num_samples", "dp_applied", "config", "layers"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto d = DecodeUpdate(body);
  EXPECT_EQ(d.client_id, u.client_id);
  EXPECT_EQ(d.base_tag, u.base_tag);
  EXPECT_EQ(d.num_samples, 42u);
  EXPECT_TRUE(d.dp_applied);
  EXPECT_EQ(d.params, p);

  for (const auto s : {UploadStatus::kAccepted, UploadStatus::kConflict, UploadStatus::kInvalid,
                       UploadStatus::kStopped}) {
    const auto r = DecodeUploadReply(EncodeUploadReply({s, "r1-00000000", "why"}));
    EXPECT_EQ(r.status, s);
    EXPECT_EQ(r.current_tag, "r1-00000000");
  }
  EXPECT_EQ(HttpStatusOf(UploadStatus::kConflict), 409);
  EXPECT_THROW(DecodeUpdate("{}"), FormatError);
  EXPECT_THROW(DecodeModelMessage("not json"), FormatError);
}

GlobalModelState SampleState() {
  GlobalModelState s;
  s.params = RandomParams<float>(TinyConfig(), 9);
  s.round = 5;
  s.tag = MakeTag(5, s.params.config_hash());
  s.history = {{0, "r0-x", 0.7, 0.5, 0.5}, {5, s.tag, std::numeric_limits<double>::quiet_NaN(),
                                            std::numeric_limits<double>::quiet_NaN(), {}}};
  s.status = ServerStatus::kStopped;
  return s;
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  const auto dir = viewfl::testing::TempDir("ckpt");
  const auto s = SampleState();
  SaveCheckpoint(s, dir / "c.ckpt");
  const auto l = LoadCheckpoint(dir / "c.ckpt");
  EXPECT_EQ(l.params, s.params);
  EXPECT_EQ(l.tag, s.tag);
  EXPECT_EQ(l.round, 5u);
  EXPECT_EQ(l.status, ServerStatus::kStopped);
  ASSERT_EQ(l.history.size(), 2u);
  EXPECT_EQ(l.history[0], s.history[0]);
  EXPECT_TRUE(std::isnan(l.history[1].validation_loss));
}

TEST(CheckpointTest, CorruptionDetected) {
  const auto s = SampleState();
  auto text = EncodeCheckpoint(s);
  EXPECT_NO_THROW(DecodeCheckpoint(text));
  text[text.size() / 2] ^= 0x01;
  EXPECT_THROW(DecodeCheckpoint(text), FormatError);
  EXPECT_THROW(DecodeCheckpoint("garbage"), FormatError);
  EXPECT_THROW(DecodeCheckpoint(EncodeCheckpoint(s).substr(0, 60)), FormatError);
  EXPECT_THROW(LoadCheckpoint("/nonexistent/viewfl.ckpt"), FormatError);
}

ClientUpdate Update(const FlServer& s, std::string id, std::uint64_t n, float v) {
  const auto cur = s.CurrentRelease();
  ModelParams p = cur->params;
  p.ForEach([&](float& x) { x = v; });
  return {std::move(id), cur->tag, n, false, std::move(p)};
}

RoundPolicy Policy(std::size_t min_clients) {
  RoundPolicy p;
  p.min_clients_per_round = min_clients;
  p.max_rounds = 50;
  return p;
}

TEST(FlServerTest, BootstrapAndStaleTags) {
  FlServer s(ModelParams(TinyConfig()), Policy(1), {});
  const auto boot = s.HandleGetModel(std::nullopt, 0ms);
  ASSERT_EQ(boot.kind, GetModelResult::Kind::kModel);
  EXPECT_EQ(boot.release->tag, MakeTag(0, boot.release->params.config_hash()));
  EXPECT_EQ(boot.release->round, 0u);
  EXPECT_EQ(DecodeModelMessage(GzipDecompress(boot.release->gzip_body)).params, boot.release->params);

  const auto r0 = boot.release->tag;
  ASSERT_EQ(s.HandlePostUpdate(Update(s, "a", 1, 0.0f)).status, UploadStatus::kAccepted);
  ASSERT_EQ(s.HandlePostUpdate(Update(s, "a", 1, 0.0f)).status, UploadStatus::kAccepted);
  EXPECT_EQ(s.Status().round, 2u);
  const auto stale = s.HandleGetModel(r0, 5s);
  ASSERT_EQ(stale.kind, GetModelResult::Kind::kModel);
  EXPECT_EQ(stale.release->round, 2u);

  auto old = Update(s, "b", 1, 0.0f);
  old.base_tag = r0;
  const auto rej = s.HandlePostUpdate(old);
  EXPECT_EQ(rej.status, UploadStatus::kConflict);
  EXPECT_EQ(rej.current_tag, s.CurrentRelease()->tag);
  EXPECT_EQ(s.HandleGetModel("bogus", 0ms).kind, GetModelResult::Kind::kBadRequest);
}

TEST(FlServerTest, HeldRequestTimesOutWithNoNewContent) {
  FlServer s(ModelParams(TinyConfig()), Policy(2), {});
  const auto tag = s.CurrentRelease()->tag;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = s.HandleGetModel(tag, 150ms);
  EXPECT_EQ(r.kind, GetModelResult::Kind::kNoNewContent);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 140ms);
}

TEST(FlServerTest, ThreeClientRoundReleasesHeldRequestsOnce) {
  std::vector<std::string> released;
  ServerOptions opts;
  opts.on_release = [&](const std::shared_ptr<const ModelRelease>& r) { released.push_back(r->tag); };
  FlServer s(ModelParams(TinyConfig()), Policy(3), {}, opts);
  const auto t0 = s.CurrentRelease()->tag;

  std::vector<std::future<GetModelResult>> held;
  for (int i = 0; i < 4; ++i) {
    held.push_back(std::async(std::launch::async, [&] { return s.HandleGetModel(t0, 10s); }));
  }
  std::this_thread::sleep_for(100ms);
  EXPECT_EQ(s.HandlePostUpdate(Update(s, "a", 1, 1.0f)).status, UploadStatus::kAccepted);
  EXPECT_EQ(s.HandlePostUpdate(Update(s, "b", 1, 2.0f)).status, UploadStatus::kAccepted);
  // Duplicate replaces a's earlier update.
  EXPECT_EQ(s.HandlePostUpdate(Update(s, "a", 1, 3.0f)).status, UploadStatus::kAccepted);
  EXPECT_EQ(s.Status().round, 0u);
  EXPECT_EQ(s.Status().clients_this_round, 2u);
  for (auto& f : held) EXPECT_EQ(f.wait_for(0ms), std::future_status::timeout);
  EXPECT_EQ(s.HandlePostUpdate(Update(s, "c", 2, 4.0f)).status, UploadStatus::kAccepted);

  const auto t1 = s.CurrentRelease()->tag;
  EXPECT_EQ(ParseTag(t1)->round, 1u);
  for (auto& f : held) {
    ASSERT_EQ(f.wait_for(5s), std::future_status::ready);
    const auto r = f.get();
    EXPECT_EQ(r.kind, GetModelResult::Kind::kModel);
    EXPECT_EQ(r.release->tag, t1);
  }
  EXPECT_EQ(released, (std::vector<std::string>{t0, t1}));
  // (3*1 + 2*1 + 4*2) / 4 = 3.25
  for (const float v : s.CurrentRelease()->params.Flatten()) EXPECT_EQ(v, 3.25f);
}

TEST(FlServerTest, TimeoutAggregatesPartialRound) {
  auto pol = Policy(5);
  pol.round_timeout_s = 10.0;
  FlServer s(ModelParams(TinyConfig()), pol, {});
  EXPECT_FALSE(s.CheckRoundTimeout(FlServer::Clock::now() + 1h));  // empty buffer
  s.HandlePostUpdate(Update(s, "a", 3, 1.0f));
  EXPECT_FALSE(s.CheckRoundTimeout(FlServer::Clock::now()));
  EXPECT_TRUE(s.CheckRoundTimeout(FlServer::Clock::now() + 11s));
  EXPECT_EQ(s.Status().round, 1u);
  for (const float v : s.CurrentRelease()->params.Flatten()) EXPECT_EQ(v, 1.0f);
}

TEST(FlServerTest, InvalidUpdatesRejected) {
  FlServer s(ModelParams(TinyConfig()), Policy(1), {});
  auto nan = Update(s, "a", 1, 0.0f);
  nan.params.layer(0).values[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(s.HandlePostUpdate(nan).status, UploadStatus::kInvalid);
  auto zero = Update(s, "a", 0, 0.0f);
  EXPECT_EQ(s.HandlePostUpdate(zero).status, UploadStatus::kInvalid);
  auto noid = Update(s, "", 1, 0.0f);
  EXPECT_EQ(s.HandlePostUpdate(noid).status, UploadStatus::kInvalid);
  EXPECT_EQ(s.Status().round, 0u);
}

TEST(FlServerTest, TopKBySamples) {
  auto pol = Policy(3);
  pol.selection = Selection::kTopKBySamples;
  pol.top_k = 2;
  FlServer s(ModelParams(TinyConfig()), pol, {});
  s.HandlePostUpdate(Update(s, "small", 1, 100.0f));
  s.HandlePostUpdate(Update(s, "big", 10, 1.0f));
  s.HandlePostUpdate(Update(s, "mid", 10, 3.0f));
  for (const float v : s.CurrentRelease()->params.Flatten()) EXPECT_EQ(v, 2.0f);
}

TEST(FlServerTest, StopsAtMaxRoundsAndRejectsLateUploads) {
  auto pol = Policy(1);
  pol.max_rounds = 2;
  const auto c = TinyConfig();
  const auto val = viewfl::testing::RandomSamples(c, 20, 1);
  FlServer s(model::InitParams(c), pol, val);
  s.HandlePostUpdate(Update(s, "a", 1, 0.0f));
  s.HandlePostUpdate(Update(s, "a", 1, 0.0f));
  EXPECT_EQ(s.Status().status, ServerStatus::kStopped);
  EXPECT_EQ(s.HandlePostUpdate(Update(s, "a", 1, 0.0f)).status, UploadStatus::kStopped);
  const auto t = s.CurrentRelease()->tag;
  EXPECT_EQ(s.HandleGetModel(t, 10s).kind, GetModelResult::Kind::kNoNewContent);
  const auto st = s.Status();
  ASSERT_EQ(st.history_tail.size(), 3u);
  for (const auto& h : st.history_tail) EXPECT_TRUE(std::isfinite(h.validation_loss));
}

TEST(FlServerTest, CheckpointResume) {
  const auto dir = viewfl::testing::TempDir("resume");
  const auto path = dir / "server.ckpt";
  ServerOptions opts;
  opts.checkpoint_path = path;
  std::string tag;
  ModelParams params;
  {
    FlServer s(model::InitParams(TinyConfig()), Policy(1), {}, opts);
    for (int i = 0; i < 5; ++i) s.HandlePostUpdate(Update(s, "a", 1, static_cast<float>(i) + 0.5f));
    tag = s.CurrentRelease()->tag;
    params = s.CurrentRelease()->params;
  }
  FlServer r(LoadCheckpoint(path), Policy(1), {});
  EXPECT_EQ(r.Status().round, 5u);
  EXPECT_EQ(r.CurrentRelease()->tag, tag);
  EXPECT_EQ(r.CurrentRelease()->params, params);
  EXPECT_EQ(r.Snapshot().history.size(), 6u);
}

TEST(FlServerTest, CheckpointFailureSurfacedInStatus) {
  ServerOptions opts;
  opts.checkpoint_path = "/nonexistent-dir/x/server.ckpt";
  FlServer s(ModelParams(TinyConfig()), Policy(1), {}, opts);
  EXPECT_FALSE(s.Status().checkpoint_error.empty());
  EXPECT_EQ(s.HandlePostUpdate(Update(s, "a", 1, 1.0f)).status, UploadStatus::kAccepted);
  EXPECT_EQ(s.Status().round, 1u);
  EXPECT_TRUE(StatusToJson(s.Status()).contains("checkpoint_error"));
}

TEST(FlServerTest, ShutdownWakesHeldRequests) {
  FlServer s(ModelParams(TinyConfig()), Policy(2), {});
  const auto tag = s.CurrentRelease()->tag;
  auto f = std::async(std::launch::async, [&] { return s.HandleGetModel(tag, 30s); });
  std::this_thread::sleep_for(50ms);
  s.Shutdown();
  ASSERT_EQ(f.wait_for(5s), std::future_status::ready);
  EXPECT_EQ(f.get().kind, GetModelResult::Kind::kNoNewContent);
}

TEST(RoundPolicyTest, Validation) {
  RoundPolicy p;
  p.min_clients_per_round = 0;
  EXPECT_THROW(p.Validate(), ConfigError);
  p = RoundPolicy{};
  p.patience = 0;
  EXPECT_THROW(p.Validate(), ConfigError);
  p = RoundPolicy{};
  p.selection = Selection::kTopKBySamples;
  EXPECT_THROW(p.Validate(), ConfigError);
}

}  // namespace
}  // namespace viewfl::server
