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

#ifndef VIEWFL_DATAGEN_GENERATOR_HPP_
#define VIEWFL_DATAGEN_GENERATOR_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/client/events.hpp"
#include "viewfl/client/viewability.hpp"

namespace viewfl::datagen {

// Relative strength of each feature group in the latent viewability score.
struct SignalWeights {
  double ad = 2.0;
  double customized = 1.2;
  double session = 0.8;
  double user = 0.5;
  double page = 0.3;
};

struct GenConfig {
  std::size_t n_users = 50;
  std::size_t days = 10;
  std::size_t min_samples_per_user = 50;
  double skew_exponent = 0.8;     // user size ~ rank^-skew
  double ads_per_day = 40.0;      // extra ads per day for the top-ranked user
  double max_ads_per_day = 500.0; // per-user capacity of the horizon
  SignalWeights signal;
  double sharpness = 6.0;  // std of the latent logit
  double label_noise = 0.1;
  std::uint64_t seed = 1;

  void Validate() const {
    if (n_users < 1) throw ConfigError("n_users must be >= 1");
    if (days < 1) throw ConfigError("days must be >= 1");
    if (min_samples_per_user < 1) throw ConfigError("min_samples_per_user must be >= 1");
    if (!(skew_exponent >= 0.0)) throw ConfigError("skew_exponent must be >= 0");
    if (!(ads_per_day >= 0.0)) throw ConfigError("ads_per_day must be >= 0");
    if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ConfigError("label_noise must be in [0, 0.5)");
    if (!(sharpness > 0.0)) throw ConfigError("sharpness must be > 0");
    const auto& s = signal;
    if (s.ad < 0 || s.customized < 0 || s.session < 0 || s.user < 0 || s.page < 0) {
      throw ConfigError("signal weights must be non-negative");
    }
    if (s.ad + s.customized + s.session + s.user + s.page <= 0.0) {
      throw ConfigError("at least one signal weight must be positive");
    }
    const double capacity = max_ads_per_day * static_cast<double>(days);
    if (static_cast<double>(min_samples_per_user) + ads_per_day * 1.08 * static_cast<double>(days) >
        capacity) {
      throw ConfigError("infeasible config: per-user ad count exceeds horizon capacity");
    }
  }
};

// Ground truth for one ad. Kept apart from the logs.
struct AdTruth {
  std::string user_id;
  std::string ad_id;
  double propensity = 0.0;  // sigmoid of the latent logit
  std::uint8_t clean_label = 0;
  std::uint8_t label = 0;  // after label noise; what the logs encode
};

struct UserLog {
  std::string user_id;
  std::size_t rank = 0;
  std::size_t n_ads = 0;
  std::vector<client::AdEvent> events;
};

struct Dataset {
  std::vector<UserLog> users;
  std::vector<AdTruth> manifest;
};

inline std::string UserId(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "user%04zu", index);
  return buf;
}

// min + floor(rate * days * (rank+1)^-skew * U(0.92, 1.08)).
inline std::size_t UserAdCount(const GenConfig& cfg, std::size_t rank, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.92, 1.08);
  const double extra = cfg.ads_per_day * static_cast<double>(cfg.days) *
                       std::pow(static_cast<double>(rank + 1), -cfg.skew_exponent) * jitter(rng);
  return cfg.min_samples_per_user + static_cast<std::size_t>(std::floor(extra));
}

namespace detail {

struct Placement {
  const char* id;
  double offset;
};

inline constexpr std::array<Placement, 6> kPlacements{{
    {"adplacementTop", 0.3},
    {"adplacementSidebar", 0.0},
    {"adplacementInline1", 0.2},
    {"adplacementInline2", 0.0},
    {"adplacementBottom", -0.5},
    {"adplacementSticky", 1.0},
}};

struct Choice {
  const char* name;
  double weight;
  double offset;
};

inline constexpr std::array<Choice, 6> kSections{{
    {"news", 0.3, 0.36}, {"sports", 0.15, 0.72}, {"tech", 0.15, 0.0},
    {"life", 0.15, -0.36}, {"opinion", 0.1, -0.72}, {"video", 0.15, 0.48},
}};
inline constexpr std::array<Choice, 4> kCreativeTypes{{
    {"display", 0.5, 0.0}, {"video", 0.15, 0.6}, {"native", 0.25, 0.3}, {"rich_media", 0.1, -0.5},
}};
inline constexpr std::array<Choice, 5> kAdtech{{
    {"prebid", 0.35, 0.1}, {"gam", 0.3, 0.0}, {"amazon", 0.15, 0.0},
    {"criteo", 0.1, -0.1}, {"index", 0.1, 0.0},
}};
inline constexpr std::array<Choice, 5> kBrowsers{{
    {"chrome", 0.55, 0.3}, {"safari", 0.2, 0.1}, {"firefox", 0.1, -0.4},
    {"edge", 0.1, -0.3}, {"samsung", 0.05, 0.2},
}};

template <std::size_t N>
const Choice& Pick(const std::array<Choice, N>& choices, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& c : choices) total += c.weight;
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (const auto& c : choices) {
    if (u < c.weight) return c;
    u -= c.weight;
  }
  return choices.back();
}

inline double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool Bernoulli(std::mt19937_64& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

// Intervals whose derived label equals `label`.
inline std::vector<client::VisibilityInterval> SynthesizeIntervals(std::uint8_t label,
                                                                   std::mt19937_64& rng) {
  std::vector<client::VisibilityInterval> out;
  const int n_misses = std::uniform_int_distribution<int>(label ? 0 : 1, 2)(rng);
  for (int i = 0; i < n_misses; ++i) {
    if (Bernoulli(rng, 0.5)) {
      out.push_back({Uniform(rng, 0.0, 0.49), Uniform(rng, 0.2, 12.0)});  // mostly hidden
    } else {
      out.push_back({Uniform(rng, 0.5, 1.0), Uniform(rng, 0.05, 0.95)});  // too short
    }
  }
  if (label) {
    const auto pos = std::uniform_int_distribution<std::size_t>(0, out.size())(rng);
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos),
               client::VisibilityInterval{Uniform(rng, 0.5, 1.0), Uniform(rng, 1.0, 15.0)});
  }
  return out;
}

inline double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Events and ground truth for one user; depends only on (cfg, index).
inline UserLog GenerateUser(const GenConfig& cfg, std::size_t index,
                            std::vector<AdTruth>* truth = nullptr) {
  using client::AdEvent;
  using client::EventKind;
  using detail::Bernoulli;
  using detail::Uniform;
  std::mt19937_64 rng(DeriveSeed(cfg.seed, index));
  UserLog log;
  log.user_id = UserId(index);
  log.rank = index;
  log.n_ads = UserAdCount(cfg, index, rng);

  // User profile.
  const bool mobile = Bernoulli(rng, 0.4);
  const auto& browser = detail::Pick(detail::kBrowsers, rng);
  const char* os = mobile ? (Bernoulli(rng, 0.55) ? "android" : "ios")
                          : (Bernoulli(rng, 0.7) ? "windows" : (Bernoulli(rng, 0.8) ? "macos" : "linux"));
  const int version = std::uniform_int_distribution<int>(90, 125)(rng);
  const std::string user_agent = std::string("Mozilla/5.0 (") + os + ") " + browser.name + "/" +
                                 std::to_string(version);
  const double viewport_w = mobile ? 390.0 : 1366.0;
  const double viewport_h = mobile ? Uniform(rng, 600, 850) : Uniform(rng, 700, 1100);
  const double engagement = std::normal_distribution<double>(0.0, 1.0)(rng);
  const double s_user = 1.25 * ((mobile ? 0.9 : -0.6) + browser.offset);

  const auto& w = cfg.signal;
  const double norm = std::sqrt(w.ad * w.ad + w.customized * w.customized +
                                w.session * w.session + w.user * w.user + w.page * w.page);
  const double session_gap_mean =
      static_cast<double>(cfg.days) * 86400.0 / std::max(1.0, static_cast<double>(log.n_ads) / 6.0);

  double t = Uniform(rng, 0.0, 3600.0);
  std::size_t visits = 0;
  std::size_t ad_index = 0;
  while (ad_index < log.n_ads) {
    ++visits;
    const std::size_t pages = 1 + std::poisson_distribution<int>(std::max(0.3, 2.0 + engagement))(rng);
    std::size_t page_in_session = 0;
    for (std::size_t pg = 0; pg < pages && ad_index < log.n_ads; ++pg) {
      ++page_in_session;
      const auto& section = detail::Pick(detail::kSections, rng);
      const int article = std::uniform_int_distribution<int>(0, 29)(rng);
      const std::string path = std::string("/") + section.name + "/article-" + std::to_string(article);
      const double page_h = Uniform(rng, 1500, 6000);
      const double s_page = section.offset - 0.5 * (page_h - 3750.0) / 1300.0;
      const double s_session = std::tanh((static_cast<double>(page_in_session) - 3.0) / 2.0) +
                               0.5 * (visits >= 3 ? 1.0 : -1.0);

      AdEvent page;
      page.kind = EventKind::kPageRequest;
      page.timestamp = t;
      page.page_url = "https://news.example" + path;
      page.context = {{"user_agent", user_agent},
                      {"user_browser", std::string(browser.name)},
                      {"user_os", std::string(os)},
                      {"user_is_mobile", mobile},
                      {"page_url_path", path},
                      {"page_section", std::string(section.name)},
                      {"page_height", std::round(page_h)},
                      {"page_viewport_height", std::round(viewport_h)}};
      log.events.push_back(std::move(page));

      const double page_start = t;
      const std::size_t n_slots = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
      std::array<std::size_t, 6> order{0, 1, 2, 3, 4, 5};
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t k = 0; k < n_slots && ad_index < log.n_ads; ++k, ++ad_index) {
        const std::size_t slot = order[k];
        const auto& placement = detail::kPlacements[slot];
        double width = 300, height = 250, y = 0;
        switch (slot) {
          case 0: width = mobile ? 320 : 728; height = mobile ? 50 : 90; y = 90; break;
          case 1: y = mobile ? 0.2 * page_h : 400; break;
          case 2: y = 0.3 * page_h; break;
          case 3: width = 336; height = 280; y = 0.6 * page_h; break;
          case 4: width = mobile ? 320 : 728; height = mobile ? 50 : 90; y = page_h - 250; break;
          default: width = 320; height = 50; y = viewport_h - 50; break;
        }
        const double pos_y = std::max(0.0, std::round(y + Uniform(rng, -30, 30)));
        const bool above_fold = pos_y + height / 2.0 < viewport_h;
        const bool iframe = Bernoulli(rng, 0.8);
        const int depth = std::uniform_int_distribution<int>(1, 8)(rng);
        const double bytes =
            std::round(std::clamp(40000.0 * std::exp(0.6 * std::normal_distribution<double>()(rng)),
                                  1000.0, 200000.0));
        const auto& creative = detail::Pick(detail::kCreativeTypes, rng);
        const auto& adtech = detail::Pick(detail::kAdtech, rng);
        const double delay =
            std::round(std::min(10000.0, std::exponential_distribution<double>(1.0 / 900.0)(rng)));

        const double s_ad = 1.6 * (above_fold ? 1.0 : 0.0) - 0.8 + placement.offset -
                            1.2 * (std::min(pos_y / page_h, 1.0) - 0.4) + creative.offset +
                            adtech.offset + (iframe ? -0.3 : 0.0) - 0.15 * (depth - 3) -
                            0.3 * std::log(bytes / 40000.0);
        const double s_custom = 1.0 - delay / 900.0;
        const double z = cfg.sharpness *
                         (w.ad * s_ad + w.customized * s_custom + w.session * s_session +
                          w.user * s_user + w.page * s_page) /
                         (1.1 * norm);
        const double p = detail::Sigmoid(z);
        const std::uint8_t clean = Bernoulli(rng, p) ? 1 : 0;
        const std::uint8_t label = Bernoulli(rng, cfg.label_noise) ? 1 - clean : clean;

        AdEvent ad;
        ad.kind = EventKind::kAdLoad;
        t += Uniform(rng, 0.2, 2.0);
        ad.timestamp = t;
        ad.page_url = "https://news.example" + path;
        ad.ad_placement_id = placement.id;
        ad.ad_id = log.user_id + "-ad" + std::to_string(ad_index);
        ad.ad_metadata = {{"ad_width", width},
                          {"ad_height", height},
                          {"ad_size", std::to_string(static_cast<int>(width)) + "x" +
                                          std::to_string(static_cast<int>(height))},
                          {"ad_area_ratio", width * height / (viewport_w * viewport_h)},
                          {"ad_creative_bytes", bytes},
                          {"ad_nesting_depth", static_cast<double>(depth)},
                          {"ad_position_y", pos_y},
                          {"ad_slot_index", static_cast<double>(slot)},
                          {"ad_above_fold", above_fold},
                          {"ad_in_iframe", iframe},
                          {"ad_creative_type", std::string(creative.name)},
                          {"ad_adtech_tag", std::string(adtech.name)},
                          {"ad_load_delay_ms", delay}};
        const std::string ad_id = ad.ad_id;
        log.events.push_back(std::move(ad));
        for (const auto& iv : detail::SynthesizeIntervals(label, rng)) {
          t += Uniform(rng, 0.1, 1.0);
          AdEvent v;
          v.kind = EventKind::kVisibilityInterval;
          v.timestamp = t;
          v.ad_id = ad_id;
          v.visible_fraction = iv.visible_fraction;
          v.duration_s = iv.duration_s;
          log.events.push_back(std::move(v));
          t += iv.duration_s;
        }
        if (truth) truth->push_back({log.user_id, ad_id, p, clean, label});
      }
      t = std::max(t, page_start + Uniform(rng, 20, 240)) + Uniform(rng, 1, 5);
    }
    AdEvent end;
    end.kind = EventKind::kSessionEnd;
    end.timestamp = t;
    log.events.push_back(std::move(end));
    // Next visit after more than the 30 minute session timeout.
    t += 1860.0 + std::exponential_distribution<double>(1.0 / session_gap_mean)(rng);
  }
  return log;
}

inline Dataset Generate(const GenConfig& cfg) {
  cfg.Validate();
  Dataset d;
  d.users.reserve(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) d.users.push_back(GenerateUser(cfg, u, &d.manifest));
  return d;
}

// Sample-count statistics over the top-x users by count.
struct PartitionBucket {
  std::size_t top_x = 0;
  std::size_t n_users = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

inline std::vector<PartitionBucket> PartitionReport(std::vector<std::size_t> counts,
                                                    std::span<const std::size_t> tops) {
  std::vector<PartitionBucket> out;
  if (counts.empty()) return out;
  std::sort(counts.begin(), counts.end(), std::greater<>());
  for (const std::size_t x : tops) {
    PartitionBucket b;
    b.top_x = x;
    b.n_users = std::min(x, counts.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < b.n_users; ++i) sum += static_cast<double>(counts[i]);
    b.max = static_cast<double>(counts.front());
    b.min = static_cast<double>(counts[b.n_users - 1]);
    b.mean = sum / static_cast<double>(b.n_users);
    out.push_back(b);
  }
  return out;
}

inline std::vector<PartitionBucket> PartitionReport(const Dataset& d) {
  static constexpr std::array<std::size_t, 4> kTops{10, 50, 100, 500};
  std::vector<std::size_t> counts;
  for (const auto& u : d.users) counts.push_back(u.n_ads);
  return PartitionReport(std::move(counts), kTops);
}

// Logs go to <dir>/<user_id>.jsonl; the manifest is a separate CSV.
inline void WriteDataset(const Dataset& d, const std::filesystem::path& log_dir,
                         const std::filesystem::path& manifest_path) {
  std::filesystem::create_directories(log_dir);
  for (const auto& u : d.users) {
    std::ofstream out(log_dir / (u.user_id + ".jsonl"), std::ios::trunc);
    client::WriteEventLog(out, u.events);
    if (!out) throw std::runtime_error("failed writing log for " + u.user_id);
  }
  if (manifest_path.has_parent_path()) std::filesystem::create_directories(manifest_path.parent_path());
  std::ofstream m(manifest_path, std::ios::trunc);
  m << "user_id,ad_id,propensity,clean_label,label\n";
  char buf[32];
  for (const auto& t : d.manifest) {
    std::snprintf(buf, sizeof(buf), "%.17g", t.propensity);
    m << t.user_id << ',' << t.ad_id << ',' << buf << ',' << int(t.clean_label) << ','
      << int(t.label) << '\n';
  }
  if (!m) throw std::runtime_error("failed writing manifest");
}

}  // namespace viewfl::datagen

#endif  // VIEWFL_DATAGEN_GENERATOR_HPP_
