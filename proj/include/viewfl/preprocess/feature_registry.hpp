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

#ifndef VIEWFL_PREPROCESS_FEATURE_REGISTRY_HPP_
#define VIEWFL_PREPROCESS_FEATURE_REGISTRY_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/model/config.hpp"

namespace viewfl::preprocess {

enum class FeatureCategory { kUser, kPage, kSession, kAd, kCustomized };
enum class FeatureKind { kBinary, kNumerical, kCategorical };
enum class Method { kMinMax, kHash, kPassthroughBinary };

// Ad-side features are captured per ad instance; context features once per
// page request.
enum class Side { kAd, kContext };

inline Side SideOf(FeatureCategory c) {
  return (c == FeatureCategory::kAd || c == FeatureCategory::kCustomized) ? Side::kAd
                                                                           : Side::kContext;
}

inline std::string_view ToString(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::kUser: return "user";
    case FeatureCategory::kPage: return "page";
    case FeatureCategory::kSession: return "session";
    case FeatureCategory::kAd: return "ad";
    case FeatureCategory::kCustomized: return "customized";
  }
  return "?";
}
inline std::string_view ToString(FeatureKind k) {
  switch (k) {
    case FeatureKind::kBinary: return "binary";
    case FeatureKind::kNumerical: return "numerical";
    case FeatureKind::kCategorical: return "categorical";
  }
  return "?";
}
inline std::string_view ToString(Method m) {
  switch (m) {
    case Method::kMinMax: return "minmax";
    case Method::kHash: return "hash";
    case Method::kPassthroughBinary: return "passthrough_binary";
  }
  return "?";
}

inline FeatureCategory ParseCategory(std::string_view s) {
  if (s == "user") return FeatureCategory::kUser;
  if (s == "page") return FeatureCategory::kPage;
  if (s == "session") return FeatureCategory::kSession;
  if (s == "ad") return FeatureCategory::kAd;
  if (s == "customized") return FeatureCategory::kCustomized;
  throw ConfigError("unknown feature category '" + std::string(s) + "'");
}
inline FeatureKind ParseKind(std::string_view s) {
  if (s == "binary") return FeatureKind::kBinary;
  if (s == "numerical") return FeatureKind::kNumerical;
  if (s == "categorical") return FeatureKind::kCategorical;
  throw ConfigError("unknown feature kind '" + std::string(s) + "'");
}
inline Method ParseMethod(std::string_view s) {
  if (s == "minmax") return Method::kMinMax;
  if (s == "hash") return Method::kHash;
  if (s == "passthrough_binary") return Method::kPassthroughBinary;
  throw ConfigError("unknown preprocessing method '" + std::string(s) + "'");
}

// Shortest decimal text that parses back to the same double.
inline std::string FormatNumber(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double ParseNumber(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("bad number '" + std::string(s) + "'");
  }
  return v;
}

struct FeatureSpec {
  std::string name;
  FeatureCategory category = FeatureCategory::kAd;
  FeatureKind kind = FeatureKind::kNumerical;
  Method method = Method::kMinMax;
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> default_number;       // minmax and passthrough_binary
  std::optional<std::string> default_string;  // hash
  std::optional<std::size_t> buckets;         // hash

  void Validate() const {
    if (name.empty()) throw ConfigError("feature without a name");
    const std::string where = "feature '" + name + "': ";
    switch (method) {
      case Method::kMinMax:
        if (kind != FeatureKind::kNumerical) throw ConfigError(where + "minmax needs kind numerical");
        if (!min || !max || !std::isfinite(*min) || !std::isfinite(*max) || !(*min < *max)) {
          throw ConfigError(where + "minmax requires finite min < max");
        }
        if (!default_number || *default_number < *min || *default_number > *max) {
          throw ConfigError(where + "minmax default must lie within [min, max]");
        }
        break;
      case Method::kHash:
        if (kind != FeatureKind::kCategorical) throw ConfigError(where + "hash needs kind categorical");
        if (!buckets || *buckets < 2) throw ConfigError(where + "hash requires buckets >= 2");
        if (!default_string) throw ConfigError(where + "hash requires a default string");
        break;
      case Method::kPassthroughBinary:
        if (kind != FeatureKind::kBinary) throw ConfigError(where + "passthrough_binary needs kind binary");
        if (default_number && *default_number != 0.0 && *default_number != 1.0) {
          throw ConfigError(where + "binary default must be 0 or 1");
        }
        break;
    }
  }

  // Canonical single-line rendering; also the registry file syntax.
  std::string Render() const {
    std::string s = "name=" + name + " category=" + std::string(ToString(category)) +
                    " kind=" + std::string(ToString(kind)) +
                    " method=" + std::string(ToString(method));
    if (min) s += " min=" + FormatNumber(*min);
    if (max) s += " max=" + FormatNumber(*max);
    if (buckets) s += " buckets=" + std::to_string(*buckets);
    if (method == Method::kHash) {
      s += " default=" + default_string.value_or("");
    } else if (default_number) {
      s += " default=" + FormatNumber(*default_number);
    }
    return s;
  }

  static FeatureSpec Parse(std::string_view line) {
    std::map<std::string, std::string> kv;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("bad registry token '" + tok + "'");
      if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second) {
        throw ConfigError("duplicate key in registry line: " + tok.substr(0, eq));
      }
    }
    auto take = [&](const char* key) -> std::optional<std::string> {
      const auto it = kv.find(key);
      if (it == kv.end()) return std::nullopt;
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    FeatureSpec f;
    f.name = take("name").value_or("");
    f.category = ParseCategory(take("category").value_or(""));
    f.kind = ParseKind(take("kind").value_or(""));
    f.method = ParseMethod(take("method").value_or(""));
    if (auto v = take("min")) f.min = ParseNumber(*v);
    if (auto v = take("max")) f.max = ParseNumber(*v);
    if (auto v = take("buckets")) f.buckets = static_cast<std::size_t>(ParseNumber(*v));
    if (auto v = take("default")) {
      if (f.method == Method::kHash) f.default_string = *v;
      else f.default_number = ParseNumber(*v);
    }
    if (!kv.empty()) throw ConfigError("unknown registry key '" + kv.begin()->first + "'");
    f.Validate();
    return f;
  }
};

// Immutable, canonically ordered feature list: binary, then numerical, then
// categorical; inside each partition ad-side features precede context
// features, otherwise declaration order is kept.
class FeatureRegistry {
 public:
  FeatureRegistry() = default;

  explicit FeatureRegistry(std::vector<FeatureSpec> specs) {
    std::set<std::string> names;
    for (const auto& s : specs) {
      s.Validate();
      if (!names.insert(s.name).second) throw ConfigError("duplicate feature name '" + s.name + "'");
    }
    auto rank = [](const FeatureSpec& s) {
      return static_cast<int>(s.kind) * 2 + (SideOf(s.category) == Side::kAd ? 0 : 1);
    };
    std::stable_sort(specs.begin(), specs.end(),
                     [&](const FeatureSpec& a, const FeatureSpec& b) { return rank(a) < rank(b); });
    specs_ = std::move(specs);
    for (const auto& s : specs_) {
      switch (s.kind) {
        case FeatureKind::kBinary: ++n_binary_; break;
        case FeatureKind::kNumerical: ++n_numerical_; break;
        case FeatureKind::kCategorical: ++n_categorical_; break;
      }
    }
    hash_ = Fnv1a64(Render());
  }

  static FeatureRegistry Parse(std::string_view text) {
    std::vector<FeatureSpec> specs;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      specs.push_back(FeatureSpec::Parse(line));
    }
    return FeatureRegistry(std::move(specs));
  }

  // Canonical text: one rendered spec per line, canonical order, '\n' endings.
  std::string Render() const {
    std::string out;
    for (const auto& s : specs_) {
      out += s.Render();
      out += '\n';
    }
    return out;
  }

  const std::vector<FeatureSpec>& specs() const { return specs_; }
  std::size_t n_binary() const { return n_binary_; }
  std::size_t n_numerical() const { return n_numerical_; }
  std::size_t n_categorical() const { return n_categorical_; }
  std::uint64_t hash() const { return hash_; }

  const FeatureSpec* Find(std::string_view name) const {
    for (const auto& s : specs_) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  // Throws ConfigError unless partition counts and bucket sizes match.
  void CheckBinding(const model::ModelConfig& config) const {
    if (n_binary_ != config.n_binary || n_numerical_ != config.n_numerical ||
        n_categorical_ != config.n_categorical) {
      throw ConfigError("registry partition counts do not match the model config");
    }
    for (const auto& s : specs_) {
      if (s.kind == FeatureKind::kCategorical && s.buckets != config.hash_buckets) {
        throw ConfigError("feature '" + s.name + "' bucket count differs from model hash_buckets");
      }
    }
  }

 private:
  std::vector<FeatureSpec> specs_;
  std::size_t n_binary_ = 0;
  std::size_t n_numerical_ = 0;
  std::size_t n_categorical_ = 0;
  std::uint64_t hash_ = 0;
};

// The shipped 26-input registry (3 binary, 14 numerical, 9 categorical).
inline FeatureRegistry DefaultRegistry(std::size_t buckets = 64) {
  using C = FeatureCategory;
  auto bin = [](std::string n, C c) {
    FeatureSpec f;
    f.name = std::move(n);
    f.category = c;
    f.kind = FeatureKind::kBinary;
    f.method = Method::kPassthroughBinary;
    f.default_number = 0.0;
    return f;
  };
  auto num = [](std::string n, C c, double lo, double hi, double def) {
    FeatureSpec f;
    f.name = std::move(n);
    f.category = c;
    f.kind = FeatureKind::kNumerical;
    f.method = Method::kMinMax;
    f.min = lo;
    f.max = hi;
    f.default_number = def;
    return f;
  };
  auto cat = [buckets](std::string n, C c) {
    FeatureSpec f;
    f.name = std::move(n);
    f.category = c;
    f.kind = FeatureKind::kCategorical;
    f.method = Method::kHash;
    f.buckets = buckets;
    f.default_string = "unknown";
    return f;
  };
  return FeatureRegistry({
      bin("ad_above_fold", C::kAd),
      bin("ad_in_iframe", C::kAd),
      bin("user_is_mobile", C::kUser),
      num("ad_width", C::kAd, 0, 1000, 300),
      num("ad_height", C::kAd, 0, 1000, 250),
      num("ad_area_ratio", C::kAd, 0, 1, 0.05),
      num("ad_creative_bytes", C::kAd, 0, 200000, 20000),
      num("ad_nesting_depth", C::kAd, 0, 20, 3),
      num("ad_position_y", C::kAd, 0, 20000, 2000),
      num("ad_slot_index", C::kAd, 0, 10, 0),
      num("ad_load_delay_ms", C::kCustomized, 0, 10000, 500),
      num("page_height", C::kPage, 0, 6000, 1500),
      num("page_viewport_height", C::kPage, 0, 3000, 800),
      num("session_pages_this_session", C::kSession, 0, 100, 1),
      num("session_pages_visited_total", C::kSession, 0, 1000, 1),
      num("session_seconds_since_last_visit", C::kSession, 0, 2592000, 0),
      num("session_visits_count", C::kSession, 0, 500, 1),
      cat("ad_placement_id", C::kAd),
      cat("ad_size", C::kAd),
      cat("ad_adtech_tag", C::kAd),
      cat("ad_creative_type", C::kAd),
      cat("user_agent", C::kUser),
      cat("user_browser", C::kUser),
      cat("user_os", C::kUser),
      cat("page_url_path", C::kPage),
      cat("page_section", C::kPage),
  });
}

}  // namespace viewfl::preprocess

#endif  // VIEWFL_PREPROCESS_FEATURE_REGISTRY_HPP_
