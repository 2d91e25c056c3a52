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

#ifndef VIEWFL_PREPROCESS_PREPROCESS_HPP_
#define VIEWFL_PREPROCESS_PREPROCESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/base/fnv1a.hpp"
#include "viewfl/preprocess/feature_registry.hpp"
#include "viewfl/sample.hpp"

namespace viewfl::preprocess {

using RawValue = std::variant<std::string, double, bool>;
// Missing keys are absent values.
using RawRecord = std::map<std::string, RawValue, std::less<>>;

// (x - min) / (max - min) clamped to [0, 1]. Absent or non-finite x scales
// the feature default instead.
inline double MinMaxScale(std::optional<double> x, const FeatureSpec& spec) {
  if (spec.method != Method::kMinMax) throw InputError("minmax_scale on non-minmax feature");
  const double lo = *spec.min;
  const double hi = *spec.max;
  const double v = (x && std::isfinite(*x)) ? *x : *spec.default_number;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

// FNV-1a 64 over the UTF-8 bytes, modulo buckets.
inline std::uint32_t HashEncode(std::string_view value, std::size_t buckets) {
  if (buckets < 2) throw InputError("hash_encode needs buckets >= 2");
  return static_cast<std::uint32_t>(Fnv1a64(value) % buckets);
}

// Partitioned features for one side (or all) of the registry.
struct FeatureVectors {
  std::optional<Side> side;  // empty: every feature of the registry
  std::uint64_t registry_hash = 0;
  std::vector<std::uint8_t> binary;
  std::vector<double> numerical;
  std::vector<std::uint32_t> categorical;
  std::size_t anomalies = 0;  // wrong-typed values replaced by defaults

  friend bool operator==(const FeatureVectors&, const FeatureVectors&) = default;
};

namespace detail {

inline const RawValue* Lookup(const RawRecord& raw, std::string_view name) {
  const auto it = raw.find(name);
  return it == raw.end() ? nullptr : &it->second;
}

}  // namespace detail

// Applies every spec (optionally only those of `side`) in canonical order.
// Never throws on record content: wrong types fall back to defaults.
inline FeatureVectors PreprocessRecord(const RawRecord& raw, const FeatureRegistry& registry,
                                       std::optional<Side> side = std::nullopt) {
  FeatureVectors out;
  out.side = side;
  out.registry_hash = registry.hash();
  for (const auto& spec : registry.specs()) {
    if (side && SideOf(spec.category) != *side) continue;
    const RawValue* v = detail::Lookup(raw, spec.name);
    switch (spec.method) {
      case Method::kPassthroughBinary: {
        std::uint8_t bit = spec.default_number.value_or(0.0) == 1.0 ? 1 : 0;
        if (v) {
          if (const bool* b = std::get_if<bool>(v)) {
            bit = *b ? 1 : 0;
          } else if (const double* d = std::get_if<double>(v); d && (*d == 0.0 || *d == 1.0)) {
            bit = *d == 1.0 ? 1 : 0;
          } else {
            ++out.anomalies;
          }
        }
        out.binary.push_back(bit);
        break;
      }
      case Method::kMinMax: {
        std::optional<double> x;
        if (v) {
          if (const double* d = std::get_if<double>(v)) x = *d;
          else ++out.anomalies;
        }
        out.numerical.push_back(MinMaxScale(x, spec));
        break;
      }
      case Method::kHash: {
        const std::string* s = v ? std::get_if<std::string>(v) : nullptr;
        if (v && !s) ++out.anomalies;
        out.categorical.push_back(HashEncode(s ? *s : *spec.default_string, *spec.buckets));
        break;
      }
    }
  }
  return out;
}

// Joins ad-side and context features into a Sample with label 0. The
// argument order does not matter: parts are placed by their side tag.
inline Sample AssembleSample(const FeatureVectors& first, const FeatureVectors& second,
                             std::string ad_id, double timestamp) {
  if (first.registry_hash != second.registry_hash) {
    throw InputError("assemble_sample: registry hash mismatch");
  }
  if (!first.side || !second.side || *first.side == *second.side) {
    throw InputError("assemble_sample: need one ad-side and one context part");
  }
  const FeatureVectors& ad = *first.side == Side::kAd ? first : second;
  const FeatureVectors& ctx = *first.side == Side::kAd ? second : first;
  Sample s;
  s.binary = ad.binary;
  s.binary.insert(s.binary.end(), ctx.binary.begin(), ctx.binary.end());
  s.numerical = ad.numerical;
  s.numerical.insert(s.numerical.end(), ctx.numerical.begin(), ctx.numerical.end());
  s.categorical = ad.categorical;
  s.categorical.insert(s.categorical.end(), ctx.categorical.begin(), ctx.categorical.end());
  s.label_viewable = 0;
  s.ad_id = std::move(ad_id);
  s.registry_hash = ad.registry_hash;
  s.timestamp = timestamp;
  return s;
}

}  // namespace viewfl::preprocess

#endif  // VIEWFL_PREPROCESS_PREPROCESS_HPP_
