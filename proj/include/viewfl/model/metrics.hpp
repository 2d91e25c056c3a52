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

#ifndef VIEWFL_MODEL_METRICS_HPP_
#define VIEWFL_MODEL_METRICS_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/model/network.hpp"

namespace viewfl::model {

// Mann-Whitney AUC: (concordant pairs + ties / 2) / (#pos * #neg).
template <class S>
double Auc(std::span<const S> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw InputError("auc: length mismatch");
  std::uint64_t n_pos = 0;
  for (const auto y : labels) n_pos += y ? 1 : 0;
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("auc needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of positives, tied groups sharing the average rank.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      pos_in_group += labels[order[j]] ? 1 : 0;
      ++j;
    }
    // 1-based ranks i+1..j; average rank * 2 = i + 1 + j.
    twice_rank_sum += pos_in_group * (i + 1 + j);
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * n_pos * n_neg);
}

struct EvalReport {
  double loss = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;  // empty when the dataset is single-class
  std::size_t n_samples = 0;
};

// Accuracy predicts positive only for probability > 0.5.
template <class P>
EvalReport EvaluatePredictions(std::span<const P> preds, std::span<const std::uint8_t> labels) {
  EvalReport r;
  r.n_samples = preds.size();
  r.loss = BceLoss(preds, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool positive = static_cast<double>(preds[i]) > 0.5;
    correct += (positive == (labels[i] != 0)) ? 1 : 0;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  try {
    r.auc = Auc(preds, labels);
  } catch (const UndefinedMetricError&) {
    r.auc.reset();
  }
  return r;
}

template <class T>
EvalReport Evaluate(const BasicParams<T>& params, std::span<const Sample> dataset) {
  if (dataset.empty()) throw InputError("evaluate on empty dataset");
  const auto preds = Forward(params, dataset);
  std::vector<std::uint8_t> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset) labels.push_back(s.label_viewable);
  return EvaluatePredictions<T>(preds, labels);
}

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_METRICS_HPP_
