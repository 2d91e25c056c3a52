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

#ifndef VIEWFL_MODEL_TRAIN_HPP_
#define VIEWFL_MODEL_TRAIN_HPP_

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "viewfl/base/error.hpp"
#include "viewfl/model/adam.hpp"
#include "viewfl/model/network.hpp"

namespace viewfl::model {

struct TrainOptions {
  std::size_t rounds = 15;  // full passes over the local data
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamHyper adam;
};

struct TrainReport {
  std::vector<double> loss_per_round;  // mean pre-update batch loss of each pass
  std::size_t adam_steps = 0;
};

// Trains from `params` with a fresh Adam state. Each pass shuffles with a
// generator seeded from options.seed.
template <class T>
TrainReport TrainLocal(BasicParams<T>& params, std::span<const Sample> dataset,
                       const TrainOptions& options) {
  if (dataset.empty()) throw TrainingError("train_local: empty dataset");
  if (options.rounds < 1) throw TrainingError("train_local: rounds must be >= 1");
  if (options.batch_size < 1) throw TrainingError("train_local: batch_size must be >= 1");

  AdamState<T> state(params.config(), options.adam);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;
  TrainReport report;
  for (std::size_t r = 0; r < options.rounds; ++r) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      const auto grad = Backward<T>(params, batch);
      weighted_loss += grad.loss * static_cast<double>(batch.size());
      AdamStep(params, grad.grads, state);
      ++report.adam_steps;
    }
    report.loss_per_round.push_back(weighted_loss / static_cast<double>(dataset.size()));
  }
  return report;
}

}  // namespace viewfl::model

#endif  // VIEWFL_MODEL_TRAIN_HPP_
