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

#ifndef VIEWFL_BASE_ERROR_HPP_
#define VIEWFL_BASE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace viewfl {

// Invalid model, registry, generator or policy configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or out-of-range input to a pure operation (shape mismatch,
// bucket index out of range, empty batch).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Local training could not run, e.g. the dataset is empty.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric is not defined for the given data (single-class AUC).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Wire payload or persisted artifact could not be decoded.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FedAvg preconditions violated (mixed config hashes, no updates).
class AggregationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace viewfl

#endif  // VIEWFL_BASE_ERROR_HPP_
