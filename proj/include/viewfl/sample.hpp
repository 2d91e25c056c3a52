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

#ifndef VIEWFL_SAMPLE_HPP_
#define VIEWFL_SAMPLE_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace viewfl {

// One preprocessed ad instance, partitioned the way the network consumes it.
struct Sample {
  std::vector<std::uint8_t> binary;
  std::vector<double> numerical;       // each in [0, 1]
  std::vector<std::uint32_t> categorical;  // bucket indices
  std::uint8_t label_viewable = 0;
  std::string ad_id;
  std::uint64_t registry_hash = 0;
  double timestamp = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace viewfl

#endif  // VIEWFL_SAMPLE_HPP_
