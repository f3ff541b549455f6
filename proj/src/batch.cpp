// Copyright 2026 The bevloss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bevloss/batch.hpp"

namespace bevloss {

std::vector<LossReport> evaluate_scenes(std::span<const SceneSample> scenes,
                                        const LossConfig& config, int step,
                                        ExecutionPolicy policy) {
  std::vector<LossReport> reports(scenes.size());
  for_each_index(scenes.size(), policy, [&](std::size_t i) {
    reports[i] = total_loss(scenes[i], config, step);
  });
  return reports;
}

}  // namespace bevloss
