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

#pragma once

#include <span>
#include <vector>

#include "bevloss/loss.hpp"
#include "bevloss/parallel.hpp"

namespace bevloss {

/// Scene-parallel map of total_loss; scenes are independent, so the parallel
/// path is bit-identical to the serial reference.
std::vector<LossReport> evaluate_scenes(std::span<const SceneSample> scenes,
                                        const LossConfig& config, int step,
                                        ExecutionPolicy policy);

}  // namespace bevloss
