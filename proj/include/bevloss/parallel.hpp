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

#include <cstddef>

namespace bevloss {

/// serial is the reference path; parallel distributes iterations over an
/// OpenMP thread pool. Each index writes only its own output slot, so the two
/// paths produce bit-identical results.
enum class ExecutionPolicy { serial, parallel };

template <typename Fn>
void for_each_index(std::size_t count, ExecutionPolicy policy, Fn&& fn) {
  if (policy == ExecutionPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
      fn(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) fn(i);
  }
}

}  // namespace bevloss
