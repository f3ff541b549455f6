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

#include <algorithm>
#include <cmath>
#include <vector>

namespace bevloss {

/// Central finite differences of a scalar function of a flat parameter
/// vector. Evaluates only the forward value, so it stays independent of any
/// analytic gradient path it is used to check.
template <typename Fn>
std::vector<double> central_difference(Fn&& fn, std::vector<double> params,
                                       double step = 1e-6) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double f_plus = fn(params);
    params[i] = saved - step;
    const double f_minus = fn(params);
    params[i] = saved;
    grad[i] = (f_plus - f_minus) / (2.0 * step);
  }
  return grad;
}

/// Max-norm relative deviation between two gradients.
inline double gradient_deviation(const std::vector<double>& reference,
                                 const std::vector<double>& actual) {
  double max_ref = 0.0, max_diff = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    max_ref = std::max(max_ref, std::abs(reference[i]));
    max_diff = std::max(max_diff, std::abs(reference[i] - actual[i]));
  }
  return max_diff / std::max(max_ref, 1e-12);
}

}  // namespace bevloss
