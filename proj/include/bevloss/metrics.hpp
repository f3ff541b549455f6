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
#include <string>
#include <vector>

#include "bevloss/geometry.hpp"

namespace bevloss {

/// Exact intersection-over-union of the two BEV footprints (convex polygon
/// clipping). Symmetric, in [0, 1].
double rotated_bev_iou(const Box3D& a, const Box3D& b);

/// One matched object: ground-truth forward distance, BEV center error and
/// BEV IoU of the prediction.
struct ObjectError {
  double depth = 0.0;
  double center_error = 0.0;
  double iou = 0.0;
};

/// Statistics of one depth bin [lo, hi). Empty bins carry count 0 and NaN
/// statistics.
struct BinStats {
  double lo = 0.0;
  double hi = 0.0;
  long count = 0;
  double mean_error = 0.0;
  double median_error = 0.0;
  double mean_iou = 0.0;
};

/// Buckets objects into half-open bins [edges[i], edges[i+1]) with an implicit
/// final bin [edges.back(), inf).
std::vector<BinStats> binned_errors(std::span<const ObjectError> results,
                                    std::span<const double> edges);

/// Depth-binned comparison across loss configurations.
struct DepthBinnedReport {
  std::vector<double> edges;
  struct Row {
    std::string config;
    std::vector<BinStats> bins;
  };
  std::vector<Row> rows;
};

/// Plain-text comparison table.
std::string render_table(const DepthBinnedReport& report);

}  // namespace bevloss
