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

#include "bevloss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Core>

namespace bevloss {

namespace {

constexpr double kOnEdgeEpsilon = 1e-12;

using Polygon = std::vector<Eigen::Vector2d>;

Polygon box_corners(const Box3D& box) {
  const BottomPoints points = bottom_points(box);
  Polygon corners;
  corners.reserve(4);
  for (int i = 1; i < 5; ++i) corners.push_back(points[i].vec());
  return corners;
}

double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double twice_area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d& p = poly[i];
    const Eigen::Vector2d& q = poly[(i + 1) % poly.size()];
    twice_area += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(twice_area);
}

// Sutherland-Hodgman clip of a convex subject polygon against one directed
// edge (a -> b) of a counter-clockwise clip polygon. Points within
// kOnEdgeEpsilon of the edge count as inside.
Polygon clip_edge(const Polygon& subject, const Eigen::Vector2d& a,
                  const Eigen::Vector2d& b) {
  Polygon out;
  const Eigen::Vector2d dir = b - a;
  auto side = [&](const Eigen::Vector2d& p) {
    return dir.x() * (p.y() - a.y()) - dir.y() * (p.x() - a.x());
  };
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& cur = subject[i];
    const Eigen::Vector2d& nxt = subject[(i + 1) % n];
    const double s_cur = side(cur);
    const double s_nxt = side(nxt);
    const bool in_cur = s_cur >= -kOnEdgeEpsilon;
    const bool in_nxt = s_nxt >= -kOnEdgeEpsilon;
    if (in_cur) out.push_back(cur);
    if (in_cur != in_nxt) {
      const double t = s_cur / (s_cur - s_nxt);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

Polygon clip_convex(Polygon subject, const Polygon& clip) {
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    subject = clip_edge(subject, clip[i], clip[(i + 1) % clip.size()]);
  }
  return subject;
}

}  // namespace

double rotated_bev_iou(const Box3D& a, const Box3D& b) {
  const Polygon pa = box_corners(a);
  const Polygon pb = box_corners(b);
  const double inter = polygon_area(clip_convex(pa, pb));
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<BinStats> binned_errors(std::span<const ObjectError> results,
                                    std::span<const double> edges) {
  const std::size_t n_bins = edges.size();
  std::vector<std::vector<double>> errors(n_bins);
  std::vector<std::vector<double>> ious(n_bins);
  for (const ObjectError& r : results) {
    std::size_t bin = 0;
    while (bin + 1 < n_bins && r.depth >= edges[bin + 1]) ++bin;
    if (r.depth < edges[0]) continue;  // below the first edge: unbinnable
    errors[bin].push_back(r.center_error);
    ious[bin].push_back(r.iou);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<BinStats> stats(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    BinStats& s = stats[b];
    s.lo = edges[b];
    s.hi = b + 1 < n_bins ? edges[b + 1]
                          : std::numeric_limits<double>::infinity();
    s.count = static_cast<long>(errors[b].size());
    if (s.count == 0) {
      s.mean_error = s.median_error = s.mean_iou = nan;
      continue;
    }
    double sum_err = 0.0, sum_iou = 0.0;
    for (double e : errors[b]) sum_err += e;
    for (double v : ious[b]) sum_iou += v;
    s.mean_error = sum_err / static_cast<double>(s.count);
    s.mean_iou = sum_iou / static_cast<double>(s.count);
    std::sort(errors[b].begin(), errors[b].end());
    const std::size_t mid = errors[b].size() / 2;
    s.median_error = errors[b].size() % 2 == 1
                         ? errors[b][mid]
                         : 0.5 * (errors[b][mid - 1] + errors[b][mid]);
  }
  return stats;
}

std::string render_table(const DepthBinnedReport& report) {
  std::ostringstream out;
  out << "depth-binned BEV center error (m) / mean BEV IoU / count\n";
  std::vector<std::string> headers;
  for (std::size_t b = 0; b < report.edges.size(); ++b) {
    std::ostringstream h;
    if (b + 1 < report.edges.size()) {
      h << report.edges[b] << "-" << report.edges[b + 1] << " m";
    } else {
      h << ">" << report.edges[b] << " m";
    }
    headers.push_back(h.str());
  }
  out << "config";
  for (const std::string& h : headers) out << " | " << h;
  out << "\n";
  for (const auto& row : report.rows) {
    out << row.config;
    for (const BinStats& s : row.bins) {
      char cell[96];
      if (s.count == 0) {
        std::snprintf(cell, sizeof(cell), " | - (0)");
      } else {
        std::snprintf(cell, sizeof(cell), " | %.3f / %.3f (%ld)",
                      s.mean_error, s.mean_iou, s.count);
      }
      out << cell;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace bevloss
