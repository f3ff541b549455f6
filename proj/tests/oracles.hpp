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
//
// Independent reference computations used by the tests. Everything here stays
// off the library's solve paths: plain rotation matrices, a direct 8x8 linear
// DLT solve, a ray-plane linear solve and stratified Monte-Carlo areas.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bevloss/geometry.hpp"

namespace oracles {

inline Eigen::Matrix2d rotation2d(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

/// Direct 4-point homography: fixes H(2,2) = 1 and solves the 8x8 linear
/// system with a QR factorization.
inline Eigen::Matrix3d dlt_four_point(
    const std::vector<Eigen::Vector2d>& sources,
    const std::vector<Eigen::Vector2d>& targets) {
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double sx = sources[i].x(), sy = sources[i].y();
    const double tx = targets[i].x(), ty = targets[i].y();
    a.row(2 * i) << sx, sy, 1.0, 0.0, 0.0, 0.0, -tx * sx, -tx * sy;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, sx, sy, 1.0, -ty * sx, -ty * sy;
    b(2 * i) = tx;
    b(2 * i + 1) = ty;
  }
  const Eigen::Matrix<double, 8, 1> h = a.colPivHouseholderQr().solve(b);
  Eigen::Matrix3d out;
  out << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return out;
}

/// Solves K (R Q + t) = depth * (u, v, 1) for the 3D point Q as one linear
/// system, without touching the library's backprojection path.
inline Eigen::Vector3d ray_point(const bevloss::CameraModel& camera,
                                 const bevloss::ImagePoint2& pixel,
                                 double depth) {
  const Eigen::Matrix3d m = camera.intrinsics * camera.rotation;
  const Eigen::Vector3d rhs =
      depth * Eigen::Vector3d(pixel.u, pixel.v, 1.0) -
      camera.intrinsics * camera.translation;
  return m.partialPivLu().solve(rhs);
}

/// Exact ground-plane-to-image homography of a camera: the 3x3 collapse of
/// K [R | t] onto the plane z = 0.
inline Eigen::Matrix3d ground_to_image(const bevloss::CameraModel& camera) {
  Eigen::Matrix3d g;
  const Eigen::Matrix3d kr = camera.intrinsics * camera.rotation;
  g.col(0) = kr.col(0);
  g.col(1) = kr.col(1);
  g.col(2) = camera.intrinsics * camera.translation;
  return g;
}

/// Matches the library's gauge convention so matrices are directly
/// comparable: unit Frobenius norm, positive scale at the reference point.
inline Eigen::Matrix3d gauge_fix(const Eigen::Matrix3d& h,
                                 const Eigen::Vector2d& reference_source) {
  Eigen::Matrix3d out = h / h.norm();
  const double w = out(2, 0) * reference_source.x() +
                   out(2, 1) * reference_source.y() + out(2, 2);
  if (w < 0.0) out = -out;
  return out;
}

inline bool point_in_box(const bevloss::Box3D& box, double x, double y) {
  const double dx = x - box.center_x;
  const double dy = y - box.center_y;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * box.length && std::abs(ly) <= 0.5 * box.width;
}

/// Stratified (jittered-grid) Monte-Carlo IoU over the joint bounding
/// rectangle of both footprints.
inline double mc_iou(const bevloss::Box3D& a, const bevloss::Box3D& b,
                     int samples, std::uint64_t seed) {
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const bevloss::Box3D* box : {&a, &b}) {
    for (int k = 1; k < 5; ++k) {
      const bevloss::GroundPoint2 p = bevloss::bottom_points(*box)[k];
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  const int grid = static_cast<int>(std::sqrt(static_cast<double>(samples)));
  const double step_x = (max_x - min_x) / grid;
  const double step_y = (max_y - min_y) / grid;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long in_union = 0, in_inter = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double x = min_x + (i + unit(rng)) * step_x;
      const double y = min_y + (j + unit(rng)) * step_y;
      const bool in_a = point_in_box(a, x, y);
      const bool in_b = point_in_box(b, x, y);
      if (in_a || in_b) ++in_union;
      if (in_a && in_b) ++in_inter;
    }
  }
  if (in_union == 0) return 0.0;
  return static_cast<double>(in_inter) / static_cast<double>(in_union);
}

}  // namespace oracles
