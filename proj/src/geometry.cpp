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

#include "bevloss/geometry.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace bevloss {

double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

bool is_valid(const Box3D& box) {
  return std::isfinite(box.center_x) && std::isfinite(box.center_y) &&
         std::isfinite(box.yaw) && box.yaw > -std::numbers::pi &&
         box.yaw <= std::numbers::pi && box.length > 0.0 && box.width > 0.0 &&
         box.height > 0.0;
}

bool is_valid(const CameraModel& camera) {
  const Eigen::Matrix3d& k = camera.intrinsics;
  if (!(k.array().isFinite().all() && camera.rotation.array().isFinite().all() &&
        camera.translation.array().isFinite().all())) {
    return false;
  }
  // K upper triangular with positive focal entries and K(2,2) = 1.
  if (k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0) return false;
  if (k(0, 0) <= 0.0 || k(1, 1) <= 0.0 || k(2, 2) != 1.0) return false;
  // R orthonormal with determinant +1.
  const Eigen::Matrix3d rtr = camera.rotation.transpose() * camera.rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    return false;
  }
  return std::abs(camera.rotation.determinant() - 1.0) < 1e-9;
}

CameraModel ground_camera(double fx, double fy, double cx, double cy,
                          double camera_height, double pitch) {
  CameraModel camera;
  camera.intrinsics << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  // Ground (x lateral, y forward, z up) -> camera (x right, y down, z forward).
  Eigen::Matrix3d base;
  base << 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0;
  // Positive pitch tilts the optical axis toward the ground.
  Eigen::Matrix3d tilt;
  const double c = std::cos(pitch), s = std::sin(pitch);
  tilt << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  camera.rotation = tilt * base;
  // Camera center sits at ground position (0, 0, camera_height).
  camera.translation = -camera.rotation * Eigen::Vector3d(0.0, 0.0, camera_height);
  return camera;
}

BottomPoints bottom_points(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = 0.5 * box.length, hw = 0.5 * box.width;
  BottomPoints points;
  points[0] = {box.center_x, box.center_y};
  const double ox[4] = {hl, -hl, -hl, hl};
  const double oy[4] = {hw, hw, -hw, -hw};
  for (int i = 0; i < 4; ++i) {
    points[i + 1] = {box.center_x + c * ox[i] - s * oy[i],
                     box.center_y + s * ox[i] + c * oy[i]};
  }
  return points;
}

static Eigen::Vector3d lift_to_camera(const CameraModel& camera,
                                      const GroundPoint2& point) {
  return camera.rotation * Eigen::Vector3d(point.x, point.y, 0.0) +
         camera.translation;
}

double camera_depth(const CameraModel& camera, const GroundPoint2& point) {
  return lift_to_camera(camera, point).z();
}

std::optional<ImagePoint2> project_point(const CameraModel& camera,
                                         const GroundPoint2& point) {
  const Eigen::Vector3d in_camera = lift_to_camera(camera, point);
  if (in_camera.z() <= kDepthEpsilon) return std::nullopt;
  const Eigen::Vector3d h = camera.intrinsics * in_camera;
  return ImagePoint2{h.x() / h.z(), h.y() / h.z()};
}

Eigen::Matrix2d project_jacobian(const CameraModel& camera,
                                 const GroundPoint2& point) {
  const Eigen::Vector3d h =
      camera.intrinsics * lift_to_camera(camera, point);
  const Eigen::Matrix<double, 3, 2> b =
      camera.intrinsics * camera.rotation.leftCols<2>();
  const double w = h.z();
  const double u = h.x() / w, v = h.y() / w;
  Eigen::Matrix2d jac;
  jac.row(0) = (b.row(0) - u * b.row(2)) / w;
  jac.row(1) = (b.row(1) - v * b.row(2)) / w;
  return jac;
}

std::optional<GroundPoint2> backproject(const CameraModel& camera,
                                        const ImagePoint2& pixel, double depth) {
  if (depth <= kDepthEpsilon) return std::nullopt;
  const Eigen::Vector3d ray =
      camera.intrinsics.inverse() * Eigen::Vector3d(pixel.u, pixel.v, 1.0);
  const Eigen::Vector3d in_ground =
      camera.rotation.transpose() * (depth * ray - camera.translation);
  return GroundPoint2{in_ground.x(), in_ground.y()};
}

Eigen::Matrix<double, 2, 3> backproject_jacobian(const CameraModel& camera,
                                                 const ImagePoint2& pixel,
                                                 double depth) {
  const Eigen::Matrix3d k_inv = camera.intrinsics.inverse();
  const Eigen::Vector3d ray = k_inv * Eigen::Vector3d(pixel.u, pixel.v, 1.0);
  const Eigen::Matrix3d r_t = camera.rotation.transpose();
  Eigen::Matrix<double, 2, 3> jac;
  jac.col(0) = (r_t * (depth * k_inv.col(0))).head<2>();
  jac.col(1) = (r_t * (depth * k_inv.col(1))).head<2>();
  jac.col(2) = (r_t * ray).head<2>();
  return jac;
}

}  // namespace bevloss
