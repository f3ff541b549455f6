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

#include <array>
#include <optional>

#include <Eigen/Core>

namespace bevloss {

/// Camera-frame depths at or below this threshold are treated as behind the
/// camera (dehomogenization would blow up).
inline constexpr double kDepthEpsilon = 1e-6;

/// Point on the BEV ground plane, meters. x is lateral (right), y is forward.
struct GroundPoint2 {
  double x = 0.0;
  double y = 0.0;

  Eigen::Vector2d vec() const { return {x, y}; }
};

/// Pixel position on the image plane.
struct ImagePoint2 {
  double u = 0.0;
  double v = 0.0;

  Eigen::Vector2d vec() const { return {u, v}; }
};

/// Oriented 3D box resting on the ground plane (bottom face at height 0).
/// The ground frame is right-handed: x lateral, y forward, vertical up.
struct Box3D {
  double center_x = 0.0;  // bottom-center, meters
  double center_y = 0.0;  // bottom-center, meters
  double yaw = 0.0;       // rotation about the vertical axis, (-pi, pi]
  double length = 1.0;    // extent along the heading direction, meters
  double width = 1.0;     // meters
  double height = 1.0;    // meters
  int class_id = 0;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

bool is_valid(const Box3D& box);

/// Pinhole camera mapping ground-frame points to pixels: q ~ K (R Q + t).
struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();   // K
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();     // R, ground -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();      // t, meters
};

bool is_valid(const CameraModel& camera);

/// Camera looking forward along ground +y from `camera_height` meters above
/// the ground plane. `pitch` tilts the optical axis downward (radians).
CameraModel ground_camera(double fx, double fy, double cx, double cy,
                          double camera_height, double pitch = 0.0);

/// Bottom center followed by the four bottom corners in counter-clockwise
/// order, starting at the (+length/2, +width/2) offset rotated by yaw.
using BottomPoints = std::array<GroundPoint2, 5>;
BottomPoints bottom_points(const Box3D& box);

/// Camera-frame depth of a ground-plane point.
double camera_depth(const CameraModel& camera, const GroundPoint2& point);

/// Exact pinhole projection of a ground-plane point. Empty when the point has
/// camera-frame depth <= kDepthEpsilon.
std::optional<ImagePoint2> project_point(const CameraModel& camera,
                                         const GroundPoint2& point);

/// d(u, v) / d(x, y) of project_point. Requires positive camera depth.
Eigen::Matrix2d project_jacobian(const CameraModel& camera,
                                 const GroundPoint2& point);

/// Inverse of project_point along the pixel ray at the given camera-frame
/// depth, dropped onto the BEV plane. Empty when depth <= kDepthEpsilon.
std::optional<GroundPoint2> backproject(const CameraModel& camera,
                                        const ImagePoint2& pixel, double depth);

/// d(x, y) / d(u, v, depth) of backproject. Requires depth > 0.
Eigen::Matrix<double, 2, 3> backproject_jacobian(const CameraModel& camera,
                                                 const ImagePoint2& pixel,
                                                 double depth);

}  // namespace bevloss
