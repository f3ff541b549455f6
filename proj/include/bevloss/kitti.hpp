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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "bevloss/geometry.hpp"
#include "bevloss/loss.hpp"

namespace bevloss::kitti {

/// One object annotation in the devkit label format (15 whitespace-separated
/// fields). Locations live in the rectified camera frame, y down.
struct KittiLabelRecord {
  std::string type;
  double truncated = 0.0;            // [0, 1]
  int occluded = 0;                  // {0, 1, 2, 3}
  double alpha = 0.0;                // radians
  std::array<double, 4> bbox{};      // left, top, right, bottom (pixels)
  double height = 0.0;               // meters (devkit order: h, w, l)
  double width = 0.0;
  double length = 0.0;
  Eigen::Vector3d location = Eigen::Vector3d::Zero();  // bottom center
  double rotation_y = 0.0;           // radians, about the camera y axis
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& message, int line, int field)
      : std::runtime_error(message), line(line), field(field) {}
  int line = 0;   // 1-based
  int field = 0;  // 0-based index of the offending field
};

/// One record per non-empty line; malformed lines raise ParseError with their
/// position. Never returns a partial result.
std::vector<KittiLabelRecord> parse_labels(std::string_view text);

/// Devkit-style text, floats at two decimals.
std::string serialize_labels(std::span<const KittiLabelRecord> records);

struct KittiCalib {
  Eigen::Matrix<double, 3, 4> p2 = Eigen::Matrix<double, 3, 4>::Zero();
};

/// Raw "P2:" projection matrix.
KittiCalib read_calib(std::string_view text);

/// CameraModel for the rectified frame composed with the flat-ground mapping
/// (camera `camera_height` meters above the ground, no pitch or roll).
CameraModel parse_calib(std::string_view text, double camera_height = 1.65);
CameraModel to_camera(const KittiCalib& calib, double camera_height = 1.65);

/// Ground-frame box for the annotation: lateral = x, forward = z, vertical
/// dropped under the flat-ground assumption.
Box3D to_ground_frame(const KittiLabelRecord& record);

/// DontCare and essentially fully truncated objects have no usable bottom
/// points.
bool usable_for_loss(const KittiLabelRecord& record);

/// Scene with predictions equal to the ground truth, for self-consistency
/// checks of the loss pipeline on real annotations. Unusable records are
/// dropped; the result may be empty.
SceneSample scene_from_labels(std::span<const KittiLabelRecord> records,
                              const CameraModel& camera);

struct BboxConsistency {
  int checked = 0;  // easy Car annotations
  int inside = 0;   // whose projected bottom corners stay in the 2D bbox
};

/// Fraction of easy Car annotations whose projected bottom corners fall
/// inside the labeled 2D box inflated by `margin_px` (slack for non-flat
/// ground).
BboxConsistency bbox_consistency(std::span<const KittiLabelRecord> records,
                                 const CameraModel& camera,
                                 double margin_px = 15.0);

}  // namespace bevloss::kitti
