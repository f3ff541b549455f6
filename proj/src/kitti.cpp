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

#include "bevloss/kitti.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Dense>

namespace bevloss::kitti {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r') {
      ++i;
    }
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_double(std::string_view token, int line, int field) {
  // std::from_chars in libstdc++ 11 handles general floating formats,
  // including the exponent notation calib files use.
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    std::ostringstream msg;
    msg << "kitti: bad numeric field '" << token << "' (line " << line
        << ", field " << field << ")";
    throw ParseError(msg.str(), line, field);
  }
  return value;
}

int parse_int(std::string_view token, int line, int field) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    std::ostringstream msg;
    msg << "kitti: bad integer field '" << token << "' (line " << line
        << ", field " << field << ")";
    throw ParseError(msg.str(), line, field);
  }
  return value;
}

}  // namespace

std::vector<KittiLabelRecord> parse_labels(std::string_view text) {
  std::vector<KittiLabelRecord> records;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, end == std::string_view::npos ? text.size() - pos
                                                       : end - pos);
    ++line_no;
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;

    const std::vector<std::string_view> tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 15) {
      std::ostringstream msg;
      msg << "kitti: expected 15 fields, got " << tokens.size() << " (line "
          << line_no << ")";
      throw ParseError(msg.str(), line_no, static_cast<int>(tokens.size()));
    }
    KittiLabelRecord r;
    r.type = std::string(tokens[0]);
    r.truncated = parse_double(tokens[1], line_no, 1);
    r.occluded = parse_int(tokens[2], line_no, 2);
    r.alpha = parse_double(tokens[3], line_no, 3);
    for (int i = 0; i < 4; ++i) {
      r.bbox[i] = parse_double(tokens[4 + i], line_no, 4 + i);
    }
    r.height = parse_double(tokens[8], line_no, 8);
    r.width = parse_double(tokens[9], line_no, 9);
    r.length = parse_double(tokens[10], line_no, 10);
    for (int i = 0; i < 3; ++i) {
      r.location(i) = parse_double(tokens[11 + i], line_no, 11 + i);
    }
    r.rotation_y = parse_double(tokens[14], line_no, 14);
    if (r.type != "DontCare" &&
        (r.height <= 0.0 || r.width <= 0.0 || r.length <= 0.0)) {
      std::ostringstream msg;
      msg << "kitti: non-positive dimensions (line " << line_no << ")";
      throw ParseError(msg.str(), line_no, 8);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string serialize_labels(std::span<const KittiLabelRecord> records) {
  std::string out;
  char buf[256];
  for (const KittiLabelRecord& r : records) {
    std::snprintf(buf, sizeof(buf),
                  "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f "
                  "%.2f %.2f %.2f\n",
                  r.type.c_str(), r.truncated, r.occluded, r.alpha, r.bbox[0],
                  r.bbox[1], r.bbox[2], r.bbox[3], r.height, r.width, r.length,
                  r.location.x(), r.location.y(), r.location.z(),
                  r.rotation_y);
    out += buf;
  }
  return out;
}

KittiCalib read_calib(std::string_view text) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, end == std::string_view::npos ? text.size() - pos
                                                       : end - pos);
    ++line_no;
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;

    const std::vector<std::string_view> tokens = split_ws(line);
    if (tokens.empty() || tokens[0] != "P2:") continue;
    if (tokens.size() != 13) {
      std::ostringstream msg;
      msg << "kitti: P2 line needs 12 numbers, got " << tokens.size() - 1
          << " (line " << line_no << ")";
      throw ParseError(msg.str(), line_no, static_cast<int>(tokens.size()));
    }
    KittiCalib calib;
    for (int i = 0; i < 12; ++i) {
      calib.p2(i / 4, i % 4) = parse_double(tokens[1 + i], line_no, 1 + i);
    }
    if (!calib.p2.array().isFinite().all()) {
      throw ParseError("kitti: non-finite P2 entry", line_no, 1);
    }
    return calib;
  }
  throw ParseError("kitti: no P2 line found", line_no, 0);
}

CameraModel to_camera(const KittiCalib& calib, double camera_height) {
  CameraModel camera;
  camera.intrinsics = calib.p2.leftCols<3>();
  // Ground (x lateral, y forward, z up) -> rectified camera (x right, y down,
  // z forward); the rectified frame is assumed pitch- and roll-free.
  camera.rotation << 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0;
  const Eigen::Vector3d rect_offset =
      camera.intrinsics.inverse() * calib.p2.col(3);
  camera.translation = Eigen::Vector3d(0.0, camera_height, 0.0) + rect_offset;
  return camera;
}

CameraModel parse_calib(std::string_view text, double camera_height) {
  return to_camera(read_calib(text), camera_height);
}

Box3D to_ground_frame(const KittiLabelRecord& record) {
  Box3D box;
  box.center_x = record.location.x();
  box.center_y = record.location.z();
  box.yaw = normalize_angle(-record.rotation_y);
  box.length = record.length;
  box.width = record.width;
  box.height = record.height;
  return box;
}

bool usable_for_loss(const KittiLabelRecord& record) {
  return record.type != "DontCare" && record.truncated <= 0.98 &&
         record.height > 0.0 && record.width > 0.0 && record.length > 0.0;
}

SceneSample scene_from_labels(std::span<const KittiLabelRecord> records,
                              const CameraModel& camera) {
  SceneSample scene;
  scene.camera = camera;
  for (const KittiLabelRecord& record : records) {
    if (!usable_for_loss(record)) continue;
    const Box3D box = to_ground_frame(record);
    bool visible = true;
    for (const GroundPoint2& p : bottom_points(box)) {
      if (camera_depth(camera, p) <= kDepthEpsilon) {
        visible = false;
        break;
      }
    }
    if (!visible) continue;
    scene.gt_boxes.push_back(box);
  }
  scene.pred_boxes = scene.gt_boxes;
  return scene;
}

BboxConsistency bbox_consistency(std::span<const KittiLabelRecord> records,
                                 const CameraModel& camera, double margin_px) {
  BboxConsistency stats;
  for (const KittiLabelRecord& r : records) {
    if (r.type != "Car" || r.occluded != 0 || r.truncated > 0.15) continue;
    if (r.bbox[3] - r.bbox[1] < 40.0) continue;  // easy difficulty cut
    ++stats.checked;
    const BottomPoints points = bottom_points(to_ground_frame(r));
    bool inside = true;
    for (int k = 1; k < 5 && inside; ++k) {
      const auto px = project_point(camera, points[k]);
      if (!px || px->u < r.bbox[0] - margin_px ||
          px->u > r.bbox[2] + margin_px || px->v < r.bbox[1] - margin_px ||
          px->v > r.bbox[3] + margin_px) {
        inside = false;
      }
    }
    if (inside) ++stats.inside;
  }
  return stats;
}

}  // namespace bevloss::kitti
