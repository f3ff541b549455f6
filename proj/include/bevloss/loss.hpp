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
#include <vector>

#include <Eigen/Core>

#include "bevloss/geometry.hpp"
#include "bevloss/homography.hpp"

namespace bevloss {

/// Residuals at or below this magnitude contribute no L1 sign gradient;
/// without the dead band, float dust next to the kink would produce
/// full-magnitude gradients and fixed-step descent could never sit at the
/// target.
inline constexpr double kL1DeadbandEpsilon = 1e-12;

/// Correspondence direction for the homography loss. Type 1 pairs ground-truth
/// image points with predicted BEV points; Type 2 pairs predicted image points
/// with ground-truth BEV points.
enum class LossMode { type1, type2 };

struct LossConfig {
  LossMode mode = LossMode::type1;
  double beta = 1.0;          // SmoothL1 transition threshold, meters
  double lambda_homo = 0.2;
  double lambda_reg = 2.0;
  int warmup_steps = 0;       // steps before the homography term activates
  bool replicate = false;     // use the three-variant ensembled loss
};

void validate(const LossConfig& config);

/// Predicted image-plane center and camera depth of one object, the two
/// components the replicated loss recombines with their ground truths.
struct ObjectComponents {
  ImagePoint2 center_px;
  double depth = 0.0;
};

/// One image-worth of boxes plus the camera. Predicted boxes are aligned
/// index-by-index with the ground truth.
struct SceneSample {
  CameraModel camera;
  std::vector<Box3D> gt_boxes;
  std::vector<Box3D> pred_boxes;
  /// Optional (empty or one per object): predicted components for the
  /// replicated loss.
  std::vector<ObjectComponents> pred_components;
  /// Optional override of the regression supervision; the homography loss
  /// always sees the true ground truth.
  std::vector<Box3D> regression_targets;
};

void validate(const SceneSample& scene);

/// Bottom-point expansion of a scene; the differentiable quantities of every
/// loss are the predicted BEV bottom-point coordinates.
struct ScenePoints {
  CameraModel camera;
  std::vector<BottomPoints> gt;
  std::vector<BottomPoints> pred;
  std::vector<BottomPoints> reg_target;  // same as gt unless overridden
};

ScenePoints scene_points(const SceneSample& scene);

enum class SkipReason {
  none,
  degenerate_configuration,
  ill_conditioned_gradient,
  vanishing_scale,
  non_positive_depth,
};

const char* to_string(SkipReason reason);

struct LossReport {
  double value = 0.0;
  bool skipped = false;
  SkipReason reason = SkipReason::none;
  /// Per bottom point (object-major, 5 per object).
  std::vector<Eigen::Vector2d> residuals;
  /// Gradient wrt each predicted BEV bottom point.
  std::vector<std::array<Eigen::Vector2d, 5>> d_points;
  /// Gradients wrt the predicted components (replicated loss only).
  std::vector<Eigen::Vector2d> d_center_px;
  std::vector<double> d_depth;
  int excluded_points = 0;   // behind-camera points dropped by projection_loss
  int skipped_variants = 0;  // replicated variants (or the single homography
                             // term inside total_loss) that were skipped
};

/// 0.5 r^2 / beta below the threshold, |r| - beta/2 above; C1 at |r| = beta.
double smooth_l1(double residual, double beta);
double smooth_l1_grad(double residual, double beta);

/// Mean absolute coordinate error over all bottom points (L1).
LossReport regression_loss(const ScenePoints& points);
LossReport regression_loss(const SceneSample& scene);

/// SmoothL1 on pixel residuals of independently projected bottom points; no
/// coupling between objects.
LossReport projection_loss(const ScenePoints& points, double beta = 1.0);
LossReport projection_loss(const SceneSample& scene, double beta = 1.0);

/// The homography loss: estimates one image<->BEV homography per scene from
/// all candidate pairs and penalizes SmoothL1(gt BEV - mapped points).
/// Degenerate scenes come back with skipped=true.
LossReport homography_loss(const ScenePoints& points, const LossConfig& config);
LossReport homography_loss(const SceneSample& scene, const LossConfig& config);

/// Three homography losses built from (center, depth) component combinations
/// (pred+pred, pred+gt, gt+pred), summed over the non-skipped variants.
LossReport replicated_homography_loss(const SceneSample& scene,
                                      const LossConfig& config);

/// (lambda_reg * L_reg + lambda_homo * L_homo) / N, with the homography term
/// present only once `step` reaches the warmup and lambda_homo > 0. The gate
/// short-circuits: no homography machinery runs while it is closed.
LossReport total_loss(const ScenePoints& points, const LossConfig& config,
                      int step);
LossReport total_loss(const SceneSample& scene, const LossConfig& config,
                      int step);

}  // namespace bevloss
