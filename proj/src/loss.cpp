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

#include "bevloss/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace bevloss {

void validate(const LossConfig& config) {
  if (!(config.beta > 0.0)) {
    throw std::invalid_argument("loss config: beta must be positive");
  }
  if (config.lambda_homo < 0.0 || config.lambda_reg < 0.0) {
    throw std::invalid_argument("loss config: weights must be non-negative");
  }
  if (config.warmup_steps < 0) {
    throw std::invalid_argument("loss config: warmup_steps must be >= 0");
  }
}

void validate(const SceneSample& scene) {
  const std::size_t n = scene.gt_boxes.size();
  if (n == 0) throw std::invalid_argument("scene: needs at least one object");
  if (scene.pred_boxes.size() != n) {
    throw std::invalid_argument("scene: pred/gt box count mismatch");
  }
  if (!scene.pred_components.empty() && scene.pred_components.size() != n) {
    throw std::invalid_argument("scene: component count mismatch");
  }
  if (!scene.regression_targets.empty() &&
      scene.regression_targets.size() != n) {
    throw std::invalid_argument("scene: regression target count mismatch");
  }
  for (const Box3D& box : scene.gt_boxes) {
    if (!is_valid(box)) throw std::invalid_argument("scene: invalid gt box");
    for (const GroundPoint2& p : bottom_points(box)) {
      if (camera_depth(scene.camera, p) <= kDepthEpsilon) {
        throw std::invalid_argument("scene: gt box behind the camera");
      }
    }
  }
  for (const Box3D& box : scene.pred_boxes) {
    if (!is_valid(box)) throw std::invalid_argument("scene: invalid pred box");
  }
}

ScenePoints scene_points(const SceneSample& scene) {
  ScenePoints out;
  out.camera = scene.camera;
  out.gt.reserve(scene.gt_boxes.size());
  out.pred.reserve(scene.pred_boxes.size());
  for (const Box3D& box : scene.gt_boxes) out.gt.push_back(bottom_points(box));
  for (const Box3D& box : scene.pred_boxes) {
    out.pred.push_back(bottom_points(box));
  }
  const std::vector<Box3D>& targets = scene.regression_targets.empty()
                                          ? scene.gt_boxes
                                          : scene.regression_targets;
  out.reg_target.reserve(targets.size());
  for (const Box3D& box : targets) out.reg_target.push_back(bottom_points(box));
  return out;
}

const char* to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::none:
      return "none";
    case SkipReason::degenerate_configuration:
      return "degenerate configuration";
    case SkipReason::ill_conditioned_gradient:
      return "ill-conditioned gradient";
    case SkipReason::vanishing_scale:
      return "vanishing homogeneous scale";
    case SkipReason::non_positive_depth:
      return "non-positive depth";
  }
  return "unknown";
}

double smooth_l1(double residual, double beta) {
  const double a = std::abs(residual);
  return a < beta ? 0.5 * residual * residual / beta : a - 0.5 * beta;
}

double smooth_l1_grad(double residual, double beta) {
  const double a = std::abs(residual);
  if (a < beta) return residual / beta;
  return residual > 0.0 ? 1.0 : -1.0;
}

namespace {

LossReport skipped_report(SkipReason reason) {
  LossReport report;
  report.skipped = true;
  report.reason = reason;
  return report;
}

std::vector<std::array<Eigen::Vector2d, 5>> zero_gradients(std::size_t n) {
  return std::vector<std::array<Eigen::Vector2d, 5>>(
      n, {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
          Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
          Eigen::Vector2d::Zero()});
}

SkipReason from_estimate_error(EstimateError error) {
  return error == EstimateError::degenerate_configuration
             ? SkipReason::degenerate_configuration
             : SkipReason::ill_conditioned_gradient;
}

bool has_duplicate_sources(const std::vector<Eigen::Vector2d>& sources) {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j = i + 1; j < sources.size(); ++j) {
      if ((sources[i] - sources[j]).norm() < kDuplicatePointEpsilon) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

LossReport regression_loss(const ScenePoints& points) {
  const std::size_t n = points.pred.size();
  LossReport report;
  report.d_points = zero_gradients(n);
  report.residuals.reserve(5 * n);
  const double inv_count = 1.0 / (10.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) {
      const Eigen::Vector2d residual =
          points.reg_target[i][k].vec() - points.pred[i][k].vec();
      report.residuals.push_back(residual);
      for (int c = 0; c < 2; ++c) {
        report.value += std::abs(residual(c)) * inv_count;
        if (residual(c) > kL1DeadbandEpsilon) {
          report.d_points[i][k](c) = -inv_count;
        } else if (residual(c) < -kL1DeadbandEpsilon) {
          report.d_points[i][k](c) = inv_count;
        }
      }
    }
  }
  return report;
}

LossReport regression_loss(const SceneSample& scene) {
  validate(scene);
  return regression_loss(scene_points(scene));
}

LossReport projection_loss(const ScenePoints& points, double beta) {
  const std::size_t n = points.pred.size();
  LossReport report;
  report.d_points = zero_gradients(n);
  report.residuals.assign(5 * n, Eigen::Vector2d::Zero());

  struct Term {
    std::size_t object;
    int corner;
    Eigen::Vector2d residual;
    Eigen::Matrix2d jacobian;
  };
  std::vector<Term> terms;
  terms.reserve(5 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) {
      const auto gt_px = project_point(points.camera, points.gt[i][k]);
      const auto pred_px = project_point(points.camera, points.pred[i][k]);
      if (!gt_px || !pred_px) {
        ++report.excluded_points;
        continue;
      }
      Term term;
      term.object = i;
      term.corner = k;
      term.residual = gt_px->vec() - pred_px->vec();
      term.jacobian = project_jacobian(points.camera, points.pred[i][k]);
      report.residuals[5 * i + k] = term.residual;
      terms.push_back(term);
    }
  }
  if (terms.empty()) return skipped_report(SkipReason::non_positive_depth);

  const double inv_count = 1.0 / static_cast<double>(terms.size());
  for (const Term& term : terms) {
    Eigen::Vector2d d_px;
    for (int c = 0; c < 2; ++c) {
      report.value += smooth_l1(term.residual(c), beta) * inv_count;
      d_px(c) = -smooth_l1_grad(term.residual(c), beta) * inv_count;
    }
    report.d_points[term.object][term.corner] +=
        term.jacobian.transpose() * d_px;
  }
  return report;
}

LossReport projection_loss(const SceneSample& scene, double beta) {
  validate(scene);
  return projection_loss(scene_points(scene), beta);
}

LossReport homography_loss(const ScenePoints& points,
                           const LossConfig& config) {
  validate(config);
  const std::size_t n = points.pred.size();
  PointCorrespondenceSet pairs;
  pairs.sources.reserve(5 * n);
  pairs.targets.reserve(5 * n);

  // Pixel-side Jacobians, only needed for Type 2 where the image points are
  // themselves functions of the predicted BEV positions.
  std::vector<Eigen::Matrix2d> pixel_jacobians;

  if (config.mode == LossMode::type1) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 5; ++k) {
        const auto gt_px = project_point(points.camera, points.gt[i][k]);
        if (!gt_px) return skipped_report(SkipReason::non_positive_depth);
        pairs.sources.push_back(gt_px->vec());
        pairs.targets.push_back(points.pred[i][k].vec());
      }
    }
  } else {
    pixel_jacobians.reserve(5 * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 5; ++k) {
        const auto pred_px = project_point(points.camera, points.pred[i][k]);
        if (!pred_px) return skipped_report(SkipReason::non_positive_depth);
        pairs.sources.push_back(pred_px->vec());
        pairs.targets.push_back(points.gt[i][k].vec());
        pixel_jacobians.push_back(
            project_jacobian(points.camera, points.pred[i][k]));
      }
    }
  }
  if (has_duplicate_sources(pairs.sources)) {
    return skipped_report(SkipReason::degenerate_configuration);
  }

  const SolveResult solved = solve_dlt(pairs);
  if (!solved.ok) return skipped_report(from_estimate_error(solved.error));
  const Homography3x3& h = solved.solve.h;

  LossReport report;
  report.residuals.reserve(5 * n);
  const double inv_count = 1.0 / static_cast<double>(5 * n);
  Eigen::Matrix3d d_h = Eigen::Matrix3d::Zero();
  std::vector<Eigen::Vector2d> d_source_direct(5 * n, Eigen::Vector2d::Zero());
  try {
    for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
      const std::size_t i = idx / 5;
      const int k = static_cast<int>(idx % 5);
      const Eigen::Vector2d mapped = apply_homography(h, pairs.sources[idx]);
      const Eigen::Vector2d reference = points.gt[i][k].vec();
      const Eigen::Vector2d residual = reference - mapped;
      report.residuals.push_back(residual);
      Eigen::Vector2d d_mapped;
      for (int c = 0; c < 2; ++c) {
        report.value += smooth_l1(residual(c), config.beta) * inv_count;
        d_mapped(c) = -smooth_l1_grad(residual(c), config.beta) * inv_count;
      }
      apply_homography_backward(
          h, pairs.sources[idx], d_mapped, &d_h,
          config.mode == LossMode::type2 ? &d_source_direct[idx] : nullptr);
    }
  } catch (const std::domain_error&) {
    return skipped_report(SkipReason::vanishing_scale);
  }

  const HomographyGradients grads = dlt_backward(solved.solve, d_h);
  if (!grads.ok) return skipped_report(from_estimate_error(grads.error));

  report.d_points = zero_gradients(n);
  for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
    const std::size_t i = idx / 5;
    const int k = static_cast<int>(idx % 5);
    if (config.mode == LossMode::type1) {
      // Gradients reach the predicted BEV points only through the estimate.
      report.d_points[i][k] = grads.d_targets[idx];
    } else {
      const Eigen::Vector2d d_pixel =
          d_source_direct[idx] + grads.d_sources[idx];
      report.d_points[i][k] = pixel_jacobians[idx].transpose() * d_pixel;
    }
  }
  return report;
}

LossReport homography_loss(const SceneSample& scene, const LossConfig& config) {
  validate(scene);
  return homography_loss(scene_points(scene), config);
}

LossReport replicated_homography_loss(const SceneSample& scene,
                                      const LossConfig& config) {
  validate(scene);
  validate(config);
  const std::size_t n = scene.gt_boxes.size();
  if (scene.pred_components.size() != n) {
    throw std::invalid_argument(
        "replicated loss: scene carries no predicted components");
  }

  std::vector<ObjectComponents> gt_components(n);
  for (std::size_t i = 0; i < n; ++i) {
    const GroundPoint2 center{scene.gt_boxes[i].center_x,
                              scene.gt_boxes[i].center_y};
    const auto px = project_point(scene.camera, center);
    if (!px) return skipped_report(SkipReason::non_positive_depth);
    gt_components[i] = {*px, camera_depth(scene.camera, center)};
  }

  LossReport report;
  report.d_points = zero_gradients(n);
  report.d_center_px.assign(n, Eigen::Vector2d::Zero());
  report.d_depth.assign(n, 0.0);

  // Variant order: (pred, pred), (pred, gt), (gt, pred).
  struct Variant {
    bool pred_center;
    bool pred_depth;
  };
  constexpr Variant variants[3] = {{true, true}, {true, false}, {false, true}};

  int used = 0;
  for (const Variant& variant : variants) {
    ScenePoints points;
    points.camera = scene.camera;
    points.gt.reserve(n);
    points.pred.reserve(n);
    std::vector<Eigen::Matrix<double, 2, 3>> bp_jacobians(n);
    bool variant_ok = true;
    for (std::size_t i = 0; i < n && variant_ok; ++i) {
      const ImagePoint2 center_px = variant.pred_center
                                        ? scene.pred_components[i].center_px
                                        : gt_components[i].center_px;
      const double depth = variant.pred_depth ? scene.pred_components[i].depth
                                              : gt_components[i].depth;
      const auto center = backproject(scene.camera, center_px, depth);
      if (!center) {
        variant_ok = false;
        break;
      }
      Box3D box = scene.pred_boxes[i];
      box.center_x = center->x;
      box.center_y = center->y;
      points.gt.push_back(bottom_points(scene.gt_boxes[i]));
      points.pred.push_back(bottom_points(box));
      bp_jacobians[i] = backproject_jacobian(scene.camera, center_px, depth);
    }
    if (!variant_ok) {
      ++report.skipped_variants;
      continue;
    }

    const LossReport variant_report = homography_loss(points, config);
    if (variant_report.skipped) {
      ++report.skipped_variants;
      continue;
    }
    ++used;
    report.value += variant_report.value;
    report.residuals.insert(report.residuals.end(),
                            variant_report.residuals.begin(),
                            variant_report.residuals.end());
    for (std::size_t i = 0; i < n; ++i) {
      // The five bottom points translate rigidly with the reconstructed
      // center, so their gradients sum into the center gradient.
      Eigen::Vector2d d_center = Eigen::Vector2d::Zero();
      for (int k = 0; k < 5; ++k) d_center += variant_report.d_points[i][k];
      const Eigen::Vector3d d_components =
          bp_jacobians[i].transpose() * d_center;
      if (variant.pred_center) {
        report.d_center_px[i] += d_components.head<2>();
      }
      if (variant.pred_depth) report.d_depth[i] += d_components(2);
    }
  }

  if (used == 0) {
    LossReport out = skipped_report(SkipReason::degenerate_configuration);
    out.skipped_variants = report.skipped_variants;
    return out;
  }
  return report;
}

LossReport total_loss(const ScenePoints& points, const LossConfig& config,
                      int step) {
  validate(config);
  const std::size_t n = points.pred.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  const LossReport reg = regression_loss(points);
  LossReport report;
  report.value = config.lambda_reg * reg.value * inv_n;
  report.d_points = zero_gradients(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) {
      report.d_points[i][k] = config.lambda_reg * inv_n * reg.d_points[i][k];
    }
  }

  const bool gate_open =
      config.lambda_homo > 0.0 && step >= config.warmup_steps;
  if (gate_open) {
    const LossReport homo = homography_loss(points, config);
    if (homo.skipped) {
      report.skipped_variants = 1;
    } else {
      report.value += config.lambda_homo * homo.value * inv_n;
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 5; ++k) {
          report.d_points[i][k] +=
              config.lambda_homo * inv_n * homo.d_points[i][k];
        }
      }
    }
  }
  return report;
}

LossReport total_loss(const SceneSample& scene, const LossConfig& config,
                      int step) {
  validate(scene);
  validate(config);
  const std::size_t n = scene.gt_boxes.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  const bool gate_open =
      config.lambda_homo > 0.0 && step >= config.warmup_steps;
  const bool replicated =
      config.replicate && scene.pred_components.size() == n;
  if (!gate_open || !replicated) {
    return total_loss(scene_points(scene), config, step);
  }

  const LossReport reg = regression_loss(scene_points(scene));
  LossReport report;
  report.value = config.lambda_reg * reg.value * inv_n;
  report.d_points = zero_gradients(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 5; ++k) {
      report.d_points[i][k] = config.lambda_reg * inv_n * reg.d_points[i][k];
    }
  }
  const LossReport homo = replicated_homography_loss(scene, config);
  report.skipped_variants = homo.skipped_variants;
  report.d_center_px.assign(n, Eigen::Vector2d::Zero());
  report.d_depth.assign(n, 0.0);
  if (!homo.skipped) {
    report.value += config.lambda_homo * homo.value * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      report.d_center_px[i] = config.lambda_homo * inv_n * homo.d_center_px[i];
      report.d_depth[i] = config.lambda_homo * inv_n * homo.d_depth[i];
    }
  }
  return report;
}

}  // namespace bevloss
