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

#include "bevloss/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "bevloss/metrics.hpp"

namespace bevloss {

namespace {

// Pseudo classification score shape: quality-correlated but imperfect.
constexpr double kScoreAlpha = 1.0;
constexpr double kScoreNoiseSigma = 0.05;

// Inflation applied during rejection sampling so accepted boxes keep a small
// clearance and the IoU-zero post-check is safe against rounding.
constexpr double kSeparationInflation = 1.05;

// Depths are clamped here after component-mode noise; a prediction at the
// camera plane has no usable BEV position.
constexpr double kMinPerturbedDepth = 0.1;

bool inside_image(const SceneGenParams& params, const ImagePoint2& px) {
  return px.u >= params.image_margin &&
         px.u <= params.image_width - params.image_margin &&
         px.v >= params.image_margin &&
         px.v <= params.image_height - params.image_margin;
}

bool box_visible(const SceneGenParams& params, const Box3D& box) {
  for (const GroundPoint2& p : bottom_points(box)) {
    const auto px = project_point(params.camera, p);
    if (!px || !inside_image(params, *px)) return false;
  }
  return true;
}

Box3D inflated(const Box3D& box) {
  Box3D big = box;
  big.length *= kSeparationInflation;
  big.width *= kSeparationInflation;
  return big;
}

}  // namespace

void validate(const SceneGenParams& params) {
  if (params.n_boxes[0] < 1 || params.n_boxes[1] < params.n_boxes[0]) {
    throw std::invalid_argument("scene gen: box count range must be >= 1");
  }
  if (params.depth_range[1] < params.depth_range[0] ||
      params.lateral_range[1] < params.lateral_range[0] ||
      params.yaw_range[1] < params.yaw_range[0]) {
    throw std::invalid_argument("scene gen: empty sampling range");
  }
  if (params.dims_per_class.empty()) {
    throw std::invalid_argument("scene gen: needs at least one dim range");
  }
  if (!is_valid(params.camera)) {
    throw std::invalid_argument("scene gen: invalid camera");
  }
  if (params.max_attempts < 1) {
    throw std::invalid_argument("scene gen: max_attempts must be >= 1");
  }
}

SceneSample generate_scene(const SceneGenParams& params) {
  validate(params);
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<int> count_dist(params.n_boxes[0],
                                                params.n_boxes[1]);
  std::uniform_int_distribution<int> class_dist(
      0, static_cast<int>(params.dims_per_class.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto sample_range = [&](const std::array<double, 2>& range) {
    return range[0] + (range[1] - range[0]) * unit(rng);
  };

  SceneSample scene;
  scene.camera = params.camera;
  const int target = count_dist(rng);
  int attempts = 0;
  while (static_cast<int>(scene.gt_boxes.size()) < target) {
    if (++attempts > params.max_attempts) {
      throw GenerationError("scene generation: attempt budget exhausted");
    }
    Box3D box;
    box.class_id = class_dist(rng);
    const DimRange& dims = params.dims_per_class[box.class_id];
    box.length = sample_range(dims.length);
    box.width = sample_range(dims.width);
    box.height = sample_range(dims.height);
    box.yaw = normalize_angle(sample_range(params.yaw_range));
    box.center_x = sample_range(params.lateral_range);
    box.center_y = sample_range(params.depth_range);
    if (!box_visible(params, box)) continue;
    bool overlaps = false;
    for (const Box3D& other : scene.gt_boxes) {
      if (rotated_bev_iou(inflated(box), inflated(other)) > 0.0) {
        overlaps = true;
        break;
      }
    }
    if (overlaps) continue;
    scene.gt_boxes.push_back(box);
  }
  scene.pred_boxes = scene.gt_boxes;
  return scene;
}

SceneSample perturb(const SceneSample& scene, const NoiseModel& noise,
                    std::uint64_t seed) {
  validate(scene);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SceneSample out = scene;
  out.pred_boxes = scene.gt_boxes;
  out.pred_components.clear();
  for (std::size_t i = 0; i < scene.gt_boxes.size(); ++i) {
    const Box3D& gt = scene.gt_boxes[i];
    const GroundPoint2 center{gt.center_x, gt.center_y};
    const double depth = camera_depth(scene.camera, center);
    const double sigma = noise.sigma_base + noise.sigma_per_meter * depth;
    const Eigen::Vector2d bias =
        noise.bias_base +
        Eigen::Vector2d(0.0, noise.bias_forward_per_meter * depth);

    if (noise.component_mode) {
      const auto px = project_point(scene.camera, center);
      const double du = noise.sigma_center_px * gauss(rng);
      const double dv = noise.sigma_center_px * gauss(rng);
      const double dd = sigma * gauss(rng);
      ObjectComponents components;
      components.center_px = {px->u + du, px->v + dv};
      components.depth =
          std::max(depth + dd + bias.y(), kMinPerturbedDepth);
      const auto bev =
          backproject(scene.camera, components.center_px, components.depth);
      out.pred_boxes[i].center_x = bev->x;
      out.pred_boxes[i].center_y = bev->y;
      out.pred_components.push_back(components);
    } else {
      const double dx = sigma * gauss(rng);
      const double dy = sigma * gauss(rng);
      out.pred_boxes[i].center_x = gt.center_x + bias.x() + dx;
      out.pred_boxes[i].center_y = gt.center_y + bias.y() + dy;
    }
    if (noise.sigma_yaw > 0.0) {
      out.pred_boxes[i].yaw =
          normalize_angle(gt.yaw + noise.sigma_yaw * gauss(rng));
    }
    if (noise.sigma_dims > 0.0) {
      out.pred_boxes[i].length =
          std::max(gt.length + noise.sigma_dims * gauss(rng), 0.2);
      out.pred_boxes[i].width =
          std::max(gt.width + noise.sigma_dims * gauss(rng), 0.2);
    }
  }
  return out;
}

ProposalSet make_proposals(const SceneSample& scene, const NoiseModel& noise,
                           int k, std::uint64_t seed) {
  validate(scene);
  if (k < 1) throw std::invalid_argument("proposals: k must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ProposalSet proposals;
  proposals.per_object.resize(scene.gt_boxes.size());
  for (std::size_t i = 0; i < scene.gt_boxes.size(); ++i) {
    const Box3D& gt = scene.gt_boxes[i];
    const GroundPoint2 center{gt.center_x, gt.center_y};
    const double depth = camera_depth(scene.camera, center);
    const double sigma = noise.sigma_base + noise.sigma_per_meter * depth;
    for (int c = 0; c < k; ++c) {
      Proposal proposal;
      proposal.box = gt;
      const double dx = sigma * gauss(rng);
      const double dy = sigma * gauss(rng);
      proposal.box.center_x += dx;
      proposal.box.center_y += dy;
      const double offset = std::hypot(dx, dy);
      const double raw_score = std::exp(-kScoreAlpha * offset) +
                               kScoreNoiseSigma * gauss(rng);
      proposal.score = std::clamp(raw_score, 0.0, 1.0);
      proposal.iou = rotated_bev_iou(proposal.box, gt);
      proposals.per_object[i].push_back(proposal);
    }
  }
  return proposals;
}

SceneSample select_representative(const SceneSample& scene,
                                  const ProposalSet& proposals,
                                  SelectionPolicy policy) {
  if (proposals.per_object.size() != scene.gt_boxes.size()) {
    throw std::invalid_argument("proposals: object count mismatch");
  }
  SceneSample out = scene;
  out.pred_boxes.clear();
  for (const auto& candidates : proposals.per_object) {
    if (candidates.empty()) {
      throw std::invalid_argument("proposals: empty candidate list");
    }
    if (policy == SelectionPolicy::average) {
      Box3D mean = candidates.front().box;
      double sx = 0.0, sy = 0.0, sl = 0.0, sw = 0.0, sh = 0.0;
      double yaw_sin = 0.0, yaw_cos = 0.0;
      for (const Proposal& p : candidates) {
        sx += p.box.center_x;
        sy += p.box.center_y;
        sl += p.box.length;
        sw += p.box.width;
        sh += p.box.height;
        yaw_sin += std::sin(p.box.yaw);
        yaw_cos += std::cos(p.box.yaw);
      }
      const double inv = 1.0 / static_cast<double>(candidates.size());
      mean.center_x = sx * inv;
      mean.center_y = sy * inv;
      mean.length = sl * inv;
      mean.width = sw * inv;
      mean.height = sh * inv;
      mean.yaw = normalize_angle(std::atan2(yaw_sin, yaw_cos));
      out.pred_boxes.push_back(mean);
    } else {
      std::size_t best = 0;
      for (std::size_t c = 1; c < candidates.size(); ++c) {
        const double lhs = policy == SelectionPolicy::highest_score
                               ? candidates[c].score
                               : candidates[c].iou;
        const double rhs = policy == SelectionPolicy::highest_score
                               ? candidates[best].score
                               : candidates[best].iou;
        if (lhs > rhs) best = c;
      }
      out.pred_boxes.push_back(candidates[best].box);
    }
  }
  return out;
}

OptimRun optimize(const SceneSample& scene, const OptimSpec& spec) {
  validate(scene);
  validate(spec.loss);
  if (spec.steps < 0) throw std::invalid_argument("optimize: negative steps");
  const std::size_t n = scene.gt_boxes.size();
  const bool components = spec.optimize_components &&
                          scene.pred_components.size() == n;

  OptimRun run;
  run.spec = spec;
  run.final_scene = scene;
  run.loss_trace.reserve(spec.steps);
  run.initial_errors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    run.initial_errors.push_back(
        std::hypot(scene.pred_boxes[i].center_x - scene.gt_boxes[i].center_x,
                   scene.pred_boxes[i].center_y - scene.gt_boxes[i].center_y));
  }

  SceneSample current = scene;
  double step_size = spec.step_size;
  for (int step = 0; step < spec.steps; ++step) {
    const LossReport report = total_loss(current, spec.loss, step);
    run.loss_trace.push_back(report.value);
    if (!std::isfinite(report.value)) {
      run.diverged = true;
      // Keep the trace-length contract: the remaining steps never run.
      run.loss_trace.resize(spec.steps, report.value);
      break;
    }
    if (report.skipped_variants > 0) ++run.skipped_steps;

    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector2d d_bev = Eigen::Vector2d::Zero();
      for (int k = 0; k < 5; ++k) d_bev += report.d_points[i][k];
      if (components) {
        ObjectComponents& comp = current.pred_components[i];
        const Eigen::Matrix<double, 2, 3> jac =
            backproject_jacobian(current.camera, comp.center_px, comp.depth);
        Eigen::Vector3d d_comp = jac.transpose() * d_bev;
        if (!report.d_center_px.empty()) {
          d_comp.head<2>() += report.d_center_px[i];
          d_comp(2) += report.d_depth[i];
        }
        comp.center_px.u -= step_size * d_comp(0);
        comp.center_px.v -= step_size * d_comp(1);
        comp.depth =
            std::max(comp.depth - step_size * d_comp(2), kMinPerturbedDepth);
        const auto bev =
            backproject(current.camera, comp.center_px, comp.depth);
        current.pred_boxes[i].center_x = bev->x;
        current.pred_boxes[i].center_y = bev->y;
      } else {
        current.pred_boxes[i].center_x -= step_size * d_bev.x();
        current.pred_boxes[i].center_y -= step_size * d_bev.y();
      }
    }
    bool finite = true;
    for (const Box3D& box : current.pred_boxes) {
      if (!std::isfinite(box.center_x) || !std::isfinite(box.center_y)) {
        finite = false;
      }
    }
    if (!finite) {
      run.diverged = true;
      run.loss_trace.resize(spec.steps,
                            std::numeric_limits<double>::quiet_NaN());
      break;
    }
    step_size *= spec.step_decay;
  }

  run.final_errors.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double err =
        std::hypot(current.pred_boxes[i].center_x - scene.gt_boxes[i].center_x,
                   current.pred_boxes[i].center_y - scene.gt_boxes[i].center_y);
    run.final_errors.push_back(std::isfinite(err)
                                   ? err
                                   : std::numeric_limits<double>::infinity());
  }
  run.final_scene = current;
  return run;
}

}  // namespace bevloss
