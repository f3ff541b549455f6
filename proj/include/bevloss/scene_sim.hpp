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
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bevloss/loss.hpp"

namespace bevloss {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimRange {
  std::array<double, 2> length{3.2, 4.8};
  std::array<double, 2> width{1.5, 2.0};
  std::array<double, 2> height{1.3, 1.8};
};

struct SceneGenParams {
  std::array<int, 2> n_boxes{2, 8};
  std::array<double, 2> depth_range{8.0, 40.0};     // ground forward, meters
  std::array<double, 2> lateral_range{-12.0, 12.0};
  std::array<double, 2> yaw_range{-3.14159265358979, 3.14159265358979};
  std::vector<DimRange> dims_per_class{DimRange{}};
  CameraModel camera = ground_camera(721.5, 721.5, 621.0, 187.5, 1.65);
  double image_width = 1242.0;
  double image_height = 375.0;
  double image_margin = 4.0;   // pixels kept clear of the border
  int max_attempts = 20000;
  std::uint64_t seed = 0;
};

void validate(const SceneGenParams& params);

/// Deterministic rejection sampler: boxes never overlap in BEV and all bottom
/// points project inside the image rectangle. Throws GenerationError when the
/// attempt budget runs out.
SceneSample generate_scene(const SceneGenParams& params);

struct NoiseModel {
  double sigma_base = 0.0;          // meters
  double sigma_per_meter = 0.0;     // meters of noise per meter of depth
  Eigen::Vector2d bias_base = Eigen::Vector2d::Zero();  // systematic offset
  double bias_forward_per_meter = 0.0;  // depth-proportional forward offset
  double sigma_yaw = 0.0;           // radians
  double sigma_dims = 0.0;          // meters, on length and width
  bool component_mode = false;      // perturb (center px, depth) instead of BEV
  double sigma_center_px = 0.0;     // pixel noise in component mode
};

/// Adds per-object Gaussian noise with std sigma_base + sigma_per_meter*depth
/// plus the systematic bias. In component mode the projected center and the
/// depth are perturbed separately and the box center is re-backprojected.
SceneSample perturb(const SceneSample& scene, const NoiseModel& noise,
                    std::uint64_t seed);

struct Proposal {
  Box3D box;
  double score = 0.0;  // pseudo classification score in [0, 1]
  double iou = 0.0;    // BEV IoU against the ground truth
};

struct ProposalSet {
  std::vector<std::vector<Proposal>> per_object;  // [object][candidate]
};

/// k perturbed candidates per object with scores correlated to quality.
ProposalSet make_proposals(const SceneSample& scene, const NoiseModel& noise,
                           int k, std::uint64_t seed);

enum class SelectionPolicy { highest_score, highest_iou, average };

/// Picks (or averages, with circular-mean yaw) one representative candidate
/// per object.
SceneSample select_representative(const SceneSample& scene,
                                  const ProposalSet& proposals,
                                  SelectionPolicy policy);

struct OptimSpec {
  LossConfig loss;
  int steps = 300;
  double step_size = 1.0;
  double step_decay = 1.0;           // per-step multiplier on the step size
  bool optimize_components = false;  // descend on (center px, depth) instead
                                     // of BEV coordinates
};

struct OptimRun {
  OptimSpec spec;
  std::vector<double> loss_trace;       // one entry per step
  std::vector<double> initial_errors;   // per-object BEV center error
  std::vector<double> final_errors;
  SceneSample final_scene;
  bool diverged = false;
  int skipped_steps = 0;  // steps whose homography term was skipped
};

/// Plain gradient descent on the predicted positions under total_loss. Never
/// mutates the ground truth; deterministic for fixed inputs.
OptimRun optimize(const SceneSample& scene, const OptimSpec& spec);

}  // namespace bevloss
