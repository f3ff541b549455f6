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

#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "bevloss/metrics.hpp"
#include "bevloss/scene_sim.hpp"

using namespace bevloss;

namespace {

bool same_boxes(const std::vector<Box3D>& a, const std::vector<Box3D>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].center_x != b[i].center_x || a[i].center_y != b[i].center_y ||
        a[i].yaw != b[i].yaw || a[i].length != b[i].length ||
        a[i].width != b[i].width || a[i].height != b[i].height ||
        a[i].class_id != b[i].class_id) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("generate_scene: deterministic for a fixed seed") {
  SceneGenParams params;
  params.seed = 99;
  const SceneSample a = generate_scene(params);
  const SceneSample b = generate_scene(params);
  CHECK(same_boxes(a.gt_boxes, b.gt_boxes));

  params.seed = 100;
  const SceneSample c = generate_scene(params);
  CHECK(!same_boxes(a.gt_boxes, c.gt_boxes));
}

TEST_CASE("generate_scene: rejects an invalid box count range") {
  SceneGenParams params;
  params.n_boxes = {0, 3};
  CHECK_THROWS_AS(generate_scene(params), std::invalid_argument);
  params.n_boxes = {4, 2};
  CHECK_THROWS_AS(generate_scene(params), std::invalid_argument);
}

TEST_CASE("generate_scene: sampled scenes honor every constraint") {
  SceneGenParams params;
  params.n_boxes = {2, 6};
  int boxes_checked = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    params.seed = seed;
    const SceneSample scene = generate_scene(params);
    for (std::size_t i = 0; i < scene.gt_boxes.size(); ++i) {
      const Box3D& box = scene.gt_boxes[i];
      ++boxes_checked;
      CHECK(box.center_y >= params.depth_range[0]);
      CHECK(box.center_y <= params.depth_range[1]);
      for (const GroundPoint2& p : bottom_points(box)) {
        const auto px = project_point(params.camera, p);
        REQUIRE(px.has_value());
        CHECK(px->u >= params.image_margin);
        CHECK(px->u <= params.image_width - params.image_margin);
        CHECK(px->v >= params.image_margin);
        CHECK(px->v <= params.image_height - params.image_margin);
      }
      for (std::size_t j = i + 1; j < scene.gt_boxes.size(); ++j) {
        CHECK(rotated_bev_iou(box, scene.gt_boxes[j]) == 0.0);
      }
    }
  }
  CHECK(boxes_checked > 2000);
}

TEST_CASE("generate_scene: impossible layouts exhaust the attempt budget") {
  SceneGenParams params;
  params.n_boxes = {30, 30};
  params.depth_range = {10.0, 12.0};
  params.lateral_range = {-2.0, 2.0};
  params.max_attempts = 500;
  CHECK_THROWS_AS(generate_scene(params), GenerationError);
}

TEST_CASE("perturb: zero noise is the identity, fixed seed reproduces") {
  SceneGenParams params;
  params.seed = 7;
  const SceneSample scene = generate_scene(params);

  const SceneSample clean = perturb(scene, NoiseModel{}, 123);
  CHECK(same_boxes(clean.pred_boxes, scene.gt_boxes));

  NoiseModel noise;
  noise.sigma_base = 0.3;
  noise.sigma_per_meter = 0.05;
  const SceneSample a = perturb(scene, noise, 45);
  const SceneSample b = perturb(scene, noise, 45);
  CHECK(same_boxes(a.pred_boxes, b.pred_boxes));
  const SceneSample c = perturb(scene, noise, 46);
  CHECK(!same_boxes(a.pred_boxes, c.pred_boxes));
}

TEST_CASE("perturb: noise scale grows with depth as configured") {
  SceneGenParams params;
  params.n_boxes = {1, 1};
  params.depth_range = {8.0, 40.0};
  params.lateral_range = {-4.0, 4.0};

  NoiseModel noise;
  noise.sigma_base = 0.1;
  noise.sigma_per_meter = 0.04;

  // Depth bins [8,16), [16,24), [24,32), [32,40].
  std::array<std::vector<double>, 4> samples;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    params.seed = seed;
    const SceneSample scene = generate_scene(params);
    const SceneSample noisy = perturb(scene, noise, seed * 31 + 1);
    const Box3D& gt = scene.gt_boxes[0];
    const Box3D& pred = noisy.pred_boxes[0];
    const double depth =
        camera_depth(scene.camera, {gt.center_x, gt.center_y});
    const std::size_t bin = std::min<std::size_t>(
        3, static_cast<std::size_t>((depth - 8.0) / 8.0));
    samples[bin].push_back(pred.center_x - gt.center_x);
    samples[bin].push_back(pred.center_y - gt.center_y);
  }

  double previous = 0.0;
  for (std::size_t bin = 0; bin < 4; ++bin) {
    REQUIRE(samples[bin].size() > 800);
    double sq = 0.0;
    for (double d : samples[bin]) sq += d * d;
    const double std_dev = std::sqrt(sq / samples[bin].size());
    const double bin_center_depth = 8.0 + 8.0 * bin + 4.0;
    const double expected =
        noise.sigma_base + noise.sigma_per_meter * bin_center_depth;
    CHECK(std_dev > previous);  // monotone growth across bins
    CHECK(std::abs(std_dev - expected) / expected < 0.05);
    previous = std_dev;
  }
}

TEST_CASE("proposals: selection policies") {
  SceneGenParams params;
  params.seed = 17;
  params.n_boxes = {3, 5};
  const SceneSample scene = generate_scene(params);

  NoiseModel noise;
  noise.sigma_base = 0.4;

  SUBCASE("k = 1 makes every policy agree") {
    const ProposalSet proposals = make_proposals(scene, noise, 1, 5);
    const SceneSample by_score =
        select_representative(scene, proposals, SelectionPolicy::highest_score);
    const SceneSample by_iou =
        select_representative(scene, proposals, SelectionPolicy::highest_iou);
    const SceneSample by_mean =
        select_representative(scene, proposals, SelectionPolicy::average);
    CHECK(same_boxes(by_score.pred_boxes, by_iou.pred_boxes));
    CHECK(same_boxes(by_score.pred_boxes, by_mean.pred_boxes));
  }

  SUBCASE("strictly ordered scores pick the arg-max") {
    ProposalSet proposals = make_proposals(scene, noise, 4, 6);
    for (auto& candidates : proposals.per_object) {
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        candidates[c].score = 0.1 + 0.2 * static_cast<double>(c);
      }
    }
    const SceneSample picked =
        select_representative(scene, proposals, SelectionPolicy::highest_score);
    for (std::size_t i = 0; i < picked.pred_boxes.size(); ++i) {
      CHECK(picked.pred_boxes[i].center_x ==
            proposals.per_object[i].back().box.center_x);
    }
  }

  SUBCASE("average equals a brute-force mean with circular yaw") {
    const ProposalSet proposals = make_proposals(scene, noise, 5, 7);
    const SceneSample averaged =
        select_representative(scene, proposals, SelectionPolicy::average);
    for (std::size_t i = 0; i < averaged.pred_boxes.size(); ++i) {
      double sx = 0.0, sy = 0.0, ss = 0.0, sc = 0.0;
      for (const Proposal& p : proposals.per_object[i]) {
        sx += p.box.center_x;
        sy += p.box.center_y;
        ss += std::sin(p.box.yaw);
        sc += std::cos(p.box.yaw);
      }
      const double k = static_cast<double>(proposals.per_object[i].size());
      CHECK(averaged.pred_boxes[i].center_x ==
            doctest::Approx(sx / k).epsilon(1e-13));
      CHECK(averaged.pred_boxes[i].center_y ==
            doctest::Approx(sy / k).epsilon(1e-13));
      CHECK(averaged.pred_boxes[i].yaw ==
            doctest::Approx(normalize_angle(std::atan2(ss, sc)))
                .epsilon(1e-12));
    }
  }

  SUBCASE("scores stay within [0, 1] and correlate with IoU ranks") {
    const ProposalSet proposals = make_proposals(scene, noise, 8, 9);
    for (const auto& candidates : proposals.per_object) {
      for (const Proposal& p : candidates) {
        CHECK(p.score >= 0.0);
        CHECK(p.score <= 1.0);
        CHECK(p.iou >= 0.0);
        CHECK(p.iou <= 1.0);
      }
    }
  }
}

TEST_CASE("optimize: stationary at the truth") {
  SceneGenParams params;
  params.seed = 27;
  params.n_boxes = {3, 5};
  SceneSample scene = generate_scene(params);
  scene.pred_boxes = scene.gt_boxes;

  OptimSpec spec;
  spec.steps = 25;
  spec.step_size = 10.0;
  spec.loss.lambda_homo = 0.2;
  const OptimRun run = optimize(scene, spec);
  CHECK(!run.diverged);
  for (double err : run.final_errors) CHECK(err < 1e-9);
  for (double err : run.initial_errors) CHECK(err == 0.0);
}

TEST_CASE("optimize: regression-only descent reaches exact targets") {
  SceneGenParams params;
  params.seed = 28;
  params.n_boxes = {2, 4};
  SceneSample scene = generate_scene(params);
  NoiseModel noise;
  noise.sigma_base = 0.5;
  scene = perturb(scene, noise, 3);

  OptimSpec spec;
  spec.loss.lambda_homo = 0.0;
  spec.loss.lambda_reg = 2.0;
  spec.steps = 120;
  spec.step_decay = 0.5;
  // The L1 gradient per coordinate has magnitude lambda_reg / (10 N^2); a
  // halving schedule started above the initial error contracts onto the
  // target geometrically.
  const std::size_t n = scene.gt_boxes.size();
  spec.step_size =
      4.0 * 10.0 * static_cast<double>(n * n) / spec.loss.lambda_reg;

  const OptimRun run = optimize(scene, spec);
  CHECK(!run.diverged);
  for (double err : run.final_errors) CHECK(err < 1e-6);
}

TEST_CASE("optimize: lambda_homo = 0 matches a homography-free reference") {
  SceneGenParams params;
  params.seed = 29;
  params.n_boxes = {2, 5};
  SceneSample scene = generate_scene(params);
  NoiseModel noise;
  noise.sigma_base = 0.4;
  scene = perturb(scene, noise, 4);

  OptimSpec spec;
  spec.loss.lambda_homo = 0.0;
  spec.loss.lambda_reg = 2.0;
  spec.steps = 60;
  spec.step_size = 25.0;
  spec.step_decay = 0.9;
  const OptimRun run = optimize(scene, spec);

  // Reference harness: gradient descent that only ever touches the
  // regression loss, with the library's arithmetic order.
  SceneSample current = scene;
  const std::size_t n = scene.gt_boxes.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double step_size = spec.step_size;
  std::vector<double> trace;
  for (int step = 0; step < spec.steps; ++step) {
    const LossReport reg = regression_loss(scene_points(current));
    trace.push_back(spec.loss.lambda_reg * reg.value * inv_n);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      for (int k = 0; k < 5; ++k) {
        g += (spec.loss.lambda_reg * inv_n * reg.d_points[i][k]).eval();
      }
      current.pred_boxes[i].center_x -= step_size * g.x();
      current.pred_boxes[i].center_y -= step_size * g.y();
    }
    step_size *= spec.step_decay;
  }

  REQUIRE(run.loss_trace.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(run.loss_trace[i] == trace[i]);
  }
  CHECK(same_boxes(run.final_scene.pred_boxes, current.pred_boxes));
}

TEST_CASE("optimize: divergence is reported, never thrown away") {
  SceneGenParams params;
  params.seed = 31;
  params.n_boxes = {2, 3};
  SceneSample scene = generate_scene(params);
  NoiseModel noise;
  noise.sigma_base = 0.3;
  scene = perturb(scene, noise, 6);

  OptimSpec spec;
  spec.steps = 20;
  spec.step_size = std::numeric_limits<double>::infinity();
  const OptimRun run = optimize(scene, spec);
  CHECK(run.diverged);
  REQUIRE(run.loss_trace.size() == static_cast<std::size_t>(spec.steps));
  CHECK(!std::isfinite(run.loss_trace.back()));
}

TEST_CASE("optimize: never mutates the ground truth") {
  SceneGenParams params;
  params.seed = 30;
  SceneSample scene = generate_scene(params);
  NoiseModel noise;
  noise.sigma_base = 0.3;
  scene = perturb(scene, noise, 5);
  const std::vector<Box3D> gt_before = scene.gt_boxes;

  OptimSpec spec;
  spec.steps = 40;
  spec.step_size = 20.0;
  const OptimRun run = optimize(scene, spec);
  CHECK(same_boxes(scene.gt_boxes, gt_before));
  CHECK(same_boxes(run.final_scene.gt_boxes, gt_before));
  REQUIRE(run.loss_trace.size() == static_cast<std::size_t>(spec.steps));
}
