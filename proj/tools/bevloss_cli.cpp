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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bevloss/experiment.hpp"
#include "bevloss/kitti.hpp"
#include "bevloss/numdiff.hpp"
#include "bevloss/scene_sim.hpp"

namespace fs = std::filesystem;
using namespace bevloss;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct GradcheckOptions {
  std::uint64_t seed = 7;
  int scenes = 50;
  double tol = 1e-4;
  std::string mode = "both";
  double lambda_homo = 0.2;
};

std::vector<double> flatten_pred(const ScenePoints& points) {
  std::vector<double> x;
  for (const auto& object : points.pred) {
    for (const auto& p : object) {
      x.push_back(p.x);
      x.push_back(p.y);
    }
  }
  return x;
}

ScenePoints with_pred(ScenePoints points, const std::vector<double>& x) {
  std::size_t idx = 0;
  for (auto& object : points.pred) {
    for (auto& p : object) {
      p.x = x[idx++];
      p.y = x[idx++];
    }
  }
  return points;
}

std::vector<double> flatten_gradients(const LossReport& report) {
  std::vector<double> g;
  for (const auto& object : report.d_points) {
    for (const auto& grad : object) {
      g.push_back(grad.x());
      g.push_back(grad.y());
    }
  }
  return g;
}

double check_point_loss(const ScenePoints& points, auto&& loss_fn) {
  const LossReport report = loss_fn(points);
  if (report.skipped) return 0.0;
  const auto fd = central_difference(
      [&](const std::vector<double>& x) {
        return loss_fn(with_pred(points, x)).value;
      },
      flatten_pred(points));
  return gradient_deviation(fd, flatten_gradients(report));
}

double check_replicated(const SceneSample& scene, const LossConfig& config) {
  const LossReport report = replicated_homography_loss(scene, config);
  if (report.skipped) return 0.0;
  std::vector<double> params;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < scene.pred_components.size(); ++i) {
    params.push_back(scene.pred_components[i].center_px.u);
    params.push_back(scene.pred_components[i].center_px.v);
    params.push_back(scene.pred_components[i].depth);
    analytic.push_back(report.d_center_px[i].x());
    analytic.push_back(report.d_center_px[i].y());
    analytic.push_back(report.d_depth[i]);
  }
  const auto fd = central_difference(
      [&](const std::vector<double>& x) {
        SceneSample moved = scene;
        for (std::size_t i = 0; i < moved.pred_components.size(); ++i) {
          moved.pred_components[i].center_px = {x[3 * i], x[3 * i + 1]};
          moved.pred_components[i].depth = x[3 * i + 2];
        }
        return replicated_homography_loss(moved, config).value;
      },
      params);
  return gradient_deviation(fd, analytic);
}

int run_gradcheck(const GradcheckOptions& options) {
  std::map<std::string, double> worst;
  for (int s = 0; s < options.scenes; ++s) {
    SceneGenParams params;
    params.seed = options.seed + static_cast<std::uint64_t>(s);
    params.n_boxes = {2, 10};
    const SceneSample clean = generate_scene(params);

    NoiseModel noise;
    noise.sigma_base = 0.25;
    noise.sigma_per_meter = 0.02;
    const SceneSample scene = perturb(clean, noise, params.seed * 31 + 5);
    const ScenePoints points = scene_points(scene);

    worst["regression"] = std::max(
        worst["regression"], check_point_loss(points, [](const ScenePoints& p) {
          return regression_loss(p);
        }));
    worst["projection"] = std::max(
        worst["projection"], check_point_loss(points, [](const ScenePoints& p) {
          return projection_loss(p);
        }));

    LossConfig config;
    config.lambda_homo = options.lambda_homo;
    if (options.mode != "type2") {
      config.mode = LossMode::type1;
      worst["homography/type1"] =
          std::max(worst["homography/type1"],
                   check_point_loss(points, [&](const ScenePoints& p) {
                     return homography_loss(p, config);
                   }));
    }
    if (options.mode != "type1") {
      config.mode = LossMode::type2;
      worst["homography/type2"] =
          std::max(worst["homography/type2"],
                   check_point_loss(points, [&](const ScenePoints& p) {
                     return homography_loss(p, config);
                   }));
    }

    NoiseModel component_noise;
    component_noise.component_mode = true;
    component_noise.sigma_center_px = 2.0;
    component_noise.sigma_base = 0.3;
    const SceneSample component_scene =
        perturb(clean, component_noise, params.seed * 37 + 11);
    LossConfig replicated_config;
    replicated_config.mode = LossMode::type1;
    worst["replicated"] = std::max(
        worst["replicated"], check_replicated(component_scene, replicated_config));
  }

  double overall = 0.0;
  for (const auto& [name, deviation] : worst) {
    std::cout << name << ": max relative error " << deviation << "\n";
    overall = std::max(overall, deviation);
  }
  std::cout << "overall max relative error " << overall << " (tolerance "
            << options.tol << ")\n";
  if (overall >= options.tol) {
    std::cerr << "gradcheck FAILED\n";
    return kExitValidation;
  }
  std::cout << "gradcheck OK\n";
  return 0;
}

int run_estimate(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open correspondence file: " << path << "\n";
    return kExitValidation;
  }
  std::size_t n = 0;
  if (!(in >> n) || n < 4) {
    std::cerr << "correspondence file must start with a count >= 4\n";
    return kExitValidation;
  }
  PointCorrespondenceSet pairs;
  for (std::size_t i = 0; i < n; ++i) {
    double u, v, x, y;
    if (!(in >> u >> v >> x >> y)) {
      std::cerr << "correspondence file: bad row " << i + 1 << "\n";
      return kExitValidation;
    }
    pairs.sources.emplace_back(u, v);
    pairs.targets.emplace_back(x, y);
  }

  const EstimateResult result = estimate_homography(pairs);
  if (!result.ok) {
    std::cerr << "estimation failed: " << to_string(result.error) << "\n";
    return kExitRuntime;
  }
  std::cout << "gauge-fixed homography (unit Frobenius norm):\n";
  const Eigen::IOFormat fmt(12, 0, "  ", "\n", "  ");
  std::cout << result.h.format(fmt) << "\n";
  double worst = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double err =
        (apply_homography(result.h, pairs.sources[i]) - pairs.targets[i])
            .norm();
    std::cout << "pair " << i << " reprojection error " << err << "\n";
    worst = std::max(worst, err);
    mean += err / static_cast<double>(pairs.size());
  }
  std::cout << "mean reprojection error " << mean << "\n";
  std::cout << "max reprojection error " << worst << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig config;
  try {
    config = load_experiment_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "invalid experiment config: " << e.what() << "\n";
    return kExitValidation;
  }
  const ExperimentResults results =
      run_experiment(config, ExecutionPolicy::parallel);
  write_results(results, out_dir);
  std::cout << render_table(results.report);

  int diverged = 0;
  for (const RunRecord& record : results.runs) {
    if (record.run.diverged) ++diverged;
  }
  if (diverged > 0) {
    std::cout << diverged << " of " << results.runs.size()
              << " runs diverged\n";
  }
  std::cout << "results written to " << out_dir << "\n";
  return 0;
}

int run_eval_kitti(const std::string& labels_dir, const std::string& calib_dir,
                   const std::string& out_dir, const std::string& mode,
                   double lambda_homo, double camera_height) {
  if (!fs::is_directory(labels_dir) || !fs::is_directory(calib_dir)) {
    std::cerr << "--labels and --calib must be directories\n";
    return kExitValidation;
  }
  LossConfig config;
  config.mode = mode == "type2" ? LossMode::type2 : LossMode::type1;
  config.lambda_homo = lambda_homo;

  std::vector<fs::path> label_files;
  for (const auto& entry : fs::directory_iterator(labels_dir)) {
    if (entry.path().extension() == ".txt") label_files.push_back(entry.path());
  }
  std::sort(label_files.begin(), label_files.end());
  if (label_files.empty()) {
    std::cerr << "no label files under " << labels_dir << "\n";
    return kExitValidation;
  }

  int parsed_files = 0, parse_failures = 0, degenerate_scenes = 0,
      scored_scenes = 0, empty_scenes = 0;
  int bbox_checked = 0, bbox_inside = 0;
  double loss_sum = 0.0, loss_max = 0.0;
  nlohmann::json per_file = nlohmann::json::array();

  for (const fs::path& label_path : label_files) {
    const fs::path calib_path = fs::path(calib_dir) / label_path.filename();
    try {
      std::ifstream label_in(label_path);
      std::ostringstream labels;
      labels << label_in.rdbuf();
      std::ifstream calib_in(calib_path);
      if (!calib_in) {
        throw std::runtime_error("missing calib file " + calib_path.string());
      }
      std::ostringstream calib;
      calib << calib_in.rdbuf();

      const auto records = kitti::parse_labels(labels.str());
      const CameraModel camera =
          kitti::parse_calib(calib.str(), camera_height);
      ++parsed_files;

      const kitti::BboxConsistency consistency =
          kitti::bbox_consistency(records, camera);
      bbox_checked += consistency.checked;
      bbox_inside += consistency.inside;

      const SceneSample scene = kitti::scene_from_labels(records, camera);
      nlohmann::json file_entry{{"file", label_path.filename().string()},
                                {"objects", scene.gt_boxes.size()}};
      if (scene.gt_boxes.empty()) {
        ++empty_scenes;
        file_entry["status"] = "no usable objects";
      } else {
        const LossReport report = homography_loss(scene, config);
        if (report.skipped) {
          ++degenerate_scenes;
          file_entry["status"] = to_string(report.reason);
        } else {
          ++scored_scenes;
          loss_sum += report.value;
          loss_max = std::max(loss_max, report.value);
          file_entry["status"] = "ok";
          file_entry["loss_at_gt"] = report.value;
        }
      }
      per_file.push_back(file_entry);
    } catch (const std::exception& e) {
      ++parse_failures;
      std::cerr << label_path.filename().string() << ": " << e.what() << "\n";
      per_file.push_back({{"file", label_path.filename().string()},
                          {"status", std::string("error: ") + e.what()}});
    }
  }

  if (parsed_files == 0) {
    std::cerr << "no file could be processed\n";
    return kExitRuntime;
  }

  std::cout << "files: " << label_files.size() << " (" << parse_failures
            << " unreadable)\n";
  std::cout << "scenes scored: " << scored_scenes
            << ", degenerate skips: " << degenerate_scenes
            << ", without usable objects: " << empty_scenes << "\n";
  if (scored_scenes > 0) {
    std::cout << "loss at ground truth: mean " << loss_sum / scored_scenes
              << ", max " << loss_max << "\n";
  }
  const double skip_rate =
      scored_scenes + degenerate_scenes > 0
          ? static_cast<double>(degenerate_scenes) /
                (scored_scenes + degenerate_scenes)
          : 0.0;
  std::cout << "degenerate-scene rate: " << skip_rate << "\n";
  if (bbox_checked > 0) {
    std::cout << "bbox consistency (easy Car): "
              << static_cast<double>(bbox_inside) / bbox_checked << " ("
              << bbox_inside << "/" << bbox_checked << ")\n";
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    nlohmann::json summary{
        {"version", 1},
        {"files", label_files.size()},
        {"parse_failures", parse_failures},
        {"scored_scenes", scored_scenes},
        {"degenerate_scenes", degenerate_scenes},
        {"degenerate_rate", skip_rate},
        {"mean_loss_at_gt", scored_scenes ? loss_sum / scored_scenes : 0.0},
        {"max_loss_at_gt", loss_max},
        {"bbox_checked", bbox_checked},
        {"bbox_inside", bbox_inside},
        {"per_file", per_file}};
    std::ofstream out(fs::path(out_dir) / "kitti_eval.json");
    out << summary.dump(2) << "\n";
    std::cout << "summary written to " << out_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"homography-loss geometry toolkit"};
  app.require_subcommand(1);

  GradcheckOptions gradcheck_options;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck",
                         "verify all loss gradients against central finite "
                         "differences on random scenes");
  gradcheck->add_option("--seed", gradcheck_options.seed, "base RNG seed");
  gradcheck->add_option("--scenes", gradcheck_options.scenes,
                        "number of random scenes");
  gradcheck->add_option("--tol", gradcheck_options.tol,
                        "max relative error allowed");
  gradcheck->add_option("--mode", gradcheck_options.mode,
                        "homography mode: type1|type2|both")
      ->check(CLI::IsMember({"type1", "type2", "both"}));
  gradcheck->add_option("--lambda-homo", gradcheck_options.lambda_homo,
                        "homography loss weight");

  std::string corr_file;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "estimate a homography from a correspondence file "
                  "(header n, then n lines: u v x y)");
  estimate->add_option("file", corr_file, "correspondence file")->required();

  std::string sim_config, sim_out;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "run a synthetic optimization experiment from a config "
                  "file and write a depth-binned comparison");
  simulate->add_option("--config", sim_config, "experiment config (json)")
      ->required();
  simulate->add_option("--out", sim_out, "output directory")->required();

  std::string labels_dir, calib_dir, kitti_out;
  std::string kitti_mode = "type1";
  double kitti_lambda = 0.2;
  double camera_height = 1.65;
  CLI::App* eval_kitti = app.add_subcommand(
      "eval-kitti", "self-consistency of the loss pipeline on KITTI "
                    "annotations (loss at gt, skip rate, bbox consistency)");
  eval_kitti->add_option("--labels", labels_dir, "label_2 directory")
      ->required();
  eval_kitti->add_option("--calib", calib_dir, "calib directory")->required();
  eval_kitti->add_option("--out", kitti_out, "output directory (optional)");
  eval_kitti->add_option("--mode", kitti_mode, "type1|type2")
      ->check(CLI::IsMember({"type1", "type2"}));
  eval_kitti->add_option("--lambda-homo", kitti_lambda, "loss weight");
  eval_kitti->add_option("--camera-height", camera_height,
                         "camera height above ground, meters");

  std::string results_file;
  CLI::App* report = app.add_subcommand(
      "report", "render a results.json into the comparison table");
  report->add_option("file", results_file, "results.json path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (gradcheck->parsed()) return run_gradcheck(gradcheck_options);
    if (estimate->parsed()) return run_estimate(corr_file);
    if (simulate->parsed()) return run_simulate(sim_config, sim_out);
    if (eval_kitti->parsed()) {
      return run_eval_kitti(labels_dir, calib_dir, kitti_out, kitti_mode,
                            kitti_lambda, camera_height);
    }
    if (report->parsed()) {
      std::cout << render_results_file(results_file);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
