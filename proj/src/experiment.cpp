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

#include "bevloss/experiment.hpp"

#include <cstdint>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace bevloss {

namespace {

using nlohmann::json;

// Distinct streams for prediction noise and regression-target corruption.
constexpr std::uint64_t kPerturbSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kBiasSalt = 0xc2b2ae3d27d4eb4full;

bool is_noop(const NoiseModel& noise) {
  return noise.sigma_base == 0.0 && noise.sigma_per_meter == 0.0 &&
         noise.bias_base.isZero() && noise.bias_forward_per_meter == 0.0 &&
         noise.sigma_yaw == 0.0 && noise.sigma_dims == 0.0 &&
         !noise.component_mode;
}

json to_json(const NoiseModel& noise) {
  return json{{"sigma_base", noise.sigma_base},
              {"sigma_per_meter", noise.sigma_per_meter},
              {"bias_lateral", noise.bias_base.x()},
              {"bias_forward", noise.bias_base.y()},
              {"bias_forward_per_meter", noise.bias_forward_per_meter},
              {"sigma_yaw", noise.sigma_yaw},
              {"sigma_dims", noise.sigma_dims},
              {"component_mode", noise.component_mode},
              {"sigma_center_px", noise.sigma_center_px}};
}

NoiseModel noise_from_json(const json& j) {
  NoiseModel noise;
  noise.sigma_base = j.value("sigma_base", 0.0);
  noise.sigma_per_meter = j.value("sigma_per_meter", 0.0);
  noise.bias_base =
      Eigen::Vector2d(j.value("bias_lateral", 0.0), j.value("bias_forward", 0.0));
  noise.bias_forward_per_meter = j.value("bias_forward_per_meter", 0.0);
  noise.sigma_yaw = j.value("sigma_yaw", 0.0);
  noise.sigma_dims = j.value("sigma_dims", 0.0);
  noise.component_mode = j.value("component_mode", false);
  noise.sigma_center_px = j.value("sigma_center_px", 0.0);
  return noise;
}

json to_json(const LossConfig& config) {
  return json{{"mode", config.mode == LossMode::type1 ? "type1" : "type2"},
              {"beta", config.beta},
              {"lambda_homo", config.lambda_homo},
              {"lambda_reg", config.lambda_reg},
              {"warmup_steps", config.warmup_steps},
              {"replicate", config.replicate}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig config;
  const std::string mode = j.value("mode", "type1");
  if (mode != "type1" && mode != "type2") {
    throw std::runtime_error("experiment config: mode must be type1 or type2");
  }
  config.mode = mode == "type1" ? LossMode::type1 : LossMode::type2;
  config.beta = j.value("beta", 1.0);
  config.lambda_homo = j.value("lambda_homo", 0.2);
  config.lambda_reg = j.value("lambda_reg", 2.0);
  config.warmup_steps = j.value("warmup_steps", 0);
  config.replicate = j.value("replicate", false);
  return config;
}

json to_json(const SceneGenParams& params) {
  const Eigen::Matrix3d& k = params.camera.intrinsics;
  return json{
      {"n_boxes", params.n_boxes},
      {"depth_range", params.depth_range},
      {"lateral_range", params.lateral_range},
      {"yaw_range", params.yaw_range},
      {"length_range", params.dims_per_class[0].length},
      {"width_range", params.dims_per_class[0].width},
      {"height_range", params.dims_per_class[0].height},
      {"camera",
       {{"fx", k(0, 0)},
        {"fy", k(1, 1)},
        {"cx", k(0, 2)},
        {"cy", k(1, 2)},
        {"height", -(params.camera.rotation.transpose() *
                     params.camera.translation)(2)},
        {"image_width", params.image_width},
        {"image_height", params.image_height}}},
      {"image_margin", params.image_margin},
      {"max_attempts", params.max_attempts}};
}

SceneGenParams scene_from_json(const json& j) {
  SceneGenParams params;
  params.n_boxes = j.value("n_boxes", params.n_boxes);
  params.depth_range = j.value("depth_range", params.depth_range);
  params.lateral_range = j.value("lateral_range", params.lateral_range);
  params.yaw_range = j.value("yaw_range", params.yaw_range);
  DimRange dims;
  dims.length = j.value("length_range", dims.length);
  dims.width = j.value("width_range", dims.width);
  dims.height = j.value("height_range", dims.height);
  params.dims_per_class = {dims};
  if (j.contains("camera")) {
    const json& c = j.at("camera");
    params.camera = ground_camera(c.value("fx", 721.5), c.value("fy", 721.5),
                                  c.value("cx", 621.0), c.value("cy", 187.5),
                                  c.value("height", 1.65));
    params.image_width = c.value("image_width", params.image_width);
    params.image_height = c.value("image_height", params.image_height);
  }
  params.image_margin = j.value("image_margin", params.image_margin);
  params.max_attempts = j.value("max_attempts", params.max_attempts);
  return params;
}

json to_json(const OptimSpec& spec) {
  return json{{"steps", spec.steps},
              {"step_size", spec.step_size},
              {"step_decay", spec.step_decay},
              {"optimize_components", spec.optimize_components}};
}

OptimSpec optimizer_from_json(const json& j) {
  OptimSpec spec;
  spec.steps = j.value("steps", spec.steps);
  spec.step_size = j.value("step_size", spec.step_size);
  spec.step_decay = j.value("step_decay", spec.step_decay);
  spec.optimize_components = j.value("optimize_components", false);
  return spec;
}

double far_mean(const std::vector<Box3D>& gt, const std::vector<double>& errors,
                double threshold) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i].center_y >= threshold) {
      sum += errors[i];
      ++count;
    }
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void validate(const ExperimentConfig& config) {
  if (config.version != 1) {
    throw std::runtime_error("experiment config: unsupported version");
  }
  if (config.losses.empty()) {
    throw std::runtime_error("experiment config: no loss configs");
  }
  if (config.seeds.empty()) {
    throw std::runtime_error("experiment config: no seeds");
  }
  if (config.bin_edges.size() < 2) {
    throw std::runtime_error("experiment config: need at least two bin edges");
  }
  validate(config.scene);
  for (const NamedLossConfig& named : config.losses) {
    if (named.name.empty()) {
      throw std::runtime_error("experiment config: unnamed loss config");
    }
    validate(named.config);
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open experiment config: " + path.string());
  }
  json j;
  in >> j;
  if (!j.contains("version")) {
    throw std::runtime_error("experiment config: missing version field");
  }
  ExperimentConfig config;
  config.version = j.at("version").get<int>();
  if (j.contains("scene")) config.scene = scene_from_json(j.at("scene"));
  if (j.contains("noise")) config.noise = noise_from_json(j.at("noise"));
  if (j.contains("regression_bias")) {
    config.regression_bias = noise_from_json(j.at("regression_bias"));
  }
  if (j.contains("optimizer")) {
    config.optimizer = optimizer_from_json(j.at("optimizer"));
  }
  for (const json& entry : j.value("losses", json::array())) {
    NamedLossConfig named;
    named.name = entry.value("name", "");
    named.config = loss_from_json(entry);
    config.losses.push_back(std::move(named));
  }
  config.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  config.bin_edges = j.value("bin_edges", config.bin_edges);
  config.far_depth_threshold =
      j.value("far_depth_threshold", config.far_depth_threshold);
  validate(config);
  return config;
}

void save_experiment_config(const ExperimentConfig& config,
                            const std::filesystem::path& path) {
  json losses = json::array();
  for (const NamedLossConfig& named : config.losses) {
    json entry = to_json(named.config);
    entry["name"] = named.name;
    losses.push_back(entry);
  }
  const json j{{"version", config.version},
               {"scene", to_json(config.scene)},
               {"noise", to_json(config.noise)},
               {"regression_bias", to_json(config.regression_bias)},
               {"optimizer", to_json(config.optimizer)},
               {"losses", losses},
               {"seeds", config.seeds},
               {"bin_edges", config.bin_edges},
               {"far_depth_threshold", config.far_depth_threshold}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write experiment config: " +
                             path.string());
  }
  out << j.dump(2) << "\n";
}

ExperimentResults run_experiment(const ExperimentConfig& config,
                                 ExecutionPolicy policy) {
  validate(config);
  ExperimentResults results;
  results.config = config;

  const std::size_t n_configs = config.losses.size();
  const std::size_t n_tasks = config.seeds.size() * n_configs;
  results.runs.resize(n_tasks);

  for_each_index(n_tasks, policy, [&](std::size_t task) {
    const std::size_t seed_idx = task / n_configs;
    const std::size_t config_idx = task % n_configs;
    const std::uint64_t seed = config.seeds[seed_idx];

    SceneGenParams gen = config.scene;
    gen.seed = seed;
    SceneSample scene = generate_scene(gen);
    scene = perturb(scene, config.noise, seed ^ kPerturbSalt);
    if (!is_noop(config.regression_bias)) {
      scene.regression_targets =
          perturb(scene, config.regression_bias, seed ^ kBiasSalt).pred_boxes;
    }

    OptimSpec spec = config.optimizer;
    spec.loss = config.losses[config_idx].config;

    RunRecord& record = results.runs[task];
    record.seed = seed;
    record.config_name = config.losses[config_idx].name;
    record.run = optimize(scene, spec);
    record.far_initial_error = far_mean(scene.gt_boxes,
                                        record.run.initial_errors,
                                        config.far_depth_threshold);
    record.far_final_error = far_mean(scene.gt_boxes, record.run.final_errors,
                                      config.far_depth_threshold);
  });

  results.report.edges = config.bin_edges;
  for (const NamedLossConfig& named : config.losses) {
    std::vector<ObjectError> objects;
    for (const RunRecord& record : results.runs) {
      if (record.config_name != named.name) continue;
      const SceneSample& final_scene = record.run.final_scene;
      for (std::size_t i = 0; i < final_scene.gt_boxes.size(); ++i) {
        ObjectError obj;
        obj.depth = final_scene.gt_boxes[i].center_y;
        obj.center_error = record.run.final_errors[i];
        obj.iou = rotated_bev_iou(final_scene.pred_boxes[i],
                                  final_scene.gt_boxes[i]);
        objects.push_back(obj);
      }
    }
    results.report.rows.push_back(
        {named.name, binned_errors(objects, config.bin_edges)});
  }
  return results;
}

void write_results(const ExperimentResults& results,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  json rows = json::array();
  for (const auto& row : results.report.rows) {
    json bins = json::array();
    for (const BinStats& s : row.bins) {
      bins.push_back({{"lo", s.lo},
                      {"hi", s.hi},
                      {"count", s.count},
                      {"mean_error", s.mean_error},
                      {"median_error", s.median_error},
                      {"mean_iou", s.mean_iou}});
    }
    rows.push_back({{"config", row.config}, {"bins", bins}});
  }

  json runs = json::array();
  for (const RunRecord& record : results.runs) {
    runs.push_back({{"seed", record.seed},
                    {"config", record.config_name},
                    {"diverged", record.run.diverged},
                    {"skipped_steps", record.run.skipped_steps},
                    {"far_initial_error", record.far_initial_error},
                    {"far_final_error", record.far_final_error},
                    {"loss_trace", record.run.loss_trace}});
  }

  const json j{{"version", 1},
               {"bin_edges", results.config.bin_edges},
               {"far_depth_threshold", results.config.far_depth_threshold},
               {"rows", rows},
               {"runs", runs}};
  std::ofstream out(out_dir / "results.json");
  if (!out) {
    throw std::runtime_error("cannot write results.json under " +
                             out_dir.string());
  }
  out << j.dump(2) << "\n";

  std::ofstream table(out_dir / "report.txt");
  table << render_table(results.report);
}

std::string render_results_file(const std::filesystem::path& results_json) {
  std::ifstream in(results_json);
  if (!in) {
    throw std::runtime_error("cannot open results file: " +
                             results_json.string());
  }
  json j;
  in >> j;
  DepthBinnedReport report;
  report.edges = j.at("bin_edges").get<std::vector<double>>();
  for (const json& row : j.at("rows")) {
    DepthBinnedReport::Row out_row;
    out_row.config = row.at("config").get<std::string>();
    for (const json& bin : row.at("bins")) {
      BinStats s;
      s.lo = bin.at("lo").get<double>();
      s.hi = bin.at("hi").is_null()
                 ? std::numeric_limits<double>::infinity()
                 : bin.at("hi").get<double>();
      s.count = bin.at("count").get<long>();
      auto stat = [&](const char* key) {
        return bin.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN()
                                     : bin.at(key).get<double>();
      };
      s.mean_error = stat("mean_error");
      s.median_error = stat("median_error");
      s.mean_iou = stat("mean_iou");
      out_row.bins.push_back(s);
    }
    report.rows.push_back(std::move(out_row));
  }
  return render_table(report);
}

}  // namespace bevloss
