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

#include <numeric>

#include <doctest.h>

#include "bevloss/batch.hpp"
#include "bevloss/experiment.hpp"

using namespace bevloss;

namespace {

ExperimentConfig tiny_experiment() {
  ExperimentConfig config;
  config.scene.n_boxes = {2, 4};
  config.noise.sigma_base = 0.3;
  config.noise.sigma_per_meter = 0.02;
  config.regression_bias.bias_forward_per_meter = 0.03;
  config.optimizer.steps = 30;
  config.optimizer.step_size = 30.0;
  config.optimizer.step_decay = 0.9;
  LossConfig reg_only;
  reg_only.lambda_homo = 0.0;
  LossConfig with_homo;
  config.losses = {{"reg_only", reg_only}, {"homo", with_homo}};
  config.seeds = {1, 2, 3, 4};
  return config;
}

}  // namespace

TEST_CASE("for_each_index covers every index exactly once") {
  for (const ExecutionPolicy policy :
       {ExecutionPolicy::serial, ExecutionPolicy::parallel}) {
    std::vector<int> hits(513, 0);
    for_each_index(hits.size(), policy, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::accumulate(hits.begin(), hits.end(), 0) ==
          static_cast<int>(hits.size()));
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("evaluate_scenes: parallel is bit-identical to the serial "
          "reference") {
  std::vector<SceneSample> scenes;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    SceneGenParams params;
    params.seed = seed;
    params.n_boxes = {2, 6};
    NoiseModel noise;
    noise.sigma_base = 0.25;
    noise.sigma_per_meter = 0.03;
    scenes.push_back(perturb(generate_scene(params), noise, seed * 17 + 3));
  }
  LossConfig config;
  const auto serial =
      evaluate_scenes(scenes, config, 0, ExecutionPolicy::serial);
  const auto parallel =
      evaluate_scenes(scenes, config, 0, ExecutionPolicy::parallel);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].value == parallel[i].value);
    CHECK(serial[i].skipped == parallel[i].skipped);
    REQUIRE(serial[i].d_points.size() == parallel[i].d_points.size());
    for (std::size_t j = 0; j < serial[i].d_points.size(); ++j) {
      for (int k = 0; k < 5; ++k) {
        CHECK(serial[i].d_points[j][k] == parallel[i].d_points[j][k]);
      }
    }
  }
}

TEST_CASE("run_experiment: parallel is bit-identical to the serial "
          "reference") {
  const ExperimentConfig config = tiny_experiment();
  const ExperimentResults serial =
      run_experiment(config, ExecutionPolicy::serial);
  const ExperimentResults parallel =
      run_experiment(config, ExecutionPolicy::parallel);

  REQUIRE(serial.runs.size() == parallel.runs.size());
  REQUIRE(serial.runs.size() == config.seeds.size() * config.losses.size());
  for (std::size_t i = 0; i < serial.runs.size(); ++i) {
    CHECK(serial.runs[i].seed == parallel.runs[i].seed);
    CHECK(serial.runs[i].config_name == parallel.runs[i].config_name);
    REQUIRE(serial.runs[i].run.loss_trace.size() ==
            parallel.runs[i].run.loss_trace.size());
    for (std::size_t s = 0; s < serial.runs[i].run.loss_trace.size(); ++s) {
      CHECK(serial.runs[i].run.loss_trace[s] ==
            parallel.runs[i].run.loss_trace[s]);
    }
    for (std::size_t j = 0; j < serial.runs[i].run.final_errors.size(); ++j) {
      CHECK(serial.runs[i].run.final_errors[j] ==
            parallel.runs[i].run.final_errors[j]);
    }
  }
  for (std::size_t r = 0; r < serial.report.rows.size(); ++r) {
    for (std::size_t b = 0; b < serial.report.rows[r].bins.size(); ++b) {
      const BinStats& a = serial.report.rows[r].bins[b];
      const BinStats& p = parallel.report.rows[r].bins[b];
      CHECK(a.count == p.count);
      if (a.count > 0) {
        CHECK(a.mean_error == p.mean_error);
        CHECK(a.median_error == p.median_error);
        CHECK(a.mean_iou == p.mean_iou);
      }
    }
  }
}

TEST_CASE("experiment config round-trips through JSON") {
  const ExperimentConfig config = tiny_experiment();
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "bevloss_config_test.json";
  save_experiment_config(config, path);
  const ExperimentConfig loaded = load_experiment_config(path);
  CHECK(loaded.version == config.version);
  CHECK(loaded.seeds == config.seeds);
  CHECK(loaded.losses.size() == config.losses.size());
  CHECK(loaded.losses[0].name == "reg_only");
  CHECK(loaded.losses[0].config.lambda_homo == 0.0);
  CHECK(loaded.losses[1].config.lambda_homo ==
        config.losses[1].config.lambda_homo);
  CHECK(loaded.noise.sigma_base == config.noise.sigma_base);
  CHECK(loaded.regression_bias.bias_forward_per_meter ==
        config.regression_bias.bias_forward_per_meter);
  CHECK(loaded.optimizer.steps == config.optimizer.steps);
  CHECK(loaded.bin_edges == config.bin_edges);
  std::filesystem::remove(path);
}

TEST_CASE("experiment results land on disk with both rows") {
  ExperimentConfig config = tiny_experiment();
  config.seeds = {5, 6};
  config.optimizer.steps = 10;
  const ExperimentResults results =
      run_experiment(config, ExecutionPolicy::serial);
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "bevloss_results_test";
  write_results(results, dir);
  CHECK(std::filesystem::exists(dir / "results.json"));
  CHECK(std::filesystem::exists(dir / "report.txt"));

  const std::string rendered = render_results_file(dir / "results.json");
  CHECK(rendered.find("reg_only") != std::string::npos);
  CHECK(rendered.find("homo") != std::string::npos);
  std::filesystem::remove_all(dir);
}
