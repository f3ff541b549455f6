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
//
// Compares the serial reference path against the OpenMP path for the two
// scene-parallel kernels: batch loss evaluation and experiment runs.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "bevloss/batch.hpp"
#include "bevloss/experiment.hpp"

using namespace bevloss;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

double time_batch(std::span<const SceneSample> scenes, const LossConfig& config,
                  ExecutionPolicy policy, int reps, double* checksum) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto start = Clock::now();
    const auto reports = evaluate_scenes(scenes, config, 0, policy);
    best = std::min(best, ms_since(start));
    *checksum = 0.0;
    for (const LossReport& report : reports) *checksum += report.value;
  }
  return best;
}

double time_experiment(const ExperimentConfig& config, ExecutionPolicy policy,
                       double* checksum) {
  const auto start = Clock::now();
  const ExperimentResults results = run_experiment(config, policy);
  const double elapsed = ms_since(start);
  *checksum = 0.0;
  for (const RunRecord& record : results.runs) {
    *checksum += record.run.final_errors.empty()
                     ? 0.0
                     : record.run.final_errors.front();
  }
  return elapsed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP benchmark for the scene-parallel kernels"};
  int n_scenes = 512;
  int n_seeds = 16;
  int steps = 120;
  int reps = 5;
  app.add_option("--scenes", n_scenes, "scenes in the batch-loss kernel");
  app.add_option("--seeds", n_seeds, "seeds in the experiment kernel");
  app.add_option("--steps", steps, "optimizer steps per run");
  app.add_option("--reps", reps, "repetitions (best-of)");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel falls back to serial\n");
#endif

  std::vector<SceneSample> scenes;
  scenes.reserve(n_scenes);
  for (int i = 0; i < n_scenes; ++i) {
    SceneGenParams params;
    params.seed = static_cast<std::uint64_t>(i);
    params.n_boxes = {3, 9};
    NoiseModel noise;
    noise.sigma_base = 0.3;
    noise.sigma_per_meter = 0.02;
    scenes.push_back(perturb(generate_scene(params), noise, 1000 + i));
  }

  LossConfig config;
  double serial_sum = 0.0, parallel_sum = 0.0;
  const double batch_serial =
      time_batch(scenes, config, ExecutionPolicy::serial, reps, &serial_sum);
  const double batch_parallel = time_batch(
      scenes, config, ExecutionPolicy::parallel, reps, &parallel_sum);
  std::printf("batch loss over %d scenes: serial %.1f ms, parallel %.1f ms, "
              "speedup %.2fx (checksums %.6g / %.6g)\n",
              n_scenes, batch_serial, batch_parallel,
              batch_serial / batch_parallel, serial_sum, parallel_sum);

  ExperimentConfig experiment;
  experiment.scene.n_boxes = {3, 8};
  experiment.noise.sigma_base = 0.3;
  experiment.noise.sigma_per_meter = 0.03;
  experiment.regression_bias.bias_forward_per_meter = 0.05;
  experiment.optimizer.steps = steps;
  experiment.optimizer.step_size = 4.0;
  experiment.optimizer.step_decay = 0.992;
  LossConfig reg_only;
  reg_only.lambda_homo = 0.0;
  experiment.losses = {{"reg_only", reg_only}, {"homo", LossConfig{}}};
  for (int s = 0; s < n_seeds; ++s) {
    experiment.seeds.push_back(static_cast<std::uint64_t>(s + 1));
  }

  const double exp_serial =
      time_experiment(experiment, ExecutionPolicy::serial, &serial_sum);
  const double exp_parallel =
      time_experiment(experiment, ExecutionPolicy::parallel, &parallel_sum);
  std::printf("experiment with %d seeds x %zu configs: serial %.1f ms, "
              "parallel %.1f ms, speedup %.2fx (checksums %.6g / %.6g)\n",
              n_seeds, experiment.losses.size(), exp_serial, exp_parallel,
              exp_serial / exp_parallel, serial_sum, parallel_sum);
  return 0;
}
