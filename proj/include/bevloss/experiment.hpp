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

#include <filesystem>
#include <string>
#include <vector>

#include "bevloss/metrics.hpp"
#include "bevloss/parallel.hpp"
#include "bevloss/scene_sim.hpp"

namespace bevloss {

struct NamedLossConfig {
  std::string name;
  LossConfig config;
};

/// One simulate experiment: shared scenes and optimizer, one run per
/// (seed, loss config) pair.
struct ExperimentConfig {
  int version = 1;
  SceneGenParams scene;       // per-run seed comes from `seeds`
  NoiseModel noise;           // initial prediction noise
  NoiseModel regression_bias; // corruption of the regression supervision;
                              // the homography term always sees exact gt
  OptimSpec optimizer;        // loss field is replaced per config
  std::vector<NamedLossConfig> losses;
  std::vector<std::uint64_t> seeds;
  std::vector<double> bin_edges{0.0, 10.0, 20.0, 30.0};
  double far_depth_threshold = 20.0;
};

void validate(const ExperimentConfig& config);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const ExperimentConfig& config,
                            const std::filesystem::path& path);

struct RunRecord {
  std::uint64_t seed = 0;
  std::string config_name;
  OptimRun run;
  double far_initial_error = 0.0;  // mean over objects at/past the threshold
  double far_final_error = 0.0;
};

struct ExperimentResults {
  ExperimentConfig config;
  std::vector<RunRecord> runs;     // seed-major, config order per seed
  DepthBinnedReport report;
};

/// Deterministic in (config, seeds); serial and parallel execution produce
/// bit-identical results.
ExperimentResults run_experiment(const ExperimentConfig& config,
                                 ExecutionPolicy policy);

/// results.json (machine readable) plus report.txt (rendered table).
void write_results(const ExperimentResults& results,
                   const std::filesystem::path& out_dir);

/// Re-renders the table of a previously written results.json.
std::string render_results_file(const std::filesystem::path& results_json);

}  // namespace bevloss
