// Copyright 2026 dmpc contributors
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

#ifndef DMPC_CONFIG_HPP_
#define DMPC_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmpc/planners.hpp"
#include "dmpc/worldmodel.hpp"

namespace dmpc {

// Raised for malformed configs, unknown keys, or invalid values; mapped to
// exit code 2 at the tool boundary.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when training aborts on a sustained non-finite loss streak; mapped
// to exit code 3.
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fully resolved run configuration. A run is determined by this struct plus
// nothing else.
struct RunConfig {
  // [run]
  std::string name = "run";
  uint64_t seed = 1;
  std::string out_dir = "runs";
  // [env]
  std::string env = "pendulum";
  int episode_length = 0;  // 0 = per-env default
  int action_repeat = 2;
  // [model]
  ModelConfig model;
  // [train]
  TrainHyper hyper;
  long total_steps = 30000;
  long seed_steps = 1000;
  int utd_ratio = 1;
  int batch_size = 128;
  long buffer_capacity = 50000;
  long eval_interval = 2500;
  int eval_episodes = 10;
  std::string planner = "dream_mpc";  // policy | mppi | dream_mpc
  int nonfinite_abort_streak = 10;
  // [planner] + [mppi]
  PlannerConfig planner_config;

  void Validate() const;
};

// Flat key = value file with [section] headers; '#' and ';' start comments.
// Unknown keys are errors.
RunConfig ParseRunConfig(const std::string& path, const std::vector<std::string>& overrides);

// Defaults plus overrides, no file.
RunConfig MakeRunConfig(const std::vector<std::string>& overrides);

// Canonical byte-stable serialization of every resolved value.
std::string ConfigSnapshot(const RunConfig& config);

}  // namespace dmpc

#endif  // DMPC_CONFIG_HPP_
