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

#ifndef DMPC_ANALYSIS_HPP_
#define DMPC_ANALYSIS_HPP_

#include <string>
#include <vector>

#include "dmpc/agent.hpp"
#include "dmpc/envs.hpp"
#include "dmpc/planners.hpp"
#include "dmpc/worldmodel.hpp"

namespace dmpc {

// Expected signal-to-noise ratio of gradient samples (rows of `samples`):
// sum of squared per-coordinate means over summed per-coordinate sample
// variances (K-1 denominator). Zero variance with a nonzero mean returns
// +infinity; 0/0 returns NaN (undefined). Throws for fewer than two rows.
double Esnr(const Eigen::MatrixXd& samples);

// Pearson correlation of average-tie ranks; NaN when either rank vector is
// constant. Throws on length mismatch or fewer than three points.
double Spearman(const std::vector<double>& x, const std::vector<double>& y);

// Gradient of the undiscounted predicted return (sum of reward-head
// outputs over the rollout) with respect to each candidate's actions;
// actions[k] holds one column per candidate.
std::vector<Eigen::MatrixXd> ModelReturnGrad(const WorldModel& model, const LatentState& z,
                                             const std::vector<Eigen::MatrixXd>& actions);

struct GradientStudyRow {
  std::string env;
  std::string source;   // ground_truth | learned_model
  std::string planner;  // grad_mpc_gaussian | dream_mpc
  int horizon = 0;
  uint64_t seed = 0;
  int samples = 0;
  double esnr = 0.0;
  double grad_norm_mean = 0.0;
  double mean_sq_sum = 0.0;
  double var_sum = 0.0;
};

// Per (horizon, seed) cell: samples candidate action sequences (Gaussian
// proposals or stochastic policy rollouts), computes the return gradient
// through the chosen dynamics source, and reports ESNR and moment stats.
// `model` may be null only for source=ground_truth with Gaussian proposals.
std::vector<GradientStudyRow> GradientStudy(const WorldModel* model, const Env& env, const std::string& source,
                                            const std::string& planner, const std::vector<int>& horizons,
                                            const std::vector<uint64_t>& seeds, int samples_per_cell,
                                            double gaussian_std, const std::string& csv_path);

struct ValueStudyEpisode {
  int episode = 0;
  double episode_return = 0.0;  // discounted
  double value_estimate = 0.0;  // ensemble estimate at (z_0, a_0)
  double abs_error = 0.0;
  double q_std_mean = 0.0;  // episode mean per-step ensemble std
  int error_quartile = 0;   // 0..3 bin of abs_error
};

struct ValueStudyResult {
  std::vector<ValueStudyEpisode> episodes;
  double spearman_qstd_return = 0.0;
  double spearman_error_return = 0.0;
  double spearman_qstd_error = 0.0;
  bool correlations_defined = false;  // requires >= 3 episodes
};

ValueStudyResult ValueStudy(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                            const Env& env, int episodes, uint64_t seed, bool min_estimate,
                            const std::string& csv_path);

struct ExploitationRow {
  int episode = 0;
  long step = 0;
  double predicted = 0.0;  // chosen plan's objective at lambda_unc = 0
  double realized = 0.0;   // env H-step discounted return with terminal re-estimate
  double gap = 0.0;
};

struct ExploitationStudyResult {
  std::vector<ExploitationRow> rows;
  double mean_gap = 0.0;
};

ExploitationStudyResult ExploitationStudy(const WorldModel& model, const std::string& planner,
                                          const PlannerConfig& config, const Env& env, int episodes,
                                          uint64_t seed, const std::string& csv_path);

struct TimingRow {
  std::string planner;
  double mean_micros = 0.0;
  double std_micros = 0.0;
  long samples = 0;
};

// Monotonic-clock latency of the plan call only; the first `warmup` calls
// per planner are excluded.
std::vector<TimingRow> TimingReport(const WorldModel& model, const std::vector<std::string>& planners,
                                    const PlannerConfig& config, const Env& env, int episodes, uint64_t seed,
                                    int warmup, const std::string& csv_path);

}  // namespace dmpc

#endif  // DMPC_ANALYSIS_HPP_
