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

#ifndef DMPC_AGENT_HPP_
#define DMPC_AGENT_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dmpc/config.hpp"
#include "dmpc/envs.hpp"
#include "dmpc/planners.hpp"
#include "dmpc/worldmodel.hpp"

namespace dmpc {

// Ring of transitions with a uniform sampler of in-episode windows. Sampled
// sequences never span episode boundaries.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(long capacity);

  void Add(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double reward,
           const Eigen::VectorXd& next_obs, long episode);

  long size() const { return static_cast<long>(count_); }

  // True when at least one length-`horizon` in-episode window exists.
  bool CanSample(int horizon) const;

  // Uniform over valid start indices; horizon transitions give horizon+1
  // observations. Throws std::runtime_error when no valid window exists.
  SequenceBatch SampleSequences(int horizon, int batch, Rng& rng) const;

 private:
  struct Transition {
    Eigen::VectorXd obs;
    Eigen::VectorXd action;
    double reward;
    Eigen::VectorXd next_obs;
    long episode;
  };

  bool ValidStart(long logical, int horizon) const;
  const Transition& At(long logical) const;

  std::vector<Transition> ring_;
  long capacity_;
  long next_ = 0;   // physical write index
  long count_ = 0;  // live entries
};

// Receding-horizon planner state carried across one episode.
struct PlannerSession {
  ReusePlan reuse;
  MppiWarmStart warm;
  void Reset() {
    reuse = ReusePlan{};
    warm = MppiWarmStart{};
  }
};

struct ActOutcome {
  Eigen::VectorXd action;
  Eigen::MatrixXd planned_actions;  // open-loop plan (single row for policy-only)
  std::optional<CandidatePlan> chosen;
  PlanDiagnostics diagnostics;
};

// Dispatch to the configured planner; updates the session's reuse/warm-start
// state.
ActOutcome PlanAction(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                      const LatentState& z, PlannerSession& session, Rng& rng, EvalCounter& counter,
                      bool deterministic);

struct EvalResult {
  std::vector<double> returns;
  double mean = 0.0;
  double stddev = 0.0;  // population std over episodes
  double mean_plan_micros = 0.0;
};

// Deterministic evaluation: policy mean, MPPI final mean, Dream-MPC with
// seeded candidate sampling. Fully determined by (model, config, episodes,
// seed).
EvalResult Evaluate(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                    const Env& env_prototype, int episodes, uint64_t seed);

// (x - random) / (target - random); throws on a degenerate target.
double NormalizedScore(double x, double random_score, double target_score);

inline constexpr const char* kToolVersion = "0.1.0";

// Creates <out_dir>/<name>/ with manifest and config snapshot; refuses to
// touch a directory that already holds a manifest.
std::string PrepareRunDir(const RunConfig& config);

struct TrainResult {
  std::string checkpoint_path;  // final checkpoint
  long steps = 0;
  long episodes = 0;
  double last_eval_mean = 0.0;
};

// Online training loop: seed phase with uniform random actions, then
// plan-act-store plus utd_ratio model/policy updates per decision step,
// periodic deterministic evaluation, CSV streams, and checkpoints. Throws
// NumericalAbort after a sustained non-finite loss streak.
TrainResult Train(const RunConfig& config, const std::string& run_dir);

}  // namespace dmpc

#endif  // DMPC_AGENT_HPP_
