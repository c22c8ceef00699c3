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

#ifndef DMPC_PLANNERS_HPP_
#define DMPC_PLANNERS_HPP_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/worldmodel.hpp"

namespace dmpc {

struct MppiConfig {
  int population = 512;
  int policy_samples = 24;
  int elites = 64;
  int iterations = 6;
  double temperature = 0.5;
  double std_min = 0.05;
  double std_max = 2.0;
  // The baseline scores candidates without the uncertainty penalty; set > 0
  // to enable test-time regularization.
  double lambda_unc = 0.0;
};

struct PlannerConfig {
  int horizon = 3;     // H: planned steps; sequences carry H+1 actions
  int iterations = 1;  // I: gradient-ascent rounds
  int candidates = 5;  // N
  double alpha = 0.1;
  double rho = 0.1;
  double lambda_unc = 0.01;
  double sigma_perturb = 0.05;  // perturbation std in deterministic-policy mode
  bool deterministic_candidates = false;
  std::string proposal = "policy";  // "policy" | "gaussian"
  double gaussian_std = 1.0;
  bool uncertainty_abs_mean = false;
  bool uncertainty_stop_grad = false;
  MppiConfig mppi;

  void Validate() const;
};

// One fully scored candidate trajectory.
struct CandidatePlan {
  Eigen::MatrixXd actions;        // (H+1) x action_dim
  Eigen::MatrixXd latents;        // latent_dim x (H+1)
  Eigen::VectorXd rewards;        // H
  double terminal_q = 0.0;        // ensemble mean at (z_{t+H}, a_{t+H})
  Eigen::VectorXd uncertainties;  // H+1
  double objective = 0.0;
  bool finite = true;
};

// Previous step's optimized action sequences, one per candidate; empty at
// episode start.
struct ReusePlan {
  std::vector<Eigen::MatrixXd> sequences;  // each (H+1) x action_dim
  bool empty() const { return sequences.empty(); }
};

struct MppiWarmStart {
  Eigen::MatrixXd mean;  // (H+1) x action_dim
  Eigen::MatrixXd std;
  bool empty() const { return mean.size() == 0; }
};

struct PlanDiagnostics {
  std::string planner;
  int chosen_index = -1;
  double chosen_objective = 0.0;
  std::vector<double> initial_objectives;
  std::vector<double> final_objectives;
  // Eval-count decomposition: candidate generation, optimization loop,
  // final re-scoring.
  EvalCounter generation;
  EvalCounter optimization;
  EvalCounter rescoring;
  double grad_norm_mean = 0.0;
  double grad_norm_max = 0.0;
  bool fallback = false;
  long plan_micros = 0;
};

struct PlanResult {
  Eigen::VectorXd action;
  // Planned open-loop sequence behind the returned action: the argmax
  // candidate for Dream-MPC, the final Gaussian mean for MPPI.
  Eigen::MatrixXd planned_actions;
  std::optional<CandidatePlan> chosen;
  ReusePlan reuse;
  MppiWarmStart warm_start;
  PlanDiagnostics diagnostics;
};

// Candidate action sequences with their generation-time latent rollouts;
// actions[t] and latents[t] hold one column per candidate.
struct CandidateSet {
  std::vector<Eigen::MatrixXd> actions;  // H+1 entries, action_dim x N
  std::vector<Eigen::MatrixXd> latents;  // H+1 entries (empty for gaussian proposals)
};

// N imaginary policy rollouts (stochastic by default; the deterministic
// mode perturbs the greedy rollout with sigma_perturb noise, candidate 0
// unperturbed). Gaussian proposals skip the latent rollout.
CandidateSet RolloutPolicyCandidates(const WorldModel& model, const LatentState& z, const PlannerConfig& config,
                                     Rng& rng, EvalCounter* counter);

// In-place convex mixing of shifted previous plans with fresh proposals:
// a = rho * shifted_prev + (1 - rho) * proposal, last slot copying the final
// shifted action; clipped to [-1, 1]. Empty reuse behaves as rho = 0.
void InitWithReuse(CandidateSet& candidates, const ReusePlan& reuse, double rho);

// Discounted MPC objective with per-step uncertainty penalty:
// sum_k gamma^k r_k - lambda u_k (k < H) + gamma^H q_term - lambda u_H.
double Objective(const CandidatePlan& plan, double gamma, double lambda_unc);

// Scores every candidate column by a fresh latent rollout from z. When
// `with_uncertainty` is false the per-step Q queries are skipped and
// uncertainties are zero.
std::vector<CandidatePlan> ScoreCandidates(const WorldModel& model, const LatentState& z,
                                           const std::vector<Eigen::MatrixXd>& actions, double lambda_unc,
                                           bool abs_mean, bool with_uncertainty, EvalCounter* counter);

// One gradient-ascent round over a single candidate sequence:
// a <- clip(a + alpha * grad_a J). Returns J evaluated before the update.
// A non-finite gradient leaves the actions unchanged and flags the result.
struct AscentStep {
  double objective = 0.0;
  double grad_norm = 0.0;
  bool finite = true;
};
AscentStep GradAscentStep(const WorldModel& model, Eigen::MatrixXd& actions, const LatentState& z, double gamma,
                          double lambda_unc, double alpha, EvalCounter* counter, bool abs_mean = false,
                          bool stop_grad_uncertainty = false);

PlanResult DreamMpcPlan(const WorldModel& model, const LatentState& z, const PlannerConfig& config,
                        const ReusePlan& reuse, Rng& rng, EvalCounter& counter);

// TD-MPC2-style MPPI: per iteration samples population - policy_samples
// sequences from N(mu, sigma^2) plus the policy rollouts, refits (mu, sigma)
// from softmax-weighted elites, and finally samples (or returns) mu_0.
PlanResult MppiPlan(const WorldModel& model, const LatentState& z, const PlannerConfig& config,
                    const MppiWarmStart& warm_start, Rng& rng, EvalCounter& counter, bool deterministic = false);

Eigen::VectorXd PolicyOnlyAct(const WorldModel& model, const LatentState& z, bool deterministic, Rng& rng,
                              EvalCounter* counter);

}  // namespace dmpc

#endif  // DMPC_PLANNERS_HPP_
