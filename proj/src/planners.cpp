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

#include "dmpc/planners.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dmpc {

namespace {

constexpr double kStdFloor = 1e-12;

double Clip(double v) { return std::min(1.0, std::max(-1.0, v)); }

void ClipInPlace(Eigen::MatrixXd& m) { m = m.array().min(1.0).max(-1.0); }

// Column-wise mean and population std of an (M x N) ensemble prediction.
void EnsembleStats(const Eigen::MatrixXd& q, Eigen::RowVectorXd& mean, Eigen::RowVectorXd& std) {
  mean = q.colwise().mean();
  std = ((q.rowwise() - mean).array().square().colwise().sum() / q.rows()).sqrt();
}

// d(u)/d(q_m) for u = f(mean) * std with f = identity or abs; zero at the
// std kink.
Eigen::MatrixXd UncertaintyQGrad(const Eigen::MatrixXd& q, const Eigen::RowVectorXd& mean,
                                 const Eigen::RowVectorXd& std, bool abs_mean) {
  const int m_count = static_cast<int>(q.rows());
  Eigen::MatrixXd grad(q.rows(), q.cols());
  for (int c = 0; c < q.cols(); ++c) {
    const double mu = mean[c];
    const double s = std[c];
    const double f = abs_mean ? std::abs(mu) : mu;
    const double fprime = abs_mean ? (mu >= 0.0 ? 1.0 : -1.0) : 1.0;
    for (int m = 0; m < m_count; ++m) {
      double g = fprime * s / m_count;
      if (s > kStdFloor) g += f * (q(m, c) - mu) / (m_count * s);
      grad(m, c) = g;
    }
  }
  return grad;
}

struct BatchScores {
  std::vector<Eigen::MatrixXd> latents;  // H+1 entries, latent x N
  Eigen::MatrixXd rewards;               // H x N
  Eigen::RowVectorXd terminal_q;
  Eigen::MatrixXd uncertainties;  // (H+1) x N, zero when not computed
  Eigen::RowVectorXd objectives;
};

// Latent rollout of all candidate columns with objective evaluation.
BatchScores RolloutScore(const WorldModel& model, const LatentState& z, const std::vector<Eigen::MatrixXd>& actions,
                         double lambda_unc, bool abs_mean, bool with_uncertainty, EvalCounter* counter) {
  const int horizon = static_cast<int>(actions.size()) - 1;
  const int n = static_cast<int>(actions[0].cols());
  const double gamma = model.config.gamma;

  BatchScores out;
  out.latents.resize(horizon + 1);
  out.rewards.resize(horizon, n);
  out.uncertainties = Eigen::MatrixXd::Zero(horizon + 1, n);
  out.latents[0] = z.z.replicate(1, n);

  Eigen::RowVectorXd obj = Eigen::RowVectorXd::Zero(n);
  double disc = 1.0;
  for (int k = 0; k < horizon; ++k) {
    out.rewards.row(k) = RewardBatch(model, out.latents[k], actions[k], counter);
    if (with_uncertainty) {
      const Eigen::MatrixXd q = QBatch(model, out.latents[k], actions[k], counter);
      Eigen::RowVectorXd mean, std;
      EnsembleStats(q, mean, std);
      for (int c = 0; c < n; ++c)
        out.uncertainties(k, c) = (abs_mean ? std::abs(mean[c]) : mean[c]) * std[c];
    }
    out.latents[k + 1] = DynamicsBatch(model, out.latents[k], actions[k], counter);
    obj += disc * out.rewards.row(k) - lambda_unc * out.uncertainties.row(k);
    disc *= gamma;
  }
  const Eigen::MatrixXd q_term = QBatch(model, out.latents[horizon], actions[horizon], counter);
  Eigen::RowVectorXd mean, std;
  EnsembleStats(q_term, mean, std);
  out.terminal_q = mean;
  for (int c = 0; c < n; ++c)
    out.uncertainties(horizon, c) = (abs_mean ? std::abs(mean[c]) : mean[c]) * std[c];
  obj += disc * out.terminal_q - lambda_unc * out.uncertainties.row(horizon);
  out.objectives = obj;
  return out;
}

struct BatchAscent {
  Eigen::RowVectorXd objectives;  // before the update
  Eigen::RowVectorXd grad_norms;
  std::vector<bool> finite;
};

// One gradient-ascent round over all candidate columns; actions updated in
// place (non-finite gradients leave their candidate unchanged).
BatchAscent BatchAscentStep(const WorldModel& model, std::vector<Eigen::MatrixXd>& actions, const LatentState& z,
                            double gamma, double lambda_unc, double alpha, EvalCounter* counter, bool abs_mean,
                            bool stop_grad_uncertainty) {
  const int horizon = static_cast<int>(actions.size()) - 1;
  const int n = static_cast<int>(actions[0].cols());
  const int latent = model.config.latent_dim;
  const int adim = model.config.action_dim;
  const int m_count = model.config.ensemble;
  const bool per_step_q = lambda_unc != 0.0;

  // Forward rollout with tapes.
  std::vector<Eigen::MatrixXd> zs(horizon + 1);
  zs[0] = z.z.replicate(1, n);
  std::vector<GradTape> tape_dyn(horizon), tape_rew(horizon);
  std::vector<std::vector<GradTape>> tape_q(horizon + 1);
  std::vector<Eigen::MatrixXd> q_vals(horizon + 1);
  Eigen::MatrixXd rewards(horizon, n);

  for (int k = 0; k < horizon; ++k) {
    const Eigen::MatrixXd x = [&] {
      Eigen::MatrixXd xx(latent + adim, n);
      xx.topRows(latent) = zs[k];
      xx.bottomRows(adim) = actions[k];
      return xx;
    }();
    if (counter) {
      counter->dynamics_evals += n;
      counter->reward_evals += n;
    }
    zs[k + 1] = Forward(model.dynamics, x, &tape_dyn[k]);
    rewards.row(k) = Forward(model.reward, x, &tape_rew[k]).row(0);
    if (per_step_q) {
      tape_q[k].resize(m_count);
      q_vals[k].resize(m_count, n);
      if (counter) counter->q_evals += static_cast<long>(m_count) * n;
      for (int m = 0; m < m_count; ++m)
        q_vals[k].row(m) = Forward(model.q_ensemble[m], x, &tape_q[k][m]).row(0);
    }
  }
  Eigen::MatrixXd x_term(latent + adim, n);
  x_term.topRows(latent) = zs[horizon];
  x_term.bottomRows(adim) = actions[horizon];
  tape_q[horizon].resize(m_count);
  q_vals[horizon].resize(m_count, n);
  if (counter) counter->q_evals += static_cast<long>(m_count) * n;
  for (int m = 0; m < m_count; ++m)
    q_vals[horizon].row(m) = Forward(model.q_ensemble[m], x_term, &tape_q[horizon][m]).row(0);

  // Objective.
  std::vector<Eigen::RowVectorXd> u_mean(horizon + 1), u_std(horizon + 1);
  Eigen::RowVectorXd obj = Eigen::RowVectorXd::Zero(n);
  double disc = 1.0;
  for (int k = 0; k < horizon; ++k) {
    obj += disc * rewards.row(k);
    if (per_step_q) {
      EnsembleStats(q_vals[k], u_mean[k], u_std[k]);
      for (int c = 0; c < n; ++c)
        obj[c] -= lambda_unc * (abs_mean ? std::abs(u_mean[k][c]) : u_mean[k][c]) * u_std[k][c];
    }
    disc *= gamma;
  }
  EnsembleStats(q_vals[horizon], u_mean[horizon], u_std[horizon]);
  obj += disc * u_mean[horizon];
  if (lambda_unc != 0.0)
    for (int c = 0; c < n; ++c)
      obj[c] -= lambda_unc * (abs_mean ? std::abs(u_mean[horizon][c]) : u_mean[horizon][c]) * u_std[horizon][c];

  // Reverse pass: seed gradients of J and collect d(J)/d(actions).
  std::vector<Eigen::MatrixXd> da(horizon + 1);
  const double disc_term = disc;  // gamma^H
  Eigen::MatrixXd dx_term = Eigen::MatrixXd::Zero(latent + adim, n);
  {
    Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(m_count, n, disc_term / m_count);
    if (lambda_unc != 0.0 && !stop_grad_uncertainty)
      dq -= lambda_unc * UncertaintyQGrad(q_vals[horizon], u_mean[horizon], u_std[horizon], abs_mean);
    for (int m = 0; m < m_count; ++m)
      dx_term += Backward(model.q_ensemble[m], tape_q[horizon][m], dq.row(m));
  }
  da[horizon] = dx_term.bottomRows(adim);
  Eigen::MatrixXd dz = dx_term.topRows(latent);

  for (int k = horizon - 1; k >= 0; --k) {
    const double g_k = std::pow(gamma, k);
    Eigen::MatrixXd dx = Backward(model.dynamics, tape_dyn[k], dz);
    dx += Backward(model.reward, tape_rew[k], Eigen::MatrixXd::Constant(1, n, g_k));
    if (per_step_q && !stop_grad_uncertainty) {
      const Eigen::MatrixXd dq = -lambda_unc * UncertaintyQGrad(q_vals[k], u_mean[k], u_std[k], abs_mean);
      for (int m = 0; m < m_count; ++m) dx += Backward(model.q_ensemble[m], tape_q[k][m], dq.row(m));
    } else if (per_step_q) {
      for (int m = 0; m < m_count; ++m) tape_q[k][m].consumed = true;
    }
    dz = dx.topRows(latent);
    da[k] = dx.bottomRows(adim);
  }

  // Per-candidate norm, finiteness, update with clipping.
  BatchAscent out;
  out.objectives = obj;
  out.grad_norms.resize(n);
  out.finite.assign(n, true);
  for (int c = 0; c < n; ++c) {
    double sq = 0.0;
    bool finite = true;
    for (int k = 0; k <= horizon; ++k) {
      const double nn = da[k].col(c).squaredNorm();
      sq += nn;
      finite = finite && std::isfinite(nn);
    }
    out.grad_norms[c] = std::sqrt(sq);
    out.finite[c] = finite;
    if (!finite) continue;
    for (int k = 0; k <= horizon; ++k)
      actions[k].col(c) = (actions[k].col(c) + alpha * da[k].col(c)).array().min(1.0).max(-1.0);
  }
  return out;
}

std::vector<int> TopKIndices(const Eigen::RowVectorXd& scores, int k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto better = [&](int a, int b) {
    const double sa = std::isfinite(scores[a]) ? scores[a] : -std::numeric_limits<double>::infinity();
    const double sb = std::isfinite(scores[b]) ? scores[b] : -std::numeric_limits<double>::infinity();
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
  idx.resize(k);
  return idx;
}

CandidatePlan PlanFromScores(const BatchScores& scores, const std::vector<Eigen::MatrixXd>& actions, int col) {
  const int horizon = static_cast<int>(actions.size()) - 1;
  const int adim = static_cast<int>(actions[0].rows());
  CandidatePlan plan;
  plan.actions.resize(horizon + 1, adim);
  plan.latents.resize(scores.latents[0].rows(), horizon + 1);
  for (int k = 0; k <= horizon; ++k) {
    plan.actions.row(k) = actions[k].col(col).transpose();
    plan.latents.col(k) = scores.latents[k].col(col);
  }
  plan.rewards = scores.rewards.col(col);
  plan.terminal_q = scores.terminal_q[col];
  plan.uncertainties = scores.uncertainties.col(col);
  plan.objective = scores.objectives[col];
  plan.finite = std::isfinite(plan.objective);
  return plan;
}

Eigen::VectorXd FallbackAction(const WorldModel& model, const LatentState& z, EvalCounter* counter) {
  Rng unused(0);
  return PolicySample(model, z, unused, /*deterministic=*/true, counter).first.a;
}

}  // namespace

void PlannerConfig::Validate() const {
  if (horizon < 1) throw std::invalid_argument("PlannerConfig: horizon must be >= 1");
  if (iterations < 0) throw std::invalid_argument("PlannerConfig: iterations must be >= 0");
  if (candidates < 1) throw std::invalid_argument("PlannerConfig: candidates must be >= 1");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("PlannerConfig: rho must be in [0, 1]");
  if (lambda_unc < 0.0) throw std::invalid_argument("PlannerConfig: lambda_unc must be >= 0");
  if (proposal != "policy" && proposal != "gaussian")
    throw std::invalid_argument("PlannerConfig: unknown proposal kind");
  if (mppi.elites > mppi.population || mppi.elites < 1)
    throw std::invalid_argument("PlannerConfig: mppi elites must be in [1, population]");
  if (mppi.policy_samples < 0 || mppi.policy_samples > mppi.population)
    throw std::invalid_argument("PlannerConfig: mppi policy_samples must be in [0, population]");
}

CandidateSet RolloutPolicyCandidates(const WorldModel& model, const LatentState& z, const PlannerConfig& config,
                                     Rng& rng, EvalCounter* counter) {
  const int n = config.candidates;
  const int horizon = config.horizon;
  const int adim = model.config.action_dim;
  CandidateSet set;
  set.actions.resize(horizon + 1);

  if (config.proposal == "gaussian") {
    for (int k = 0; k <= horizon; ++k) {
      set.actions[k] = config.gaussian_std * rng.NormalMatrix(adim, n);
      ClipInPlace(set.actions[k]);
    }
    return set;
  }

  set.latents.resize(horizon + 1);
  set.latents[0] = z.z.replicate(1, n);
  for (int k = 0; k <= horizon; ++k) {
    PolicyBatchSample s =
        PolicySampleBatch(model, set.latents[k], rng, config.deterministic_candidates, counter);
    if (config.deterministic_candidates && config.sigma_perturb > 0.0) {
      // Candidate 0 stays the greedy rollout; the rest perturb it.
      for (int c = 1; c < n; ++c)
        s.action.col(c) += config.sigma_perturb * rng.NormalVector(adim);
      ClipInPlace(s.action);
    }
    set.actions[k] = std::move(s.action);
    if (k < horizon) set.latents[k + 1] = DynamicsBatch(model, set.latents[k], set.actions[k], counter);
  }
  return set;
}

void InitWithReuse(CandidateSet& candidates, const ReusePlan& reuse, double rho) {
  const int horizon = static_cast<int>(candidates.actions.size()) - 1;
  const int n = static_cast<int>(candidates.actions[0].cols());
  if (reuse.empty() || rho == 0.0) {
    for (auto& a : candidates.actions) ClipInPlace(a);
    return;
  }
  if (static_cast<int>(reuse.sequences.size()) != n) throw std::invalid_argument("InitWithReuse: candidate count mismatch");
  for (int c = 0; c < n; ++c) {
    const Eigen::MatrixXd& prev = reuse.sequences[c];
    if (prev.rows() != horizon + 1 || prev.cols() != candidates.actions[0].rows())
      throw std::invalid_argument("InitWithReuse: reuse shape mismatch");
    for (int k = 0; k <= horizon; ++k) {
      const int shifted = std::min(k + 1, horizon);  // last slot copies the final shifted action
      candidates.actions[k].col(c) =
          rho * prev.row(shifted).transpose() + (1.0 - rho) * candidates.actions[k].col(c);
    }
  }
  for (auto& a : candidates.actions) ClipInPlace(a);
}

double Objective(const CandidatePlan& plan, double gamma, double lambda_unc) {
  const int horizon = static_cast<int>(plan.rewards.size());
  double j = 0.0;
  double disc = 1.0;
  for (int k = 0; k < horizon; ++k) {
    j += disc * plan.rewards[k] - lambda_unc * plan.uncertainties[k];
    disc *= gamma;
  }
  return j + disc * plan.terminal_q - lambda_unc * plan.uncertainties[horizon];
}

std::vector<CandidatePlan> ScoreCandidates(const WorldModel& model, const LatentState& z,
                                           const std::vector<Eigen::MatrixXd>& actions, double lambda_unc,
                                           bool abs_mean, bool with_uncertainty, EvalCounter* counter) {
  const BatchScores scores = RolloutScore(model, z, actions, lambda_unc, abs_mean, with_uncertainty, counter);
  std::vector<CandidatePlan> plans;
  const int n = static_cast<int>(actions[0].cols());
  plans.reserve(n);
  for (int c = 0; c < n; ++c) plans.push_back(PlanFromScores(scores, actions, c));
  return plans;
}

AscentStep GradAscentStep(const WorldModel& model, Eigen::MatrixXd& actions, const LatentState& z, double gamma,
                          double lambda_unc, double alpha, EvalCounter* counter, bool abs_mean,
                          bool stop_grad_uncertainty) {
  if (gamma != model.config.gamma)
    throw std::invalid_argument("GradAscentStep: gamma must match the model discount");
  const int horizon = static_cast<int>(actions.rows()) - 1;
  std::vector<Eigen::MatrixXd> cols(horizon + 1);
  for (int k = 0; k <= horizon; ++k) cols[k] = actions.row(k).transpose();
  BatchAscent r = BatchAscentStep(model, cols, z, gamma, lambda_unc, alpha, counter, abs_mean, stop_grad_uncertainty);
  for (int k = 0; k <= horizon; ++k) actions.row(k) = cols[k].col(0).transpose();
  return {r.objectives[0], r.grad_norms[0], r.finite[0]};
}

PlanResult DreamMpcPlan(const WorldModel& model, const LatentState& z, const PlannerConfig& config,
                        const ReusePlan& reuse, Rng& rng, EvalCounter& counter) {
  config.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n = config.candidates;
  const int horizon = config.horizon;
  const double gamma = model.config.gamma;

  PlanResult result;
  result.diagnostics.planner = "dream_mpc";

  const EvalCounter before_gen = counter;
  CandidateSet candidates = RolloutPolicyCandidates(model, z, config, rng, &counter);
  result.diagnostics.generation = counter - before_gen;

  InitWithReuse(candidates, reuse, config.rho);

  const EvalCounter before_opt = counter;
  std::vector<double> grad_norms;
  for (int i = 0; i < config.iterations; ++i) {
    BatchAscent step = BatchAscentStep(model, candidates.actions, z, gamma, config.lambda_unc, config.alpha,
                                       &counter, config.uncertainty_abs_mean, config.uncertainty_stop_grad);
    if (i == 0)
      result.diagnostics.initial_objectives.assign(step.objectives.data(), step.objectives.data() + n);
    for (int c = 0; c < n; ++c) grad_norms.push_back(step.grad_norms[c]);
  }
  result.diagnostics.optimization = counter - before_opt;

  const EvalCounter before_rescore = counter;
  std::vector<CandidatePlan> plans = ScoreCandidates(model, z, candidates.actions, config.lambda_unc,
                                                     config.uncertainty_abs_mean, /*with_uncertainty=*/true,
                                                     &counter);
  result.diagnostics.rescoring = counter - before_rescore;

  for (const CandidatePlan& p : plans) result.diagnostics.final_objectives.push_back(p.objective);
  if (config.iterations == 0) result.diagnostics.initial_objectives = result.diagnostics.final_objectives;

  if (!grad_norms.empty()) {
    result.diagnostics.grad_norm_mean =
        std::accumulate(grad_norms.begin(), grad_norms.end(), 0.0) / grad_norms.size();
    result.diagnostics.grad_norm_max = *std::max_element(grad_norms.begin(), grad_norms.end());
  }

  int best = -1;
  for (int c = 0; c < n; ++c) {
    if (!plans[c].finite) continue;
    if (best < 0 || plans[c].objective > plans[best].objective) best = c;
  }
  if (best < 0) {
    // Every candidate blew up; fall back to the deterministic policy action.
    result.action = FallbackAction(model, z, &counter);
    result.planned_actions = result.action.transpose().replicate(horizon + 1, 1);
    result.diagnostics.fallback = true;
  } else {
    result.action = plans[best].actions.row(0).transpose();
    result.planned_actions = plans[best].actions;
    result.chosen = plans[best];
    result.diagnostics.chosen_index = best;
    result.diagnostics.chosen_objective = plans[best].objective;
    result.reuse.sequences.reserve(n);
    for (const CandidatePlan& p : plans) result.reuse.sequences.push_back(p.actions);
  }
  result.diagnostics.plan_micros =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

PlanResult MppiPlan(const WorldModel& model, const LatentState& z, const PlannerConfig& config,
                    const MppiWarmStart& warm_start, Rng& rng, EvalCounter& counter, bool deterministic) {
  config.Validate();
  const auto t0 = std::chrono::steady_clock::now();
  const MppiConfig& mp = config.mppi;
  const int horizon = config.horizon;
  const int adim = model.config.action_dim;
  const int pop = mp.population;
  const int n_pi = mp.policy_samples;

  PlanResult result;
  result.diagnostics.planner = "mppi";

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(horizon + 1, adim);
  Eigen::MatrixXd std_dev = Eigen::MatrixXd::Constant(horizon + 1, adim, mp.std_max);
  if (!warm_start.empty()) {
    // Previous solution shifted by one; the vacated slot restarts wide.
    mean.topRows(horizon) = warm_start.mean.bottomRows(horizon);
    std_dev.topRows(horizon) = warm_start.std.bottomRows(horizon);
  }

  const EvalCounter before_gen = counter;
  CandidateSet pi_rollouts;
  if (n_pi > 0) {
    PlannerConfig pc = config;
    pc.candidates = n_pi;
    pc.proposal = "policy";
    pc.deterministic_candidates = false;
    pi_rollouts = RolloutPolicyCandidates(model, z, pc, rng, &counter);
  }
  result.diagnostics.generation = counter - before_gen;

  const EvalCounter before_opt = counter;
  const bool with_unc = mp.lambda_unc != 0.0;
  bool degenerate = false;
  for (int iter = 0; iter < mp.iterations; ++iter) {
    std::vector<Eigen::MatrixXd> pop_actions(horizon + 1);
    for (int k = 0; k <= horizon; ++k) {
      pop_actions[k].resize(adim, pop);
      if (n_pi > 0) pop_actions[k].leftCols(n_pi) = pi_rollouts.actions[k];
      for (int c = n_pi; c < pop; ++c)
        for (int i = 0; i < adim; ++i)
          pop_actions[k](i, c) = Clip(mean(k, i) + std_dev(k, i) * rng.Normal());
    }
    const BatchScores scores = RolloutScore(model, z, pop_actions, mp.lambda_unc, config.uncertainty_abs_mean,
                                            with_unc, &counter);
    const std::vector<int> elites = TopKIndices(scores.objectives, mp.elites);
    const double best = scores.objectives[elites[0]];
    if (!std::isfinite(best)) {
      degenerate = true;
      break;
    }
    result.diagnostics.final_objectives.push_back(best);

    Eigen::VectorXd weights(mp.elites);
    for (int e = 0; e < mp.elites; ++e) {
      const double s = scores.objectives[elites[e]];
      weights[e] = std::isfinite(s) ? std::exp((s - best) / mp.temperature) : 0.0;
    }
    weights /= weights.sum();

    for (int k = 0; k <= horizon; ++k) {
      for (int i = 0; i < adim; ++i) {
        double wm = 0.0;
        for (int e = 0; e < mp.elites; ++e) wm += weights[e] * pop_actions[k](i, elites[e]);
        double wv = 0.0;
        for (int e = 0; e < mp.elites; ++e) {
          const double d = pop_actions[k](i, elites[e]) - wm;
          wv += weights[e] * d * d;
        }
        mean(k, i) = wm;
        std_dev(k, i) = std::min(mp.std_max, std::max(mp.std_min, std::sqrt(wv)));
      }
    }
    result.diagnostics.chosen_objective = best;
  }
  result.diagnostics.optimization = counter - before_opt;

  if (degenerate) {
    result.action = FallbackAction(model, z, &counter);
    result.planned_actions = result.action.transpose().replicate(horizon + 1, 1);
    result.diagnostics.fallback = true;
  } else {
    result.action.resize(adim);
    for (int i = 0; i < adim; ++i) {
      const double a = deterministic ? mean(0, i) : mean(0, i) + std_dev(0, i) * rng.Normal();
      result.action[i] = Clip(a);
    }
    result.planned_actions = mean;
    result.warm_start = {mean, std_dev};
  }
  result.diagnostics.plan_micros =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

Eigen::VectorXd PolicyOnlyAct(const WorldModel& model, const LatentState& z, bool deterministic, Rng& rng,
                              EvalCounter* counter) {
  return PolicySample(model, z, rng, deterministic, counter).first.a;
}

}  // namespace dmpc
