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

#include "dmpc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dmpc/csv.hpp"

namespace dmpc {

namespace {

std::vector<double> AverageRanks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double Pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

// Mean ensemble Q with a deterministic policy action at an encoded state.
double TerminalReestimate(const WorldModel& model, const Eigen::VectorXd& obs) {
  const LatentState z = Encode(model, obs);
  Rng unused(0);
  const Action a = PolicySample(model, z, unused, /*deterministic=*/true).first;
  return QValues(model, z, a, nullptr).mean();
}

// Open-loop plan behind a planner's chosen action, scored at lambda_unc = 0.
double PredictedPlanReturn(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                           const LatentState& z, const ActOutcome& act) {
  if (planner == "dream_mpc" && act.chosen) return Objective(*act.chosen, model.config.gamma, 0.0);
  std::vector<Eigen::MatrixXd> actions(static_cast<size_t>(config.horizon) + 1);
  if (planner == "mppi") {
    for (int k = 0; k <= config.horizon; ++k) actions[static_cast<size_t>(k)] = act.planned_actions.row(k).transpose();
  } else {
    // Policy-only: greedy rollout from z.
    PlannerConfig pc = config;
    pc.candidates = 1;
    pc.deterministic_candidates = true;
    pc.sigma_perturb = 0.0;
    pc.proposal = "policy";
    Rng unused(0);
    actions = RolloutPolicyCandidates(model, z, pc, unused, nullptr).actions;
  }
  const auto plans = ScoreCandidates(model, z, actions, 0.0, false, /*with_uncertainty=*/false, nullptr);
  return plans[0].objective;
}

}  // namespace

double Esnr(const Eigen::MatrixXd& samples) {
  const int k = static_cast<int>(samples.rows());
  if (k < 2) throw std::invalid_argument("Esnr: need at least two samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::RowVectorXd var = (samples.rowwise() - mean).array().square().colwise().sum() / (k - 1);
  const double mean_sq = mean.array().square().sum();
  const double var_sum = var.sum();
  if (var_sum == 0.0) {
    if (mean_sq == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::numeric_limits<double>::infinity();
  }
  return mean_sq / var_sum;
}

double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("Spearman: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("Spearman: need at least three points");
  return Pearson(AverageRanks(x), AverageRanks(y));
}

std::vector<Eigen::MatrixXd> ModelReturnGrad(const WorldModel& model, const LatentState& z,
                                             const std::vector<Eigen::MatrixXd>& actions) {
  const int horizon = static_cast<int>(actions.size());
  if (horizon < 1) throw std::invalid_argument("ModelReturnGrad: empty action sequence");
  const int n = static_cast<int>(actions[0].cols());
  const int latent = model.config.latent_dim;
  const int adim = model.config.action_dim;

  std::vector<GradTape> tape_dyn(horizon), tape_rew(horizon);
  Eigen::MatrixXd zcur = z.z.replicate(1, n);
  for (int k = 0; k < horizon; ++k) {
    Eigen::MatrixXd x(latent + adim, n);
    x.topRows(latent) = zcur;
    x.bottomRows(adim) = actions[static_cast<size_t>(k)];
    zcur = Forward(model.dynamics, x, &tape_dyn[k]);
    Forward(model.reward, x, &tape_rew[k]);
  }

  std::vector<Eigen::MatrixXd> grads(horizon);
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(latent, n);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, n);
  for (int k = horizon - 1; k >= 0; --k) {
    Eigen::MatrixXd dx = Backward(model.reward, tape_rew[k], ones);
    if (k < horizon - 1)
      dx += Backward(model.dynamics, tape_dyn[k], dz);
    else
      tape_dyn[k].consumed = true;
    dz = dx.topRows(latent);
    grads[static_cast<size_t>(k)] = dx.bottomRows(adim);
  }
  return grads;
}

std::vector<GradientStudyRow> GradientStudy(const WorldModel* model, const Env& env, const std::string& source,
                                            const std::string& planner, const std::vector<int>& horizons,
                                            const std::vector<uint64_t>& seeds, int samples_per_cell,
                                            double gaussian_std, const std::string& csv_path) {
  if (source != "ground_truth" && source != "learned_model")
    throw std::invalid_argument("GradientStudy: source must be ground_truth or learned_model");
  if (planner != "grad_mpc_gaussian" && planner != "dream_mpc")
    throw std::invalid_argument("GradientStudy: planner must be grad_mpc_gaussian or dream_mpc");
  if (samples_per_cell < 2) throw std::invalid_argument("GradientStudy: need >= 2 samples per cell");
  if ((source == "learned_model" || planner == "dream_mpc") && model == nullptr)
    throw std::invalid_argument("GradientStudy: a model checkpoint is required for this condition");

  const int adim = env.spec().action_dim;
  std::vector<GradientStudyRow> rows;
  for (const int horizon : horizons) {
    for (const uint64_t seed : seeds) {
      Rng cell_rng(seed);
      auto e = env.Clone();
      Rng reset_rng = cell_rng.Substream(0);
      const Eigen::VectorXd obs = e->Reset(reset_rng);
      const Eigen::VectorXd state = e->State();

      // Candidate action sequences, one column per sample.
      Rng sample_rng = cell_rng.Substream(1);
      std::vector<Eigen::MatrixXd> actions(static_cast<size_t>(horizon));
      if (planner == "grad_mpc_gaussian") {
        for (int k = 0; k < horizon; ++k) {
          actions[static_cast<size_t>(k)] =
              (gaussian_std * sample_rng.NormalMatrix(adim, samples_per_cell)).array().min(1.0).max(-1.0);
        }
      } else {
        PlannerConfig pc;
        pc.horizon = horizon;
        pc.candidates = samples_per_cell;
        pc.proposal = "policy";
        const LatentState z = Encode(*model, obs);
        CandidateSet set = RolloutPolicyCandidates(*model, z, pc, sample_rng, nullptr);
        for (int k = 0; k < horizon; ++k) actions[static_cast<size_t>(k)] = set.actions[static_cast<size_t>(k)];
      }

      // Per-sample gradients, flattened to rows of (horizon * adim).
      Eigen::MatrixXd grads(samples_per_cell, horizon * adim);
      if (source == "ground_truth") {
        for (int s = 0; s < samples_per_cell; ++s) {
          Eigen::MatrixXd seq(horizon, adim);
          for (int k = 0; k < horizon; ++k) seq.row(k) = actions[static_cast<size_t>(k)].col(s).transpose();
          const Eigen::MatrixXd g = TrueRolloutGrad(env, state, seq);
          for (int k = 0; k < horizon; ++k)
            for (int i = 0; i < adim; ++i) grads(s, k * adim + i) = g(k, i);
        }
      } else {
        const LatentState z = Encode(*model, obs);
        const std::vector<Eigen::MatrixXd> g = ModelReturnGrad(*model, z, actions);
        for (int s = 0; s < samples_per_cell; ++s)
          for (int k = 0; k < horizon; ++k)
            for (int i = 0; i < adim; ++i) grads(s, k * adim + i) = g[static_cast<size_t>(k)](i, s);
      }

      GradientStudyRow row;
      row.env = env.spec().name;
      row.source = source;
      row.planner = planner;
      row.horizon = horizon;
      row.seed = seed;
      row.samples = samples_per_cell;
      row.esnr = Esnr(grads);
      row.grad_norm_mean = grads.rowwise().norm().mean();
      const Eigen::RowVectorXd mean = grads.colwise().mean();
      row.mean_sq_sum = mean.array().square().sum();
      row.var_sum = ((grads.rowwise() - mean).array().square().colwise().sum() / (samples_per_cell - 1)).sum();
      rows.push_back(row);
    }
  }

  if (!csv_path.empty()) {
    CsvWriter csv(csv_path, {"env", "source", "planner", "horizon", "seed", "samples", "esnr", "grad_norm_mean",
                             "mean_sq_sum", "var_sum"});
    for (const auto& r : rows)
      csv.Row({r.env, r.source, r.planner, std::to_string(r.horizon), std::to_string(r.seed),
               std::to_string(r.samples), FormatDouble(r.esnr), FormatDouble(r.grad_norm_mean),
               FormatDouble(r.mean_sq_sum), FormatDouble(r.var_sum)});
  }
  return rows;
}

ValueStudyResult ValueStudy(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                            const Env& env, int episodes, uint64_t seed, bool min_estimate,
                            const std::string& csv_path) {
  ValueStudyResult result;
  const Rng root(seed);
  const double gamma = model.config.gamma;

  for (int ep = 0; ep < episodes; ++ep) {
    Rng env_rng = root.Substream(2 * static_cast<uint64_t>(ep));
    Rng plan_rng = root.Substream(2 * static_cast<uint64_t>(ep) + 1);
    auto e = env.Clone();
    Eigen::VectorXd obs = e->Reset(env_rng);
    PlannerSession session;
    EvalCounter counter;

    ValueStudyEpisode row;
    row.episode = ep;
    double disc = 1.0;
    double qstd_sum = 0.0;
    long steps = 0;
    bool first = true;
    while (true) {
      const LatentState z = Encode(model, obs);
      ActOutcome act = PlanAction(model, planner, config, z, session, plan_rng, counter, /*deterministic=*/true);
      const Eigen::VectorXd q = QValues(model, z, Action{act.action}, nullptr);
      if (first) {
        row.value_estimate = min_estimate ? q.minCoeff() : q.mean();
        first = false;
      }
      const double mu = q.mean();
      qstd_sum += std::sqrt((q.array() - mu).square().sum() / q.size());
      ++steps;
      StepResult sr = e->Step(act.action);
      row.episode_return += disc * sr.reward;
      disc *= gamma;
      obs = sr.observation;
      if (sr.done) break;
    }
    row.abs_error = std::abs(row.value_estimate - row.episode_return);
    row.q_std_mean = steps > 0 ? qstd_sum / static_cast<double>(steps) : 0.0;
    result.episodes.push_back(row);
  }

  // Quartile bin ids over the absolute errors.
  if (!result.episodes.empty()) {
    std::vector<double> errors;
    for (const auto& e : result.episodes) errors.push_back(e.abs_error);
    const double q1 = Percentile(errors, 25.0);
    const double q2 = Percentile(errors, 50.0);
    const double q3 = Percentile(errors, 75.0);
    for (auto& e : result.episodes)
      e.error_quartile = e.abs_error <= q1 ? 0 : (e.abs_error <= q2 ? 1 : (e.abs_error <= q3 ? 2 : 3));
  }

  if (static_cast<int>(result.episodes.size()) >= 3) {
    std::vector<double> g, eq, qs;
    for (const auto& e : result.episodes) {
      g.push_back(e.episode_return);
      eq.push_back(e.abs_error);
      qs.push_back(e.q_std_mean);
    }
    result.spearman_qstd_return = Spearman(qs, g);
    result.spearman_error_return = Spearman(eq, g);
    result.spearman_qstd_error = Spearman(qs, eq);
    result.correlations_defined = true;
  } else {
    result.spearman_qstd_return = std::numeric_limits<double>::quiet_NaN();
    result.spearman_error_return = std::numeric_limits<double>::quiet_NaN();
    result.spearman_qstd_error = std::numeric_limits<double>::quiet_NaN();
  }

  if (!csv_path.empty()) {
    CsvWriter csv(csv_path, {"episode", "discounted_return", "value_estimate", "abs_error", "q_std_mean",
                             "error_quartile", "spearman_qstd_return", "spearman_error_return",
                             "spearman_qstd_error"});
    for (const auto& e : result.episodes)
      csv.Row({std::to_string(e.episode), FormatDouble(e.episode_return), FormatDouble(e.value_estimate),
               FormatDouble(e.abs_error), FormatDouble(e.q_std_mean), std::to_string(e.error_quartile),
               FormatDouble(result.spearman_qstd_return), FormatDouble(result.spearman_error_return),
               FormatDouble(result.spearman_qstd_error)});
  }
  return result;
}

ExploitationStudyResult ExploitationStudy(const WorldModel& model, const std::string& planner,
                                          const PlannerConfig& config, const Env& env, int episodes,
                                          uint64_t seed, const std::string& csv_path) {
  ExploitationStudyResult result;
  const Rng root(seed);
  const double gamma = model.config.gamma;
  const int horizon = config.horizon;

  for (int ep = 0; ep < episodes; ++ep) {
    Rng env_rng = root.Substream(2 * static_cast<uint64_t>(ep));
    Rng plan_rng = root.Substream(2 * static_cast<uint64_t>(ep) + 1);
    auto e = env.Clone();
    Eigen::VectorXd obs = e->Reset(env_rng);
    PlannerSession session;
    EvalCounter counter;

    std::vector<double> predicted, rewards;
    std::vector<Eigen::VectorXd> observations{obs};
    while (true) {
      const LatentState z = Encode(model, obs);
      ActOutcome act = PlanAction(model, planner, config, z, session, plan_rng, counter, /*deterministic=*/true);
      predicted.push_back(PredictedPlanReturn(model, planner, config, z, act));
      StepResult sr = e->Step(act.action);
      rewards.push_back(sr.reward);
      obs = sr.observation;
      observations.push_back(obs);
      if (sr.done) break;
    }

    const long t_max = static_cast<long>(rewards.size()) - horizon;
    for (long t = 0; t <= t_max; ++t) {
      double realized = 0.0;
      double disc = 1.0;
      for (int k = 0; k < horizon; ++k) {
        realized += disc * rewards[static_cast<size_t>(t + k)];
        disc *= gamma;
      }
      realized += disc * TerminalReestimate(model, observations[static_cast<size_t>(t + horizon)]);
      ExploitationRow row;
      row.episode = ep;
      row.step = t;
      row.predicted = predicted[static_cast<size_t>(t)];
      row.realized = realized;
      row.gap = row.predicted - realized;
      result.rows.push_back(row);
    }
  }

  if (!result.rows.empty()) {
    double sum = 0.0;
    for (const auto& r : result.rows) sum += r.gap;
    result.mean_gap = sum / static_cast<double>(result.rows.size());
  }

  if (!csv_path.empty()) {
    CsvWriter csv(csv_path, {"episode", "step", "predicted", "realized", "gap"});
    for (const auto& r : result.rows)
      csv.Row({std::to_string(r.episode), std::to_string(r.step), FormatDouble(r.predicted),
               FormatDouble(r.realized), FormatDouble(r.gap)});
  }
  return result;
}

std::vector<TimingRow> TimingReport(const WorldModel& model, const std::vector<std::string>& planners,
                                    const PlannerConfig& config, const Env& env, int episodes, uint64_t seed,
                                    int warmup, const std::string& csv_path) {
  std::vector<TimingRow> rows;
  for (const std::string& planner : planners) {
    const Rng root(Rng::SplitMix64(seed) ^ std::hash<std::string>{}(planner));
    std::vector<double> micros;
    long calls = 0;
    for (int ep = 0; ep < episodes; ++ep) {
      Rng env_rng = root.Substream(2 * static_cast<uint64_t>(ep));
      Rng plan_rng = root.Substream(2 * static_cast<uint64_t>(ep) + 1);
      auto e = env.Clone();
      Eigen::VectorXd obs = e->Reset(env_rng);
      PlannerSession session;
      EvalCounter counter;
      while (true) {
        const LatentState z = Encode(model, obs);
        ActOutcome act =
            PlanAction(model, planner, config, z, session, plan_rng, counter, /*deterministic=*/true);
        if (++calls > warmup) micros.push_back(static_cast<double>(act.diagnostics.plan_micros));
        StepResult sr = e->Step(act.action);
        obs = sr.observation;
        if (sr.done) break;
      }
    }
    TimingRow row;
    row.planner = planner;
    row.samples = static_cast<long>(micros.size());
    if (!micros.empty()) {
      row.mean_micros = std::accumulate(micros.begin(), micros.end(), 0.0) / micros.size();
      double sq = 0.0;
      for (double m : micros) sq += (m - row.mean_micros) * (m - row.mean_micros);
      row.std_micros = std::sqrt(sq / micros.size());
    }
    rows.push_back(row);
  }

  if (!csv_path.empty()) {
    CsvWriter csv(csv_path, {"planner", "mean_micros", "std_micros", "samples"});
    for (const auto& r : rows)
      csv.Row({r.planner, FormatDouble(r.mean_micros), FormatDouble(r.std_micros), std::to_string(r.samples)});
  }
  return rows;
}

}  // namespace dmpc
