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

#include "dmpc/agent.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmpc/csv.hpp"

namespace dmpc {

namespace {

namespace fs = std::filesystem;

std::string JoinObjectives(const std::vector<double>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += FormatDouble(values[i]);
  }
  return out;
}

long NowMicros(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ReplayBuffer::ReplayBuffer(long capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  ring_.reserve(static_cast<size_t>(capacity));
}

void ReplayBuffer::Add(const Eigen::VectorXd& obs, const Eigen::VectorXd& action, double reward,
                       const Eigen::VectorXd& next_obs, long episode) {
  Transition t{obs, action, reward, next_obs, episode};
  if (count_ < capacity_) {
    ring_.push_back(std::move(t));
    ++count_;
    next_ = count_ % capacity_;
  } else {
    ring_[static_cast<size_t>(next_)] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

const ReplayBuffer::Transition& ReplayBuffer::At(long logical) const {
  // Logical 0 = oldest live transition.
  const long physical = count_ < capacity_ ? logical : (next_ + logical) % capacity_;
  return ring_[static_cast<size_t>(physical)];
}

bool ReplayBuffer::ValidStart(long logical, int horizon) const {
  if (logical + horizon > count_) return false;
  const long episode = At(logical).episode;
  for (int k = 1; k < horizon; ++k)
    if (At(logical + k).episode != episode) return false;
  return true;
}

bool ReplayBuffer::CanSample(int horizon) const {
  for (long p = 0; p + horizon <= count_; ++p)
    if (ValidStart(p, horizon)) return true;
  return false;
}

SequenceBatch ReplayBuffer::SampleSequences(int horizon, int batch, Rng& rng) const {
  const long max_start = count_ - horizon;
  if (max_start < 0) throw std::runtime_error("ReplayBuffer: not enough data");
  const int obs_dim = static_cast<int>(At(0).obs.size());
  const int act_dim = static_cast<int>(At(0).action.size());

  SequenceBatch out;
  out.obs.assign(static_cast<size_t>(horizon) + 1, Eigen::MatrixXd(obs_dim, batch));
  out.actions.assign(static_cast<size_t>(horizon), Eigen::MatrixXd(act_dim, batch));
  out.rewards.assign(static_cast<size_t>(horizon), Eigen::RowVectorXd(batch));

  for (int b = 0; b < batch; ++b) {
    long start = -1;
    // Rejection sampling keeps the distribution uniform over valid starts.
    for (int attempt = 0; attempt < 256 && start < 0; ++attempt) {
      const long p = static_cast<long>(rng.NextU64() % static_cast<uint64_t>(max_start + 1));
      if (ValidStart(p, horizon)) start = p;
    }
    if (start < 0) {
      // Adversarially fragmented buffer: enumerate the valid starts.
      std::vector<long> valid;
      for (long p = 0; p <= max_start; ++p)
        if (ValidStart(p, horizon)) valid.push_back(p);
      if (valid.empty()) throw std::runtime_error("ReplayBuffer: no in-episode window of requested length");
      start = valid[static_cast<size_t>(rng.NextU64() % valid.size())];
    }
    for (int k = 0; k < horizon; ++k) {
      const Transition& t = At(start + k);
      out.obs[static_cast<size_t>(k)].col(b) = t.obs;
      out.actions[static_cast<size_t>(k)].col(b) = t.action;
      out.rewards[static_cast<size_t>(k)][b] = t.reward;
    }
    out.obs[static_cast<size_t>(horizon)].col(b) = At(start + horizon - 1).next_obs;
  }
  return out;
}

ActOutcome PlanAction(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                      const LatentState& z, PlannerSession& session, Rng& rng, EvalCounter& counter,
                      bool deterministic) {
  ActOutcome out;
  if (planner == "policy") {
    const auto t0 = std::chrono::steady_clock::now();
    out.action = PolicyOnlyAct(model, z, deterministic, rng, &counter);
    out.planned_actions = out.action.transpose();
    out.diagnostics.planner = "policy";
    out.diagnostics.plan_micros = NowMicros(t0);
    return out;
  }
  if (planner == "dream_mpc") {
    PlanResult r = DreamMpcPlan(model, z, config, session.reuse, rng, counter);
    session.reuse = std::move(r.reuse);
    out.action = std::move(r.action);
    out.planned_actions = std::move(r.planned_actions);
    out.chosen = std::move(r.chosen);
    out.diagnostics = std::move(r.diagnostics);
    return out;
  }
  if (planner == "mppi") {
    PlanResult r = MppiPlan(model, z, config, session.warm, rng, counter, deterministic);
    session.warm = std::move(r.warm_start);
    out.action = std::move(r.action);
    out.planned_actions = std::move(r.planned_actions);
    out.diagnostics = std::move(r.diagnostics);
    return out;
  }
  throw ConfigError("unknown planner: " + planner);
}

EvalResult Evaluate(const WorldModel& model, const std::string& planner, const PlannerConfig& config,
                    const Env& env_prototype, int episodes, uint64_t seed) {
  EvalResult result;
  const Rng root(seed);
  long plan_calls = 0;
  double micros_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng env_rng = root.Substream(2 * static_cast<uint64_t>(ep));
    Rng plan_rng = root.Substream(2 * static_cast<uint64_t>(ep) + 1);
    auto env = env_prototype.Clone();
    Eigen::VectorXd obs = env->Reset(env_rng);
    PlannerSession session;
    EvalCounter counter;
    double episode_return = 0.0;
    while (true) {
      const LatentState z = Encode(model, obs);
      const auto t0 = std::chrono::steady_clock::now();
      ActOutcome act = PlanAction(model, planner, config, z, session, plan_rng, counter, /*deterministic=*/true);
      micros_sum += static_cast<double>(act.diagnostics.plan_micros > 0 ? act.diagnostics.plan_micros
                                                                        : NowMicros(t0));
      ++plan_calls;
      StepResult step = env->Step(act.action);
      episode_return += step.reward;
      obs = step.observation;
      if (step.done) break;
    }
    result.returns.push_back(episode_return);
  }
  const int n = static_cast<int>(result.returns.size());
  if (n > 0) {
    double sum = 0.0;
    for (double r : result.returns) sum += r;
    result.mean = sum / n;
    double sq = 0.0;
    for (double r : result.returns) sq += (r - result.mean) * (r - result.mean);
    result.stddev = std::sqrt(sq / n);
  }
  if (plan_calls > 0) result.mean_plan_micros = micros_sum / static_cast<double>(plan_calls);
  return result;
}

double NormalizedScore(double x, double random_score, double target_score) {
  if (target_score == random_score) throw std::invalid_argument("NormalizedScore: target equals random score");
  return (x - random_score) / (target_score - random_score);
}

std::string PrepareRunDir(const RunConfig& config) {
  const fs::path dir = fs::path(config.out_dir) / config.name;
  if (fs::exists(dir / "manifest.txt"))
    throw ConfigError("run directory already exists and is immutable: " + dir.string());
  fs::create_directories(dir / "checkpoints");

  const std::string snapshot = ConfigSnapshot(config);
  {
    std::ofstream cfg(dir / "config.ini", std::ios::binary);
    cfg << snapshot;
  }
  {
    std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
    manifest << "name = " << config.name << "\n";
    manifest << "tool_version = " << kToolVersion << "\n";
    manifest << "seed = " << config.seed << "\n";
    manifest << "config_snapshot = config.ini\n";
    manifest << "metrics = metrics.csv\n";
    manifest << "timings = timings.csv\n";
    manifest << "evals = eval.csv\n";
    manifest << "checkpoints = checkpoints/\n";
  }
  return dir.string();
}

TrainResult Train(const RunConfig& config, const std::string& run_dir) {
  config.Validate();
  auto env = MakeEnv(config.env, config.episode_length > 0 ? config.episode_length
                                                           : MakeEnv(config.env)->spec().episode_length,
                     config.action_repeat);
  ModelConfig mc = config.model;
  mc.obs_dim = env->spec().obs_dim;
  mc.action_dim = env->spec().action_dim;

  Rng master(config.seed);
  Rng rng_model = master.Substream(1);
  Rng rng_env = master.Substream(2);
  Rng rng_seed_phase = master.Substream(3);
  Rng rng_plan = master.Substream(4);
  Rng rng_train = master.Substream(5);

  WorldModel model = MakeWorldModel(mc, rng_model);
  Trainer trainer(model, config.hyper);
  ReplayBuffer buffer(config.buffer_capacity);

  CsvWriter metrics(run_dir + "/metrics.csv",
                    {"step", "episode", "reward", "episode_return", "planner", "chosen_objective",
                     "initial_objectives", "final_objectives", "dyn_generation", "dyn_optimization",
                     "dyn_rescoring", "reward_evals", "q_evals", "policy_evals", "grad_norm_mean",
                     "grad_norm_max", "loss_consistency", "loss_reward", "loss_value", "loss_total",
                     "policy_objective"});
  CsvWriter timings(run_dir + "/timings.csv", {"step", "plan_micros"});
  CsvWriter evals(run_dir + "/eval.csv", {"train_step", "episode", "return", "mean_plan_micros"});

  TrainResult result;
  Eigen::VectorXd obs = env->Reset(rng_env);
  PlannerSession session;
  long episode = 0;
  double episode_return = 0.0;
  int nonfinite_streak = 0;
  const int act_dim = env->spec().action_dim;
  const std::string nan = FormatDouble(std::nan(""));

  for (long step = 1; step <= config.total_steps; ++step) {
    ActOutcome act;
    const bool seed_phase = step <= config.seed_steps;
    if (seed_phase) {
      const auto t0 = std::chrono::steady_clock::now();
      Eigen::VectorXd a(act_dim);
      for (int i = 0; i < act_dim; ++i) a[i] = rng_seed_phase.Uniform(-1.0, 1.0);
      act.action = std::move(a);
      act.diagnostics.planner = "random";
      act.diagnostics.plan_micros = NowMicros(t0);
    } else {
      EvalCounter counter;
      const LatentState z = Encode(model, obs);
      act = PlanAction(model, config.planner, config.planner_config, z, session, rng_plan, counter,
                       /*deterministic=*/false);
    }

    StepResult sr = env->Step(act.action);
    buffer.Add(obs, act.action, sr.reward, sr.observation, episode);
    episode_return += sr.reward;
    obs = sr.observation;

    LossReport loss;
    PolicyLossReport ploss;
    bool updated = false;
    if (!seed_phase && config.utd_ratio > 0) {
      if (!buffer.CanSample(config.hyper.horizon))
        throw ConfigError("seed phase too short: no trainable window after seed steps");
      for (int u = 0; u < config.utd_ratio; ++u) {
        const SequenceBatch batch = buffer.SampleSequences(config.hyper.horizon, config.batch_size, rng_train);
        loss = trainer.ModelUpdate(batch, rng_train);
        ploss = trainer.PolicyUpdate(trainer.last_rollout_latents(), rng_train);
        updated = true;
        if (!loss.finite || !ploss.finite) {
          ++nonfinite_streak;
        } else {
          nonfinite_streak = 0;
        }
        if (nonfinite_streak > config.nonfinite_abort_streak) {
          metrics.Flush();
          timings.Flush();
          evals.Flush();
          throw NumericalAbort("non-finite loss streak exceeded " +
                               std::to_string(config.nonfinite_abort_streak) + " at step " +
                               std::to_string(step));
        }
      }
    }

    const PlanDiagnostics& d = act.diagnostics;
    metrics.Row({std::to_string(step), std::to_string(episode), FormatDouble(sr.reward),
                 FormatDouble(episode_return), d.planner, FormatDouble(d.chosen_objective),
                 JoinObjectives(d.initial_objectives), JoinObjectives(d.final_objectives),
                 std::to_string(d.generation.dynamics_evals), std::to_string(d.optimization.dynamics_evals),
                 std::to_string(d.rescoring.dynamics_evals),
                 std::to_string(d.generation.reward_evals + d.optimization.reward_evals +
                                d.rescoring.reward_evals),
                 std::to_string(d.generation.q_evals + d.optimization.q_evals + d.rescoring.q_evals),
                 std::to_string(d.generation.policy_evals + d.optimization.policy_evals +
                                d.rescoring.policy_evals),
                 FormatDouble(d.grad_norm_mean), FormatDouble(d.grad_norm_max),
                 updated ? FormatDouble(loss.consistency) : nan, updated ? FormatDouble(loss.reward) : nan,
                 updated ? FormatDouble(loss.value) : nan, updated ? FormatDouble(loss.total) : nan,
                 updated ? FormatDouble(ploss.objective) : nan});
    timings.Row({std::to_string(step), std::to_string(d.plan_micros)});

    if (sr.done) {
      obs = env->Reset(rng_env);
      session.Reset();
      ++episode;
      episode_return = 0.0;
    }

    if (config.eval_interval > 0 && step % config.eval_interval == 0) {
      const uint64_t eval_seed = Rng::SplitMix64(config.seed ^ static_cast<uint64_t>(step));
      const EvalResult er =
          Evaluate(model, config.planner, config.planner_config, *env, config.eval_episodes, eval_seed);
      for (size_t i = 0; i < er.returns.size(); ++i)
        evals.Row({std::to_string(step), std::to_string(i), FormatDouble(er.returns[i]),
                   FormatDouble(er.mean_plan_micros)});
      evals.Flush();
      result.last_eval_mean = er.mean;
      SaveModel(model, run_dir + "/checkpoints/step_" + std::to_string(step) + ".dmpc");
    }
  }

  result.checkpoint_path = run_dir + "/checkpoints/final.dmpc";
  SaveModel(model, result.checkpoint_path);
  result.steps = config.total_steps;
  result.episodes = episode;
  metrics.Flush();
  timings.Flush();
  evals.Flush();
  return result;
}

}  // namespace dmpc
