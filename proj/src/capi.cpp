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

#include "dmpc.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dmpc/agent.hpp"
#include "dmpc/analysis.hpp"
#include "dmpc/config.hpp"
#include "dmpc/csv.hpp"

namespace {

namespace fs = std::filesystem;

thread_local std::string g_last_error;

template <typename Fn>
int Guard(Fn&& fn) {
  try {
    fn();
    return DMPC_OK;
  } catch (const dmpc::ConfigError& e) {
    g_last_error = e.what();
    return DMPC_CONFIG_ERROR;
  } catch (const dmpc::NumericalAbort& e) {
    g_last_error = e.what();
    return DMPC_NUMERICAL_ABORT;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return DMPC_CONFIG_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DMPC_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return DMPC_ERROR;
  }
}

std::vector<std::string> ToVector(const char* const* items, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.emplace_back(items[i]);
  return out;
}

dmpc::RunConfig ConfigFrom(const char* config_path, const char* const* overrides, int n_overrides) {
  const std::vector<std::string> ov = ToVector(overrides, n_overrides);
  return config_path ? dmpc::ParseRunConfig(config_path, ov) : dmpc::MakeRunConfig(ov);
}

std::unique_ptr<dmpc::Env> EnvFromConfig(const dmpc::RunConfig& config) {
  const int len = config.episode_length > 0 ? config.episode_length
                                            : dmpc::MakeEnv(config.env)->spec().episode_length;
  return dmpc::MakeEnv(config.env, len, config.action_repeat);
}

dmpc::WorldModel LoadCheckpoint(const char* path, const dmpc::RunConfig& config) {
  if (!path) throw dmpc::ConfigError("a model checkpoint path is required");
  dmpc::WorldModel model = dmpc::LoadModel(path, config.model.q_dropout);
  const auto env = EnvFromConfig(config);
  if (model.config.obs_dim != env->spec().obs_dim || model.config.action_dim != env->spec().action_dim)
    throw dmpc::ConfigError("checkpoint dimensions do not match env.kind=" + config.env);
  return model;
}

void CopyString(const std::string& s, char* out, size_t len) {
  if (!out || len == 0) return;
  const size_t n = std::min(len - 1, s.size());
  std::memcpy(out, s.data(), n);
  out[n] = '\0';
}

void FillDiag(const dmpc::PlanDiagnostics& d, dmpc_plan_diag* out) {
  if (!out) return;
  out->objective = d.chosen_objective;
  out->dynamics_generation = d.generation.dynamics_evals;
  out->dynamics_optimization = d.optimization.dynamics_evals;
  out->dynamics_rescoring = d.rescoring.dynamics_evals;
  out->reward_evals = d.generation.reward_evals + d.optimization.reward_evals + d.rescoring.reward_evals;
  out->q_evals = d.generation.q_evals + d.optimization.q_evals + d.rescoring.q_evals;
  out->policy_evals = d.generation.policy_evals + d.optimization.policy_evals + d.rescoring.policy_evals;
  out->grad_norm_mean = d.grad_norm_mean;
  out->grad_norm_max = d.grad_norm_max;
  out->plan_micros = d.plan_micros;
  out->fallback = d.fallback ? 1 : 0;
}

std::vector<long> ParseCsvLongs(const std::string& text, const char* what) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stol(item));
    } catch (...) {
      throw dmpc::ConfigError(std::string("invalid ") + what + " list: " + text);
    }
  }
  if (out.empty()) throw dmpc::ConfigError(std::string("empty ") + what + " list");
  return out;
}

// Study artifacts are immutable: refuse to recompute an existing manifest.
void WriteStudyManifest(const std::string& out_dir, const std::string& base, const std::string& args,
                        const dmpc::RunConfig& config) {
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / (base + ".manifest.txt");
  if (fs::exists(path)) throw dmpc::ConfigError("study artifact already exists and is immutable: " + path.string());
  std::ofstream out(path, std::ios::binary);
  out << "tool_version = " << dmpc::kToolVersion << "\n" << args;
  out << "[resolved config]\n" << dmpc::ConfigSnapshot(config);
}

}  // namespace

struct dmpc_model {
  dmpc::WorldModel model;
};

struct dmpc_env {
  std::unique_ptr<dmpc::Env> env;
};

struct dmpc_planner {
  dmpc::WorldModel model;
  std::string kind;
  dmpc::PlannerConfig config;
  dmpc::PlannerSession session;
  dmpc::Rng rng;
};

extern "C" {

const char* dmpc_version(void) { return dmpc::kToolVersion; }

const char* dmpc_last_error(void) { return g_last_error.c_str(); }

int dmpc_model_create(const char* env, uint64_t seed, const char* const* overrides, int n_overrides,
                      dmpc_model** out) {
  return Guard([&] {
    if (!env || !out) throw std::invalid_argument("dmpc_model_create: null argument");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    config.env = env;
    const auto e = EnvFromConfig(config);
    dmpc::ModelConfig mc = config.model;
    mc.obs_dim = e->spec().obs_dim;
    mc.action_dim = e->spec().action_dim;
    dmpc::Rng rng(seed);
    *out = new dmpc_model{dmpc::MakeWorldModel(mc, rng)};
  });
}

int dmpc_model_load(const char* path, dmpc_model** out) {
  return Guard([&] {
    if (!path || !out) throw std::invalid_argument("dmpc_model_load: null argument");
    *out = new dmpc_model{dmpc::LoadModel(path)};
  });
}

int dmpc_model_save(const dmpc_model* model, const char* path) {
  return Guard([&] {
    if (!model || !path) throw std::invalid_argument("dmpc_model_save: null argument");
    dmpc::SaveModel(model->model, path);
  });
}

int dmpc_model_dims(const dmpc_model* model, int* obs_dim, int* action_dim, int* latent_dim) {
  return Guard([&] {
    if (!model) throw std::invalid_argument("dmpc_model_dims: null model");
    if (obs_dim) *obs_dim = model->model.config.obs_dim;
    if (action_dim) *action_dim = model->model.config.action_dim;
    if (latent_dim) *latent_dim = model->model.config.latent_dim;
  });
}

void dmpc_model_free(dmpc_model* model) { delete model; }

int dmpc_env_create(const char* name, dmpc_env** out) {
  return Guard([&] {
    if (!name || !out) throw std::invalid_argument("dmpc_env_create: null argument");
    *out = new dmpc_env{dmpc::MakeEnv(name)};
  });
}

int dmpc_env_dims(const dmpc_env* env, int* obs_dim, int* action_dim, int* episode_length) {
  return Guard([&] {
    if (!env) throw std::invalid_argument("dmpc_env_dims: null env");
    if (obs_dim) *obs_dim = env->env->spec().obs_dim;
    if (action_dim) *action_dim = env->env->spec().action_dim;
    if (episode_length) *episode_length = env->env->spec().episode_length;
  });
}

int dmpc_env_reset(dmpc_env* env, uint64_t seed, double* obs_out) {
  return Guard([&] {
    if (!env || !obs_out) throw std::invalid_argument("dmpc_env_reset: null argument");
    dmpc::Rng rng(seed);
    const Eigen::VectorXd obs = env->env->Reset(rng);
    std::memcpy(obs_out, obs.data(), sizeof(double) * obs.size());
  });
}

int dmpc_env_step(dmpc_env* env, const double* action, double* obs_out, double* reward_out, int* done_out) {
  return Guard([&] {
    if (!env || !action) throw std::invalid_argument("dmpc_env_step: null argument");
    const int adim = env->env->spec().action_dim;
    const dmpc::StepResult r = env->env->Step(Eigen::Map<const Eigen::VectorXd>(action, adim));
    if (obs_out) std::memcpy(obs_out, r.observation.data(), sizeof(double) * r.observation.size());
    if (reward_out) *reward_out = r.reward;
    if (done_out) *done_out = r.done ? 1 : 0;
  });
}

void dmpc_env_free(dmpc_env* env) { delete env; }

int dmpc_planner_create(const dmpc_model* model, const char* kind, uint64_t seed, const char* const* overrides,
                        int n_overrides, dmpc_planner** out) {
  return Guard([&] {
    if (!model || !kind || !out) throw std::invalid_argument("dmpc_planner_create: null argument");
    const std::string k = kind;
    if (k != "policy" && k != "mppi" && k != "dream_mpc") throw dmpc::ConfigError("unknown planner kind: " + k);
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    *out = new dmpc_planner{model->model, k, config.planner_config, {}, dmpc::Rng(seed)};
  });
}

int dmpc_planner_reset(dmpc_planner* planner) {
  return Guard([&] {
    if (!planner) throw std::invalid_argument("dmpc_planner_reset: null planner");
    planner->session.Reset();
  });
}

int dmpc_planner_plan(dmpc_planner* planner, const double* obs, int deterministic, double* action_out,
                      dmpc_plan_diag* diag_out) {
  return Guard([&] {
    if (!planner || !obs || !action_out) throw std::invalid_argument("dmpc_planner_plan: null argument");
    const dmpc::WorldModel& m = planner->model;
    const dmpc::LatentState z =
        dmpc::Encode(m, Eigen::Map<const Eigen::VectorXd>(obs, m.config.obs_dim));
    dmpc::EvalCounter counter;
    const dmpc::ActOutcome act = dmpc::PlanAction(m, planner->kind, planner->config, z, planner->session,
                                                  planner->rng, counter, deterministic != 0);
    std::memcpy(action_out, act.action.data(), sizeof(double) * act.action.size());
    FillDiag(act.diagnostics, diag_out);
  });
}

void dmpc_planner_free(dmpc_planner* planner) { delete planner; }

int dmpc_train(const char* config_path, const char* const* overrides, int n_overrides, char* run_dir_out,
               size_t run_dir_len) {
  return Guard([&] {
    const dmpc::RunConfig config = ConfigFrom(config_path, overrides, n_overrides);
    const std::string run_dir = dmpc::PrepareRunDir(config);
    CopyString(run_dir, run_dir_out, run_dir_len);
    dmpc::Train(config, run_dir);
  });
}

int dmpc_evaluate(const char* checkpoint, const char* planner, int episodes, uint64_t seed,
                  const char* const* overrides, int n_overrides, const char* csv_path, dmpc_eval_stats* out) {
  return Guard([&] {
    if (!planner) throw std::invalid_argument("dmpc_evaluate: null planner");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    config.planner = planner;
    config.Validate();
    const dmpc::WorldModel model = LoadCheckpoint(checkpoint, config);
    const auto env = EnvFromConfig(config);
    const dmpc::EvalResult r =
        dmpc::Evaluate(model, config.planner, config.planner_config, *env, episodes, seed);
    if (csv_path) {
      if (fs::exists(csv_path)) throw dmpc::ConfigError(std::string("refusing to overwrite ") + csv_path);
      dmpc::CsvWriter csv(csv_path, {"episode", "return", "mean_plan_micros"});
      for (size_t i = 0; i < r.returns.size(); ++i)
        csv.Row({std::to_string(i), dmpc::FormatDouble(r.returns[i]), dmpc::FormatDouble(r.mean_plan_micros)});
    }
    if (out) {
      out->mean_return = r.mean;
      out->std_return = r.stddev;
      out->mean_plan_micros = r.mean_plan_micros;
      out->episodes = static_cast<int>(r.returns.size());
    }
  });
}

int dmpc_plan_bench(const char* checkpoint, const char* planner, int steps, uint64_t seed,
                    const char* const* overrides, int n_overrides, dmpc_plan_diag* out) {
  return Guard([&] {
    if (!planner || steps < 1) throw std::invalid_argument("dmpc_plan_bench: bad arguments");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    config.planner = planner;
    config.Validate();
    const auto env = EnvFromConfig(config);
    dmpc::WorldModel model = [&] {
      if (checkpoint) return LoadCheckpoint(checkpoint, config);
      dmpc::ModelConfig mc = config.model;
      mc.obs_dim = env->spec().obs_dim;
      mc.action_dim = env->spec().action_dim;
      dmpc::Rng rng(seed);
      return dmpc::MakeWorldModel(mc, rng);
    }();
    dmpc::Rng env_rng(seed);
    dmpc::Rng plan_rng = dmpc::Rng(seed).Substream(1);
    Eigen::VectorXd obs = env->Reset(env_rng);
    dmpc::PlannerSession session;
    dmpc::PlanDiagnostics last;
    for (int i = 0; i < steps; ++i) {
      dmpc::EvalCounter counter;
      const dmpc::LatentState z = dmpc::Encode(model, obs);
      dmpc::ActOutcome act = dmpc::PlanAction(model, config.planner, config.planner_config, z, session,
                                              plan_rng, counter, /*deterministic=*/false);
      last = act.diagnostics;
      dmpc::StepResult sr = env->Step(act.action);
      obs = sr.observation;
      if (sr.done) {
        obs = env->Reset(env_rng);
        session.Reset();
      }
    }
    FillDiag(last, out);
  });
}

int dmpc_study_gradients(const char* checkpoint, const char* source, const char* planner,
                         const char* horizons_csv, const char* seeds_csv, int samples, double gaussian_std,
                         const char* const* overrides, int n_overrides, const char* out_dir) {
  return Guard([&] {
    if (!source || !planner || !horizons_csv || !seeds_csv || !out_dir)
      throw std::invalid_argument("dmpc_study_gradients: null argument");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    const auto env = EnvFromConfig(config);
    std::vector<int> horizons;
    for (long h : ParseCsvLongs(horizons_csv, "horizon")) horizons.push_back(static_cast<int>(h));
    std::vector<uint64_t> seeds;
    for (long s : ParseCsvLongs(seeds_csv, "seed")) seeds.push_back(static_cast<uint64_t>(s));

    std::unique_ptr<dmpc::WorldModel> model;
    if (checkpoint) model = std::make_unique<dmpc::WorldModel>(LoadCheckpoint(checkpoint, config));

    const std::string base = std::string("grad_study_") + env->spec().name + "_" + source + "_" + planner;
    std::ostringstream args;
    args << "study = gradients\nsource = " << source << "\nplanner = " << planner
         << "\nhorizons = " << horizons_csv << "\nseeds = " << seeds_csv << "\nsamples = " << samples
         << "\ngaussian_std = " << dmpc::FormatDouble(gaussian_std)
         << "\ncheckpoint = " << (checkpoint ? checkpoint : "<none>") << "\n";
    WriteStudyManifest(out_dir, base, args.str(), config);
    dmpc::GradientStudy(model.get(), *env, source, planner, horizons, seeds, samples, gaussian_std,
                        std::string(out_dir) + "/" + base + ".csv");
  });
}

int dmpc_study_value(const char* checkpoint, const char* planner, int episodes, uint64_t seed,
                     int min_estimate, const char* const* overrides, int n_overrides, const char* out_dir) {
  return Guard([&] {
    if (!planner || !out_dir) throw std::invalid_argument("dmpc_study_value: null argument");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    config.planner = planner;
    config.Validate();
    const dmpc::WorldModel model = LoadCheckpoint(checkpoint, config);
    const auto env = EnvFromConfig(config);
    const std::string base =
        std::string("value_study_") + env->spec().name + "_" + planner + "_seed" + std::to_string(seed);
    std::ostringstream args;
    args << "study = value\nplanner = " << planner << "\nepisodes = " << episodes << "\nseed = " << seed
         << "\nmin_estimate = " << (min_estimate ? "true" : "false") << "\ncheckpoint = " << checkpoint << "\n";
    WriteStudyManifest(out_dir, base, args.str(), config);
    dmpc::ValueStudy(model, planner, config.planner_config, *env, episodes, seed, min_estimate != 0,
                     std::string(out_dir) + "/" + base + ".csv");
  });
}

int dmpc_study_exploitation(const char* checkpoint, const char* planner, int episodes, uint64_t seed,
                            const char* const* overrides, int n_overrides, const char* out_dir) {
  return Guard([&] {
    if (!planner || !out_dir) throw std::invalid_argument("dmpc_study_exploitation: null argument");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    config.planner = planner;
    config.Validate();
    const dmpc::WorldModel model = LoadCheckpoint(checkpoint, config);
    const auto env = EnvFromConfig(config);
    const std::string base =
        std::string("exploitation_study_") + env->spec().name + "_" + planner + "_seed" + std::to_string(seed);
    std::ostringstream args;
    args << "study = exploitation\nplanner = " << planner << "\nepisodes = " << episodes << "\nseed = " << seed
         << "\ncheckpoint = " << checkpoint << "\n";
    WriteStudyManifest(out_dir, base, args.str(), config);
    dmpc::ExploitationStudy(model, planner, config.planner_config, *env, episodes, seed,
                            std::string(out_dir) + "/" + base + ".csv");
  });
}

int dmpc_study_timing(const char* checkpoint, const char* planners_csv, int episodes, uint64_t seed,
                      const char* const* overrides, int n_overrides, const char* out_dir) {
  return Guard([&] {
    if (!planners_csv || !out_dir) throw std::invalid_argument("dmpc_study_timing: null argument");
    dmpc::RunConfig config = ConfigFrom(nullptr, overrides, n_overrides);
    const dmpc::WorldModel model = LoadCheckpoint(checkpoint, config);
    const auto env = EnvFromConfig(config);
    std::vector<std::string> planners;
    std::stringstream ss(planners_csv);
    std::string item;
    while (std::getline(ss, item, ',')) planners.push_back(item);
    if (planners.empty()) throw dmpc::ConfigError("empty planner list");
    const std::string base =
        std::string("timing_report_") + env->spec().name + "_seed" + std::to_string(seed);
    std::ostringstream args;
    args << "study = timing\nplanners = " << planners_csv << "\nepisodes = " << episodes << "\nseed = " << seed
         << "\ncheckpoint = " << checkpoint << "\n";
    WriteStudyManifest(out_dir, base, args.str(), config);
    dmpc::TimingReport(model, planners, config.planner_config, *env, episodes, seed, /*warmup=*/5,
                       std::string(out_dir) + "/" + base + ".csv");
  });
}

int dmpc_normalized_score(double x, double random_score, double target_score, double* out) {
  return Guard([&] {
    if (!out) throw std::invalid_argument("dmpc_normalized_score: null output");
    *out = dmpc::NormalizedScore(x, random_score, target_score);
  });
}

}  // extern "C"
