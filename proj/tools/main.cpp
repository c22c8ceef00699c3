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

// Command-line front end; all functionality flows through the C API in
// dmpc.h.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmpc.h"

namespace {

std::vector<const char*> Pointers(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

int Report(int status) {
  if (status != DMPC_OK) std::fprintf(stderr, "error: %s\n", dmpc_last_error());
  return status;
}

void PrintDiag(const dmpc_plan_diag& d) {
  std::printf("objective %.6g\n", d.objective);
  std::printf("dynamics evals: generation %lld, optimization %lld, rescoring %lld\n", d.dynamics_generation,
              d.dynamics_optimization, d.dynamics_rescoring);
  std::printf("reward evals %lld, q evals %lld, policy evals %lld\n", d.reward_evals, d.q_evals,
              d.policy_evals);
  std::printf("grad norm mean %.6g max %.6g\n", d.grad_norm_mean, d.grad_norm_max);
  std::printf("plan micros %lld%s\n", d.plan_micros, d.fallback ? " (fallback)" : "");
}

struct StudyArgs {
  std::string checkpoint;
  std::string planner = "dream_mpc";
  std::string source = "ground_truth";
  std::string horizons = "1,5,10,20,30";
  std::string seeds = "1,2,3";
  std::string planners = "policy,dream_mpc,mppi";
  std::string out_dir = "studies";
  int episodes = 10;
  int samples = 64;
  uint64_t seed = 1;
  double gaussian_std = 1.0;
  bool min_estimate = false;
  std::vector<std::string> overrides;
};

int RunStudy(const std::string& kind, const StudyArgs& a) {
  const auto ov = Pointers(a.overrides);
  const char* ckpt = a.checkpoint.empty() ? nullptr : a.checkpoint.c_str();
  if (kind == "gradients")
    return Report(dmpc_study_gradients(ckpt, a.source.c_str(), a.planner.c_str(), a.horizons.c_str(),
                                       a.seeds.c_str(), a.samples, a.gaussian_std, ov.data(),
                                       static_cast<int>(ov.size()), a.out_dir.c_str()));
  if (kind == "value")
    return Report(dmpc_study_value(ckpt, a.planner.c_str(), a.episodes, a.seed, a.min_estimate ? 1 : 0,
                                   ov.data(), static_cast<int>(ov.size()), a.out_dir.c_str()));
  if (kind == "exploitation")
    return Report(dmpc_study_exploitation(ckpt, a.planner.c_str(), a.episodes, a.seed, ov.data(),
                                          static_cast<int>(ov.size()), a.out_dir.c_str()));
  if (kind == "timing")
    return Report(dmpc_study_timing(ckpt, a.planners.c_str(), a.episodes, a.seed, ov.data(),
                                    static_cast<int>(ov.size()), a.out_dir.c_str()));
  std::fprintf(stderr, "error: unknown study kind: %s\n", kind.c_str());
  return DMPC_CONFIG_ERROR;
}

void AddStudyCommon(CLI::App* cmd, StudyArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "Model checkpoint (.dmpc)");
  cmd->add_option("--out", a.out_dir, "Output directory for CSV artifacts");
  cmd->add_option("--set", a.overrides, "Config override section.key=value")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space MPC: gradient-based planning, MPPI, training, and diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dmpc_version()));

  // train
  std::string train_config;
  std::vector<std::string> train_overrides;
  std::string opt_name, opt_env, opt_planner, opt_out;
  int64_t opt_steps = -1;
  int64_t opt_seed = -1;
  auto* train = app.add_subcommand("train", "Run online training from a config file");
  train->add_option("--config", train_config, "key = value config file");
  train->add_option("--set", train_overrides, "Config override section.key=value")->take_all();
  train->add_option("--name", opt_name, "Run name (run.name)");
  train->add_option("--env", opt_env, "Environment (env.kind)");
  train->add_option("--planner", opt_planner, "Training planner (train.planner)");
  train->add_option("--out", opt_out, "Output root (run.out_dir)");
  train->add_option("--steps", opt_steps, "Total decision steps (train.total_steps)");
  train->add_option("--seed", opt_seed, "Run seed (run.seed)");

  // eval
  std::string eval_checkpoint, eval_planner = "dream_mpc", eval_csv;
  std::vector<std::string> eval_overrides;
  int eval_episodes = 10;
  uint64_t eval_seed = 1;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with a planner");
  eval->add_option("--checkpoint", eval_checkpoint, "Model checkpoint (.dmpc)")->required();
  eval->add_option("--planner", eval_planner, "policy | mppi | dream_mpc");
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--csv", eval_csv, "Optional per-episode CSV output");
  eval->add_option("--set", eval_overrides, "Config override section.key=value")->take_all();

  // plan-bench
  std::string bench_checkpoint, bench_planner = "dream_mpc";
  std::vector<std::string> bench_overrides;
  int bench_steps = 3;
  uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("plan-bench", "Run planner steps and print eval-count diagnostics");
  bench->add_option("--checkpoint", bench_checkpoint, "Checkpoint; omitted = fresh random model");
  bench->add_option("--planner", bench_planner, "policy | mppi | dream_mpc");
  bench->add_option("--steps", bench_steps, "Plan calls");
  bench->add_option("--seed", bench_seed, "Seed");
  bench->add_option("--set", bench_overrides, "Config override section.key=value")->take_all();

  // studies
  StudyArgs sa;
  std::string study_kind;
  auto* study = app.add_subcommand("study", "Run a diagnostic study (gradients|value|exploitation|timing)");
  study->add_option("kind", study_kind, "gradients | value | exploitation | timing")->required();
  AddStudyCommon(study, sa);
  study->add_option("--planner", sa.planner, "Planner under study");
  study->add_option("--source", sa.source, "gradients: ground_truth | learned_model");
  study->add_option("--horizons", sa.horizons, "gradients: comma-separated horizons");
  study->add_option("--seeds", sa.seeds, "gradients: comma-separated seeds");
  study->add_option("--samples", sa.samples, "gradients: samples per cell");
  study->add_option("--gaussian-std", sa.gaussian_std, "gradients: Gaussian proposal std");
  study->add_option("--episodes", sa.episodes, "Episodes (value/exploitation/timing)");
  study->add_option("--seed", sa.seed, "Seed (value/exploitation/timing)");
  study->add_option("--planners", sa.planners, "timing: comma-separated planners");
  study->add_flag("--min-estimate", sa.min_estimate, "value: min-ensemble estimate instead of mean");

  // aliases matching the study kinds
  StudyArgs ga;
  auto* gstudy = app.add_subcommand("gradient-study", "Alias for: study gradients");
  AddStudyCommon(gstudy, ga);
  gstudy->add_option("--planner", ga.planner, "grad_mpc_gaussian | dream_mpc");
  gstudy->add_option("--source", ga.source, "ground_truth | learned_model");
  gstudy->add_option("--horizons", ga.horizons, "Comma-separated horizons");
  gstudy->add_option("--seeds", ga.seeds, "Comma-separated seeds");
  gstudy->add_option("--samples", ga.samples, "Samples per cell");
  gstudy->add_option("--gaussian-std", ga.gaussian_std, "Gaussian proposal std");

  StudyArgs va;
  auto* vstudy = app.add_subcommand("value-study", "Alias for: study value");
  AddStudyCommon(vstudy, va);
  vstudy->add_option("--planner", va.planner, "Planner under study");
  vstudy->add_option("--episodes", va.episodes, "Episodes");
  vstudy->add_option("--seed", va.seed, "Seed");
  vstudy->add_flag("--min-estimate", va.min_estimate, "Min-ensemble estimate instead of mean");

  StudyArgs xa;
  auto* xstudy = app.add_subcommand("exploitation-study", "Alias for: study exploitation");
  AddStudyCommon(xstudy, xa);
  xstudy->add_option("--planner", xa.planner, "Planner under study");
  xstudy->add_option("--episodes", xa.episodes, "Episodes");
  xstudy->add_option("--seed", xa.seed, "Seed");

  StudyArgs ta;
  auto* tstudy = app.add_subcommand("timing", "Alias for: study timing");
  AddStudyCommon(tstudy, ta);
  tstudy->add_option("--planners", ta.planners, "Comma-separated planners");
  tstudy->add_option("--episodes", ta.episodes, "Episodes");
  tstudy->add_option("--seed", ta.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : DMPC_CONFIG_ERROR;
  }

  if (train->parsed()) {
    if (!opt_name.empty()) train_overrides.push_back("run.name=" + opt_name);
    if (!opt_env.empty()) train_overrides.push_back("env.kind=" + opt_env);
    if (!opt_planner.empty()) train_overrides.push_back("train.planner=" + opt_planner);
    if (!opt_out.empty()) train_overrides.push_back("run.out_dir=" + opt_out);
    if (opt_steps >= 0) train_overrides.push_back("train.total_steps=" + std::to_string(opt_steps));
    if (opt_seed >= 0) train_overrides.push_back("run.seed=" + std::to_string(opt_seed));
    const auto ov = Pointers(train_overrides);
    char run_dir[4096] = {0};
    const int status = dmpc_train(train_config.empty() ? nullptr : train_config.c_str(), ov.data(),
                                  static_cast<int>(ov.size()), run_dir, sizeof(run_dir));
    if (status == DMPC_OK) std::printf("run complete: %s\n", run_dir);
    return Report(status);
  }

  if (eval->parsed()) {
    const auto ov = Pointers(eval_overrides);
    dmpc_eval_stats stats{};
    const int status =
        dmpc_evaluate(eval_checkpoint.c_str(), eval_planner.c_str(), eval_episodes, eval_seed, ov.data(),
                      static_cast<int>(ov.size()), eval_csv.empty() ? nullptr : eval_csv.c_str(), &stats);
    if (status == DMPC_OK) {
      std::printf("%s: mean return %.6f +- %.6f over %d episodes (plan %.1f us/step)\n", eval_planner.c_str(),
                  stats.mean_return, stats.std_return, stats.episodes, stats.mean_plan_micros);
    }
    return Report(status);
  }

  if (bench->parsed()) {
    const auto ov = Pointers(bench_overrides);
    dmpc_plan_diag diag{};
    const int status =
        dmpc_plan_bench(bench_checkpoint.empty() ? nullptr : bench_checkpoint.c_str(), bench_planner.c_str(),
                        bench_steps, bench_seed, ov.data(), static_cast<int>(ov.size()), &diag);
    if (status == DMPC_OK) {
      std::printf("planner %s, per-step diagnostics:\n", bench_planner.c_str());
      PrintDiag(diag);
    }
    return Report(status);
  }

  if (study->parsed()) return RunStudy(study_kind, sa);
  if (gstudy->parsed()) return RunStudy("gradients", ga);
  if (vstudy->parsed()) return RunStudy("value", va);
  if (xstudy->parsed()) return RunStudy("exploitation", xa);
  if (tstudy->parsed()) return RunStudy("timing", ta);
  return DMPC_CONFIG_ERROR;
}
