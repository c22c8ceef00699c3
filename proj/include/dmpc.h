/* Copyright 2026 dmpc contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the dmpc core: latent world models, gradient-based and
 * sampling-based MPC planners, online training, and diagnostic studies.
 * All functions return a status code; details for the most recent failure
 * on the calling thread are available via dmpc_last_error(). Handles are
 * opaque and single-owner.
 */

#ifndef DMPC_H_
#define DMPC_H_

#include <stddef.h>
#include <stdint.h>

#ifndef DMPC_API
#define DMPC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI uses them as exit codes. */
enum {
  DMPC_OK = 0,
  DMPC_ERROR = 1,
  DMPC_CONFIG_ERROR = 2,
  DMPC_NUMERICAL_ABORT = 3
};

DMPC_API const char* dmpc_version(void);
DMPC_API const char* dmpc_last_error(void);

typedef struct dmpc_model dmpc_model;
typedef struct dmpc_env dmpc_env;
typedef struct dmpc_planner dmpc_planner;

/* Overrides are "section.key=value" strings using the run-config schema. */

/* ---- models ---- */
DMPC_API int dmpc_model_create(const char* env, uint64_t seed, const char* const* overrides, int n_overrides,
                               dmpc_model** out);
DMPC_API int dmpc_model_load(const char* path, dmpc_model** out);
DMPC_API int dmpc_model_save(const dmpc_model* model, const char* path);
DMPC_API int dmpc_model_dims(const dmpc_model* model, int* obs_dim, int* action_dim, int* latent_dim);
DMPC_API void dmpc_model_free(dmpc_model* model);

/* ---- environments ---- */
DMPC_API int dmpc_env_create(const char* name, dmpc_env** out);
DMPC_API int dmpc_env_dims(const dmpc_env* env, int* obs_dim, int* action_dim, int* episode_length);
DMPC_API int dmpc_env_reset(dmpc_env* env, uint64_t seed, double* obs_out);
/* Actions are clipped to [-1, 1]; done_out is 1 at the episode limit. */
DMPC_API int dmpc_env_step(dmpc_env* env, const double* action, double* obs_out, double* reward_out,
                           int* done_out);
DMPC_API void dmpc_env_free(dmpc_env* env);

/* ---- planners ---- */
typedef struct dmpc_plan_diag {
  double objective;
  long long dynamics_generation;
  long long dynamics_optimization;
  long long dynamics_rescoring;
  long long reward_evals;
  long long q_evals;
  long long policy_evals;
  double grad_norm_mean;
  double grad_norm_max;
  long long plan_micros;
  int fallback;
} dmpc_plan_diag;

/* kind: "policy" | "mppi" | "dream_mpc". The planner keeps reuse/warm-start
 * state across calls; reset it at episode boundaries. */
DMPC_API int dmpc_planner_create(const dmpc_model* model, const char* kind, uint64_t seed,
                                 const char* const* overrides, int n_overrides, dmpc_planner** out);
DMPC_API int dmpc_planner_reset(dmpc_planner* planner);
DMPC_API int dmpc_planner_plan(dmpc_planner* planner, const double* obs, int deterministic, double* action_out,
                               dmpc_plan_diag* diag_out);
DMPC_API void dmpc_planner_free(dmpc_planner* planner);

/* ---- coarse operations (the CLI surface) ---- */

/* Runs a full training run from a config file plus overrides; writes the
 * resolved run directory path into run_dir_out. */
DMPC_API int dmpc_train(const char* config_path, const char* const* overrides, int n_overrides,
                        char* run_dir_out, size_t run_dir_len);

typedef struct dmpc_eval_stats {
  double mean_return;
  double std_return;
  double mean_plan_micros;
  int episodes;
} dmpc_eval_stats;

DMPC_API int dmpc_evaluate(const char* checkpoint, const char* planner, int episodes, uint64_t seed,
                           const char* const* overrides, int n_overrides, const char* csv_path,
                           dmpc_eval_stats* out);

/* One-off planner benchmark; checkpoint may be NULL for a fresh random
 * model. Fills the last step's diagnostics. */
DMPC_API int dmpc_plan_bench(const char* checkpoint, const char* planner, int steps, uint64_t seed,
                             const char* const* overrides, int n_overrides, dmpc_plan_diag* out);

/* ---- diagnostic studies; CSV artifacts land in out_dir ---- */
DMPC_API int dmpc_study_gradients(const char* checkpoint, const char* source, const char* planner,
                                  const char* horizons_csv, const char* seeds_csv, int samples,
                                  double gaussian_std, const char* const* overrides, int n_overrides,
                                  const char* out_dir);
DMPC_API int dmpc_study_value(const char* checkpoint, const char* planner, int episodes, uint64_t seed,
                              int min_estimate, const char* const* overrides, int n_overrides,
                              const char* out_dir);
DMPC_API int dmpc_study_exploitation(const char* checkpoint, const char* planner, int episodes, uint64_t seed,
                                     const char* const* overrides, int n_overrides, const char* out_dir);
DMPC_API int dmpc_study_timing(const char* checkpoint, const char* planners_csv, int episodes, uint64_t seed,
                               const char* const* overrides, int n_overrides, const char* out_dir);

DMPC_API int dmpc_normalized_score(double x, double random_score, double target_score, double* out);

#ifdef __cplusplus
}
#endif

#endif /* DMPC_H_ */
