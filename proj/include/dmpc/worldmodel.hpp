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

#ifndef DMPC_WORLDMODEL_HPP_
#define DMPC_WORLDMODEL_HPP_

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/diffcore.hpp"
#include "dmpc/rng.hpp"

namespace dmpc {

struct ModelConfig {
  int obs_dim = 0;
  int action_dim = 0;
  int latent_dim = 64;
  int hidden_dim = 128;
  int simnorm_group = 8;  // V
  int ensemble = 5;       // M
  double gamma = 0.99;
  double log_std_min = -10.0;
  double log_std_max = 2.0;
  double q_dropout = 0.01;  // first Q layer, training forwards only
};

// Simplicial-normalized latent vector.
struct LatentState {
  Eigen::VectorXd z;
};

// Action vector with every coordinate in [-1, 1].
struct Action {
  Eigen::VectorXd a;
};

// Per-planner-call evaluation accounting; owned by a single caller.
struct EvalCounter {
  long dynamics_evals = 0;
  long reward_evals = 0;
  long q_evals = 0;
  long policy_evals = 0;

  EvalCounter operator-(const EvalCounter& o) const {
    return {dynamics_evals - o.dynamics_evals, reward_evals - o.reward_evals, q_evals - o.q_evals,
            policy_evals - o.policy_evals};
  }
};

// The five learned components plus frozen target copies of the Q ensemble.
struct WorldModel {
  ModelConfig config;
  DenseStack encoder;                  // obs -> latent, SimNorm head
  DenseStack dynamics;                 // latent+action -> latent, SimNorm head
  DenseStack reward;                   // latent+action -> scalar
  std::vector<DenseStack> q_ensemble;  // latent+action -> scalar, M members
  std::vector<DenseStack> q_targets;   // EMA copies
  DenseStack policy;                   // latent -> [mean, raw log-std]
};

WorldModel MakeWorldModel(const ModelConfig& config, Rng& rng);

void SaveModel(const WorldModel& model, const std::string& path);
WorldModel LoadModel(const std::string& path, double q_dropout = 0.01);

// --- Frozen-model prediction (thread-safe on a const model) ----------------

LatentState Encode(const WorldModel& model, const Eigen::VectorXd& observation);

LatentState DynamicsStep(const WorldModel& model, const LatentState& z, const Action& a, EvalCounter* counter);

double PredictReward(const WorldModel& model, const LatentState& z, const Action& a, EvalCounter* counter);

// All M ensemble predictions; dropout disabled (plan/eval mode).
Eigen::VectorXd QValues(const WorldModel& model, const LatentState& z, const Action& a, EvalCounter* counter,
                        bool use_target = false);

// Tanh-squashed Gaussian policy head with hard-clamped log-std. Returns the
// action and its log-probability (with the tanh change-of-variables term).
std::pair<Action, double> PolicySample(const WorldModel& model, const LatentState& z, Rng& rng,
                                       bool deterministic, EvalCounter* counter = nullptr);

// Eq.-style epistemic uncertainty of an ensemble prediction:
// mean(q) * population_std(q). The sign follows the mean; `abs_mean`
// substitutes |mean| for callers that want a strict penalty.
double EnsembleUncertainty(const Eigen::VectorXd& q, bool abs_mean = false);

// r + gamma * min over two randomly subsampled target members at
// (z_next, a'), a' ~ policy(z_next).
double TdTarget(const WorldModel& model, double reward, const LatentState& z_next, Rng& rng);

// --- Batched prediction (columns are independent samples) ------------------

Eigen::MatrixXd EncodeBatch(const WorldModel& model, const Eigen::MatrixXd& obs);
Eigen::MatrixXd DynamicsBatch(const WorldModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                              EvalCounter* counter);
Eigen::RowVectorXd RewardBatch(const WorldModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                               EvalCounter* counter);
// (M x B) ensemble predictions.
Eigen::MatrixXd QBatch(const WorldModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                       EvalCounter* counter, bool use_target = false);

struct PolicyBatchSample {
  Eigen::MatrixXd action;       // action_dim x B
  Eigen::RowVectorXd log_prob;  // 1 x B
};
PolicyBatchSample PolicySampleBatch(const WorldModel& model, const Eigen::MatrixXd& z, Rng& rng,
                                    bool deterministic, EvalCounter* counter = nullptr);

// --- Training ---------------------------------------------------------------

struct TrainHyper {
  int horizon = 3;  // sequence length (H); batches carry H+1 observations
  double lr = 3e-4;
  double grad_clip_norm = 20.0;
  double consistency_coef = 20.0;
  double reward_coef = 0.1;
  double value_coef = 0.1;
  double temporal_lambda = 0.5;
  double target_momentum = 0.99;
  double entropy_coef = 1e-4;
  double scale_tau = 0.01;  // EMA rate of the (5%, 95%) percentile span
};

// A batch of H+1-step sequences. obs has H+1 entries of (obs_dim x B);
// actions and rewards have H entries.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> obs;
  std::vector<Eigen::MatrixXd> actions;
  std::vector<Eigen::RowVectorXd> rewards;

  int batch_size() const { return obs.empty() ? 0 : static_cast<int>(obs.front().cols()); }
  int horizon() const { return static_cast<int>(actions.size()); }
};

// Per-component temporal-weighted sums (without their coefficients); `total`
// is the coefficient-weighted training loss.
struct LossReport {
  double consistency = 0.0;
  double reward = 0.0;
  double value = 0.0;
  double total = 0.0;
  bool finite = true;
};

struct PolicyLossReport {
  double objective = 0.0;
  double q_term = 0.0;
  double entropy = 0.0;
  double scale = 1.0;
  bool finite = true;
};

// Owns the optimizer states and the running percentile scale. Updates demand
// exclusive access to the model.
class Trainer {
 public:
  Trainer(WorldModel& model, const TrainHyper& hyper);

  // Latent rollout through the dynamics with per-step temporally weighted
  // consistency / reward / value losses, one adaptive-moment step over
  // encoder+dynamics+reward+Q, then an EMA update of the target ensemble.
  // A non-finite loss aborts the update (parameters untouched).
  LossReport ModelUpdate(const SequenceBatch& batch, Rng& rng);

  // Maximizes mean ensemble Q (normalized by the running percentile span)
  // plus an entropy bonus; only policy parameters are updated.
  PolicyLossReport PolicyUpdate(const Eigen::MatrixXd& latents, Rng& rng);

  // Detached latent rollout of the most recent ModelUpdate batch, for
  // feeding PolicyUpdate.
  const Eigen::MatrixXd& last_rollout_latents() const { return rollout_latents_; }

  const TrainHyper& hyper() const { return hyper_; }

 private:
  WorldModel& model_;
  TrainHyper hyper_;
  AdamState model_adam_;
  AdamState policy_adam_;
  double q_scale_ = 1.0;
  Eigen::MatrixXd rollout_latents_;
};

// Linear-interpolation percentile (p in [0, 100]) of a copied value set.
double Percentile(std::vector<double> values, double p);

}  // namespace dmpc

#endif  // DMPC_WORLDMODEL_HPP_
