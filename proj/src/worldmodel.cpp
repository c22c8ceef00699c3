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

#include "dmpc/worldmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dmpc/checkpoint.hpp"

namespace dmpc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)
constexpr double kLogTwo = 0.6931471805599453;

double StableSoftplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Eigen::MatrixXd ConcatRows(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void CheckLatent(const WorldModel& model, const Eigen::MatrixXd& z) {
  if (z.rows() != model.config.latent_dim) throw std::invalid_argument("latent dimension mismatch");
}

void CheckAction(const WorldModel& model, const Eigen::MatrixXd& a) {
  if (a.rows() != model.config.action_dim) throw std::invalid_argument("action dimension mismatch");
}

// Flat parameter group [encoder, dynamics, reward, q_0..q_{M-1}].
int ModelGroupParamCount(const WorldModel& m) {
  int n = ParamCount(m.encoder) + ParamCount(m.dynamics) + ParamCount(m.reward);
  for (const auto& q : m.q_ensemble) n += ParamCount(q);
  return n;
}

template <typename Fn>
void ForEachModelGroupStack(WorldModel& m, Fn&& fn) {
  fn(m.encoder);
  fn(m.dynamics);
  fn(m.reward);
  for (auto& q : m.q_ensemble) fn(q);
}

}  // namespace

WorldModel MakeWorldModel(const ModelConfig& config, Rng& rng) {
  if (config.obs_dim <= 0 || config.action_dim <= 0) throw std::invalid_argument("MakeWorldModel: bad dims");
  if (config.latent_dim % config.simnorm_group != 0)
    throw std::invalid_argument("MakeWorldModel: latent_dim not divisible by simnorm group");
  if (config.ensemble < 2) throw std::invalid_argument("MakeWorldModel: ensemble must be >= 2");

  WorldModel m;
  m.config = config;
  const int za = config.latent_dim + config.action_dim;
  const int hid = config.hidden_dim;

  auto make_stack = [&](std::initializer_list<DenseLayer> layers) {
    DenseStack s;
    s.simnorm_group = config.simnorm_group;
    s.layers = layers;
    return s;
  };

  m.encoder = make_stack({MakeLayer(config.obs_dim, hid, PostOp::kLayerNormMish, rng),
                          MakeLayer(hid, config.latent_dim, PostOp::kSimNorm, rng)});
  m.dynamics = make_stack({MakeLayer(za, hid, PostOp::kLayerNormMish, rng),
                           MakeLayer(hid, hid, PostOp::kLayerNormMish, rng),
                           MakeLayer(hid, config.latent_dim, PostOp::kSimNorm, rng)});
  m.reward = make_stack({MakeLayer(za, hid, PostOp::kLayerNormMish, rng),
                         MakeLayer(hid, hid, PostOp::kLayerNormMish, rng),
                         MakeLayer(hid, 1, PostOp::kLinear, rng)});
  // Zero-initialized reward/value heads keep early planning targets neutral.
  m.reward.layers.back().weight.setZero();
  for (int i = 0; i < config.ensemble; ++i) {
    DenseStack q = make_stack({MakeLayer(za, hid, PostOp::kLayerNormMish, rng, config.q_dropout),
                               MakeLayer(hid, hid, PostOp::kLayerNormMish, rng),
                               MakeLayer(hid, 1, PostOp::kLinear, rng)});
    q.layers.back().weight.setZero();
    m.q_ensemble.push_back(std::move(q));
  }
  m.q_targets = m.q_ensemble;
  m.policy = make_stack({MakeLayer(config.latent_dim, hid, PostOp::kLayerNormMish, rng),
                         MakeLayer(hid, hid, PostOp::kLayerNormMish, rng),
                         MakeLayer(hid, 2 * config.action_dim, PostOp::kLinear, rng)});
  return m;
}

void SaveModel(const WorldModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("SaveModel: cannot open " + path);
  ByteWriter w(out);
  WriteHeader(w);
  w.U32(static_cast<uint32_t>(model.config.obs_dim));
  w.U32(static_cast<uint32_t>(model.config.action_dim));
  w.U32(static_cast<uint32_t>(model.config.latent_dim));
  w.U32(static_cast<uint32_t>(model.config.simnorm_group));
  w.U32(static_cast<uint32_t>(model.config.ensemble));
  w.F64(model.config.gamma);
  WriteStack(w, model.encoder);
  WriteStack(w, model.dynamics);
  WriteStack(w, model.reward);
  for (const auto& q : model.q_ensemble) WriteStack(w, q);
  for (const auto& q : model.q_targets) WriteStack(w, q);
  WriteStack(w, model.policy);
  if (!out) throw std::runtime_error("SaveModel: write failed for " + path);
}

WorldModel LoadModel(const std::string& path, double q_dropout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("LoadModel: cannot open " + path);
  ByteReader r(in);
  ReadHeader(r);
  WorldModel m;
  m.config.obs_dim = static_cast<int>(r.U32());
  m.config.action_dim = static_cast<int>(r.U32());
  m.config.latent_dim = static_cast<int>(r.U32());
  m.config.simnorm_group = static_cast<int>(r.U32());
  m.config.ensemble = static_cast<int>(r.U32());
  m.config.gamma = r.F64();
  m.config.q_dropout = q_dropout;
  const int v = m.config.simnorm_group;
  m.encoder = ReadStack(r, v);
  m.dynamics = ReadStack(r, v);
  m.reward = ReadStack(r, v);
  for (int i = 0; i < m.config.ensemble; ++i) {
    DenseStack q = ReadStack(r, v);
    if (!q.layers.empty()) q.layers.front().dropout = q_dropout;
    m.q_ensemble.push_back(std::move(q));
  }
  for (int i = 0; i < m.config.ensemble; ++i) m.q_targets.push_back(ReadStack(r, v));
  m.policy = ReadStack(r, v);
  m.config.hidden_dim = m.dynamics.layers.empty() ? 0 : static_cast<int>(m.dynamics.layers.front().weight.rows());
  return m;
}

LatentState Encode(const WorldModel& model, const Eigen::VectorXd& observation) {
  if (observation.size() != model.config.obs_dim) throw std::invalid_argument("Encode: obs dimension mismatch");
  return {DenseForward(model.encoder, observation)};
}

Eigen::MatrixXd EncodeBatch(const WorldModel& model, const Eigen::MatrixXd& obs) {
  if (obs.rows() != model.config.obs_dim) throw std::invalid_argument("EncodeBatch: obs dimension mismatch");
  return Forward(model.encoder, obs);
}

LatentState DynamicsStep(const WorldModel& model, const LatentState& z, const Action& a, EvalCounter* counter) {
  return {DynamicsBatch(model, z.z, a.a, counter).col(0)};
}

Eigen::MatrixXd DynamicsBatch(const WorldModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                              EvalCounter* counter) {
  CheckLatent(model, z);
  CheckAction(model, a);
  if (counter) counter->dynamics_evals += z.cols();
  return Forward(model.dynamics, ConcatRows(z, a));
}

double PredictReward(const WorldModel& model, const LatentState& z, const Action& a, EvalCounter* counter) {
  return RewardBatch(model, z.z, a.a, counter)[0];
}

Eigen::RowVectorXd RewardBatch(const WorldModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                               EvalCounter* counter) {
  CheckLatent(model, z);
  CheckAction(model, a);
  if (counter) counter->reward_evals += z.cols();
  return Forward(model.reward, ConcatRows(z, a)).row(0);
}

Eigen::VectorXd QValues(const WorldModel& model, const LatentState& z, const Action& a, EvalCounter* counter,
                        bool use_target) {
  return QBatch(model, z.z, a.a, counter, use_target).col(0);
}

Eigen::MatrixXd QBatch(const WorldModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a,
                       EvalCounter* counter, bool use_target) {
  CheckLatent(model, z);
  CheckAction(model, a);
  const auto& ensemble = use_target ? model.q_targets : model.q_ensemble;
  if (counter) counter->q_evals += z.cols() * static_cast<long>(ensemble.size());
  const Eigen::MatrixXd x = ConcatRows(z, a);
  Eigen::MatrixXd out(ensemble.size(), z.cols());
  for (size_t m = 0; m < ensemble.size(); ++m) out.row(m) = Forward(ensemble[m], x).row(0);
  return out;
}

std::pair<Action, double> PolicySample(const WorldModel& model, const LatentState& z, Rng& rng,
                                       bool deterministic, EvalCounter* counter) {
  PolicyBatchSample s = PolicySampleBatch(model, z.z, rng, deterministic, counter);
  return {Action{s.action.col(0)}, s.log_prob[0]};
}

PolicyBatchSample PolicySampleBatch(const WorldModel& model, const Eigen::MatrixXd& z, Rng& rng,
                                    bool deterministic, EvalCounter* counter) {
  CheckLatent(model, z);
  const int adim = model.config.action_dim;
  const int batch = static_cast<int>(z.cols());
  if (counter) counter->policy_evals += batch;
  const Eigen::MatrixXd head = Forward(model.policy, z);
  const Eigen::MatrixXd mean = head.topRows(adim);
  const Eigen::MatrixXd log_std =
      head.bottomRows(adim).cwiseMax(model.config.log_std_min).cwiseMin(model.config.log_std_max);

  PolicyBatchSample out;
  out.action.resize(adim, batch);
  out.log_prob.resize(batch);
  for (int c = 0; c < batch; ++c) {
    double logp = 0.0;
    for (int i = 0; i < adim; ++i) {
      const double mu = mean(i, c);
      const double ls = log_std(i, c);
      const double sigma = std::exp(ls);
      const double eps = deterministic ? 0.0 : rng.Normal();
      const double u = mu + sigma * eps;
      out.action(i, c) = std::tanh(u);
      // log N(u; mu, sigma) - log(1 - tanh(u)^2), the latter written as
      // 2*(log 2 - u - softplus(-2u)) for stability.
      logp += -0.5 * eps * eps - ls - 0.5 * kLogTwoPi;
      logp += -2.0 * (kLogTwo - u - StableSoftplus(-2.0 * u));
    }
    out.log_prob[c] = logp;
  }
  return out;
}

double EnsembleUncertainty(const Eigen::VectorXd& q, bool abs_mean) {
  if (q.size() < 1) throw std::invalid_argument("EnsembleUncertainty: empty ensemble");
  const double mean = q.mean();
  const double var = (q.array() - mean).square().sum() / q.size();
  const double base = abs_mean ? std::abs(mean) : mean;
  return base * std::sqrt(var);
}

double TdTarget(const WorldModel& model, double reward, const LatentState& z_next, Rng& rng) {
  const int m_count = static_cast<int>(model.q_targets.size());
  auto [a_next, logp] = PolicySample(model, z_next, rng, /*deterministic=*/false);
  (void)logp;
  const int i = rng.UniformInt(m_count);
  const int j = (i + 1 + rng.UniformInt(m_count - 1)) % m_count;
  const Eigen::MatrixXd x = ConcatRows(z_next.z, a_next.a);
  const double qi = Forward(model.q_targets[i], x)(0, 0);
  const double qj = Forward(model.q_targets[j], x)(0, 0);
  return reward + model.config.gamma * std::min(qi, qj);
}

double Percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("Percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = static_cast<size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

Trainer::Trainer(WorldModel& model, const TrainHyper& hyper) : model_(model), hyper_(hyper) {
  model_adam_ = AdamState::Zeros(ModelGroupParamCount(model));
  model_adam_.clip_norm = hyper.grad_clip_norm;
  policy_adam_ = AdamState::Zeros(ParamCount(model.policy));
  policy_adam_.clip_norm = hyper.grad_clip_norm;
}

LossReport Trainer::ModelUpdate(const SequenceBatch& batch, Rng& rng) {
  const int horizon = batch.horizon();
  const int b = batch.batch_size();
  const int latent = model_.config.latent_dim;
  const int m_count = model_.config.ensemble;
  if (horizon != hyper_.horizon || static_cast<int>(batch.obs.size()) != horizon + 1)
    throw std::invalid_argument("ModelUpdate: batch horizon mismatch");

  // Forward: latent rollout with tapes, plus stop-gradient targets.
  GradTape tape_enc;
  std::vector<Eigen::MatrixXd> zs(horizon + 1);
  zs[0] = Forward(model_.encoder, batch.obs[0], &tape_enc);

  std::vector<GradTape> tape_dyn(horizon), tape_rew(horizon);
  std::vector<std::vector<GradTape>> tape_q(horizon, std::vector<GradTape>(m_count));
  std::vector<Eigen::RowVectorXd> reward_pred(horizon);
  std::vector<Eigen::MatrixXd> q_pred(horizon);  // (M x B) each
  std::vector<Eigen::MatrixXd> z_target(horizon + 1);
  std::vector<Eigen::RowVectorXd> td(horizon);

  for (int t = 0; t < horizon; ++t) {
    const Eigen::MatrixXd x = ConcatRows(zs[t], batch.actions[t]);
    zs[t + 1] = Forward(model_.dynamics, x, &tape_dyn[t]);
    reward_pred[t] = Forward(model_.reward, x, &tape_rew[t]).row(0);
    q_pred[t].resize(m_count, b);
    for (int m = 0; m < m_count; ++m)
      q_pred[t].row(m) = ForwardTrain(model_.q_ensemble[m], x, rng, tape_q[t][m]).row(0);

    z_target[t + 1] = Forward(model_.encoder, batch.obs[t + 1]);
    // TD target: r + gamma * min over two random target members at the
    // next true latent under a fresh policy sample.
    PolicyBatchSample next_a = PolicySampleBatch(model_, z_target[t + 1], rng, /*deterministic=*/false);
    const int i = rng.UniformInt(m_count);
    const int j = (i + 1 + rng.UniformInt(m_count - 1)) % m_count;
    const Eigen::MatrixXd xn = ConcatRows(z_target[t + 1], next_a.action);
    const Eigen::RowVectorXd qi = Forward(model_.q_targets[i], xn).row(0);
    const Eigen::RowVectorXd qj = Forward(model_.q_targets[j], xn).row(0);
    td[t] = batch.rewards[t] + model_.config.gamma * qi.cwiseMin(qj);
  }

  // Losses (temporal weight lambda^t, batch-meaned).
  LossReport report;
  double w = 1.0;
  std::vector<double> weights(horizon);
  for (int t = 0; t < horizon; ++t) {
    weights[t] = w;
    report.consistency += w * (zs[t + 1] - z_target[t + 1]).array().square().sum() / (latent * b);
    report.reward += w * (reward_pred[t] - batch.rewards[t]).array().square().sum() / b;
    report.value += w * (q_pred[t].rowwise() - td[t]).array().square().sum() / (m_count * b);
    w *= hyper_.temporal_lambda;
  }
  report.total = hyper_.consistency_coef * report.consistency + hyper_.reward_coef * report.reward +
                 hyper_.value_coef * report.value;
  report.finite = std::isfinite(report.total);

  // Detached rollout latents for the policy update.
  rollout_latents_.resize(latent, static_cast<Eigen::Index>(b) * (horizon + 1));
  for (int t = 0; t <= horizon; ++t) rollout_latents_.middleCols(static_cast<Eigen::Index>(t) * b, b) = zs[t];

  if (!report.finite) return report;

  // Backward.
  StackGrads g_enc = StackGrads::ZerosLike(model_.encoder);
  StackGrads g_dyn = StackGrads::ZerosLike(model_.dynamics);
  StackGrads g_rew = StackGrads::ZerosLike(model_.reward);
  std::vector<StackGrads> g_q;
  for (int m = 0; m < m_count; ++m) g_q.push_back(StackGrads::ZerosLike(model_.q_ensemble[m]));

  Eigen::MatrixXd dz_next = Eigen::MatrixXd::Zero(latent, b);
  for (int t = horizon - 1; t >= 0; --t) {
    dz_next += hyper_.consistency_coef * weights[t] * 2.0 / (latent * b) * (zs[t + 1] - z_target[t + 1]);
    Eigen::MatrixXd dx = Backward(model_.dynamics, tape_dyn[t], dz_next, &g_dyn);

    const Eigen::MatrixXd drew =
        (hyper_.reward_coef * weights[t] * 2.0 / b * (reward_pred[t] - batch.rewards[t]));
    dx += Backward(model_.reward, tape_rew[t], drew, &g_rew);

    for (int m = 0; m < m_count; ++m) {
      const Eigen::MatrixXd dq =
          (hyper_.value_coef * weights[t] * 2.0 / (m_count * b) * (q_pred[t].row(m) - td[t]));
      dx += Backward(model_.q_ensemble[m], tape_q[t][m], dq, &g_q[m]);
    }
    dz_next = dx.topRows(latent);
  }
  Backward(model_.encoder, tape_enc, dz_next, &g_enc);

  // Flatten, clip, step.
  Eigen::VectorXd params(model_adam_.m.size());
  Eigen::VectorXd grads(model_adam_.m.size());
  int off = 0;
  auto pack = [&](const DenseStack& s, const StackGrads& g) {
    const int n = ParamCount(s);
    CopyParamsTo(s, params.segment(off, n));
    CopyGradsTo(g, grads.segment(off, n));
    off += n;
  };
  pack(model_.encoder, g_enc);
  pack(model_.dynamics, g_dyn);
  pack(model_.reward, g_rew);
  for (int m = 0; m < m_count; ++m) pack(model_.q_ensemble[m], g_q[m]);

  if (!grads.allFinite()) {
    report.finite = false;
    return report;
  }
  AdamStep(params, grads, model_adam_, hyper_.lr);
  off = 0;
  ForEachModelGroupStack(model_, [&](DenseStack& s) {
    const int n = ParamCount(s);
    CopyParamsFrom(s, params.segment(off, n));
    off += n;
  });

  // Target ensemble EMA.
  const double mom = hyper_.target_momentum;
  for (int m = 0; m < m_count; ++m) {
    for (size_t l = 0; l < model_.q_targets[m].layers.size(); ++l) {
      auto& tgt = model_.q_targets[m].layers[l];
      const auto& online = model_.q_ensemble[m].layers[l];
      tgt.weight = mom * tgt.weight + (1.0 - mom) * online.weight;
      tgt.bias = mom * tgt.bias + (1.0 - mom) * online.bias;
    }
  }
  return report;
}

PolicyLossReport Trainer::PolicyUpdate(const Eigen::MatrixXd& latents, Rng& rng) {
  const int adim = model_.config.action_dim;
  const int b = static_cast<int>(latents.cols());
  const int m_count = model_.config.ensemble;

  GradTape tape_pi;
  const Eigen::MatrixXd head = Forward(model_.policy, latents, &tape_pi);
  const Eigen::MatrixXd mean = head.topRows(adim);
  const Eigen::MatrixXd raw = head.bottomRows(adim);
  const Eigen::MatrixXd log_std = raw.cwiseMax(model_.config.log_std_min).cwiseMin(model_.config.log_std_max);
  const Eigen::MatrixXd sigma = log_std.array().exp();
  const Eigen::MatrixXd eps = rng.NormalMatrix(adim, b);
  const Eigen::MatrixXd u = mean + sigma.cwiseProduct(eps);
  const Eigen::MatrixXd act = u.array().tanh();

  Eigen::RowVectorXd logp = Eigen::RowVectorXd::Zero(b);
  for (int c = 0; c < b; ++c)
    for (int i = 0; i < adim; ++i)
      logp[c] += -0.5 * eps(i, c) * eps(i, c) - log_std(i, c) - 0.5 * kLogTwoPi -
                 2.0 * (kLogTwo - u(i, c) - StableSoftplus(-2.0 * u(i, c)));

  // Mean ensemble Q at the sampled actions; input gradients only.
  const Eigen::MatrixXd x = ConcatRows(latents, act);
  std::vector<GradTape> tape_q(m_count);
  Eigen::RowVectorXd q_mean = Eigen::RowVectorXd::Zero(b);
  for (int m = 0; m < m_count; ++m)
    q_mean += Forward(model_.q_ensemble[m], x, &tape_q[m]).row(0) / m_count;

  // Running (5%, 95%) percentile span of the Q landscape.
  std::vector<double> qv(q_mean.data(), q_mean.data() + b);
  const double span = std::max(1.0, Percentile(qv, 95.0) - Percentile(qv, 5.0));
  q_scale_ += hyper_.scale_tau * (span - q_scale_);

  PolicyLossReport report;
  report.scale = q_scale_;
  report.q_term = q_mean.mean() / q_scale_;
  report.entropy = -logp.mean();
  report.objective = report.q_term + hyper_.entropy_coef * report.entropy;
  report.finite = std::isfinite(report.objective);
  if (!report.finite) return report;

  // d(loss)/d(action), loss = -objective.
  Eigen::MatrixXd da = Eigen::MatrixXd::Zero(adim, b);
  const Eigen::RowVectorXd dq = Eigen::RowVectorXd::Constant(b, -1.0 / (q_scale_ * b * m_count));
  for (int m = 0; m < m_count; ++m) da += Backward(model_.q_ensemble[m], tape_q[m], dq).bottomRows(adim);

  const double ec = hyper_.entropy_coef / b;
  Eigen::MatrixXd dmean(adim, b), draw(adim, b);
  for (int c = 0; c < b; ++c) {
    for (int i = 0; i < adim; ++i) {
      const double a = act(i, c);
      const double du = da(i, c) * (1.0 - a * a) + ec * 2.0 * a;  // Q path + entropy path via u
      const double dls = du * sigma(i, c) * eps(i, c) - ec;       // chain into log-std, plus direct -l term
      dmean(i, c) = du;
      const bool active = raw(i, c) > model_.config.log_std_min && raw(i, c) < model_.config.log_std_max;
      draw(i, c) = active ? dls : 0.0;
    }
  }
  Eigen::MatrixXd dhead(2 * adim, b);
  dhead.topRows(adim) = dmean;
  dhead.bottomRows(adim) = draw;

  StackGrads g_pi = StackGrads::ZerosLike(model_.policy);
  Backward(model_.policy, tape_pi, dhead, &g_pi);
  Eigen::VectorXd params(policy_adam_.m.size());
  Eigen::VectorXd grads(policy_adam_.m.size());
  CopyParamsTo(model_.policy, params);
  CopyGradsTo(g_pi, grads);
  if (!grads.allFinite()) {
    report.finite = false;
    return report;
  }
  AdamStep(params, grads, policy_adam_, hyper_.lr);
  CopyParamsFrom(model_.policy, params);
  return report;
}

}  // namespace dmpc
