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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "dmpc/worldmodel.hpp"
#include "test_oracles.hpp"

using namespace dmpc;

namespace {

ModelConfig SmallConfig() {
  ModelConfig mc;
  mc.obs_dim = 3;
  mc.action_dim = 1;
  mc.latent_dim = 16;
  mc.hidden_dim = 24;
  mc.simnorm_group = 8;
  mc.ensemble = 2;
  mc.q_dropout = 0.0;
  return mc;
}

WorldModel SmallModel(uint64_t seed = 42) {
  Rng rng(seed);
  return MakeWorldModel(SmallConfig(), rng);
}

void ZeroStack(DenseStack& stack) {
  for (auto& layer : stack.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

Eigen::VectorXd ModelParams(const WorldModel& m) {
  std::vector<const DenseStack*> stacks{&m.encoder, &m.dynamics, &m.reward, &m.policy};
  for (const auto& q : m.q_ensemble) stacks.push_back(&q);
  for (const auto& q : m.q_targets) stacks.push_back(&q);
  int total = 0;
  for (const auto* s : stacks) total += ParamCount(*s);
  Eigen::VectorXd out(total);
  int off = 0;
  for (const auto* s : stacks) {
    CopyParamsTo(*s, out.segment(off, ParamCount(*s)));
    off += ParamCount(*s);
  }
  return out;
}

}  // namespace

TEST_CASE("encode produces valid simnorm latents") {
  const WorldModel m = SmallModel();
  Rng rng(1);

  // Zero observation: zero pre-activations all the way to a uniform head.
  const LatentState z0 = Encode(m, Eigen::VectorXd::Zero(3));
  for (int i = 0; i < 16; ++i) CHECK(z0.z[i] == doctest::Approx(1.0 / 8).epsilon(1e-12));

  for (int trial = 0; trial < 20; ++trial) {
    const LatentState z = Encode(m, rng.NormalVector(3));
    for (int g = 0; g < 16; g += 8) {
      double sum = 0.0;
      for (int i = 0; i < 8; ++i) {
        CHECK(z.z[g + i] >= 0.0);
        sum += z.z[g + i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
  CHECK_THROWS_AS(Encode(m, Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("encode matches straight-line oracle") {
  const WorldModel m = SmallModel(7);
  Rng rng(2);
  const Eigen::VectorXd obs = rng.NormalVector(3);
  const Eigen::VectorXd want = oracle::EvalStack(m.encoder, obs);
  const LatentState z = Encode(m, obs);
  for (int i = 0; i < 16; ++i) CHECK(z.z[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("prediction ops count evaluations") {
  const WorldModel m = SmallModel();
  Rng rng(3);
  const LatentState z = Encode(m, rng.NormalVector(3));
  const Action a{Eigen::VectorXd::Constant(1, 0.3)};
  EvalCounter counter;

  const LatentState z2 = DynamicsStep(m, z, a, &counter);
  CHECK(counter.dynamics_evals == 1);
  for (int g = 0; g < 16; g += 8) {
    double sum = 0.0;
    for (int i = 0; i < 8; ++i) sum += z2.z[g + i];
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  PredictReward(m, z, a, &counter);
  CHECK(counter.reward_evals == 1);

  const Eigen::VectorXd q = QValues(m, z, a, &counter);
  CHECK(q.size() == 2);
  CHECK(counter.q_evals == 2);

  Rng prng(4);
  PolicySample(m, z, prng, true, &counter);
  CHECK(counter.policy_evals == 1);
}

TEST_CASE("prediction matches straight-line oracle") {
  const WorldModel m = SmallModel(11);
  Rng rng(5);
  const LatentState z = Encode(m, rng.NormalVector(3));
  const Action a{Eigen::VectorXd::Constant(1, -0.4)};
  Eigen::VectorXd za(17);
  za << z.z, a.a;

  const LatentState znext = DynamicsStep(m, z, a, nullptr);
  const Eigen::VectorXd want_z = oracle::EvalStack(m.dynamics, za);
  for (int i = 0; i < 16; ++i) CHECK(znext.z[i] == doctest::Approx(want_z[i]).epsilon(1e-12));

  const double want_r = oracle::EvalStack(m.reward, za)[0];
  CHECK(PredictReward(m, z, a, nullptr) == doctest::Approx(want_r).epsilon(1e-12));

  const Eigen::VectorXd q = QValues(m, z, a, nullptr);
  for (int i = 0; i < 2; ++i)
    CHECK(q[i] == doctest::Approx(oracle::EvalStack(m.q_ensemble[i], za)[0]).epsilon(1e-12));
}

TEST_CASE("fresh model predicts zero rewards and values") {
  const WorldModel m = SmallModel();
  Rng rng(6);
  const LatentState z = Encode(m, rng.NormalVector(3));
  const Action a{Eigen::VectorXd::Constant(1, 0.9)};
  CHECK(PredictReward(m, z, a, nullptr) == 0.0);
  CHECK(QValues(m, z, a, nullptr).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plan-time predictions are pure functions") {
  WorldModel m = SmallModel();
  m.config.q_dropout = 0.01;
  m.q_ensemble[0].layers[0].dropout = 0.01;
  Rng rng(7);
  const LatentState z = Encode(m, rng.NormalVector(3));
  const Action a{Eigen::VectorXd::Constant(1, 0.1)};
  const Eigen::VectorXd q1 = QValues(m, z, a, nullptr);
  const Eigen::VectorXd q2 = QValues(m, z, a, nullptr);
  CHECK((q1 - q2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("policy_sample deterministic and clamped") {
  WorldModel m = SmallModel();
  ZeroStack(m.policy);
  Rng rng(8);
  const LatentState z = Encode(m, rng.NormalVector(3));

  // Zero mean head: deterministic action is tanh(0) = 0.
  auto [a_det, logp_det] = PolicySample(m, z, rng, /*deterministic=*/true);
  CHECK(a_det.a[0] == 0.0);

  // Raw log-std 5 is clamped to the configured max of 2.
  m.policy.layers.back().bias[1] = 5.0;
  Rng r1(99), r2(99);
  auto [a_s, logp_s] = PolicySample(m, z, r1, false);
  const double eps = r2.Normal();
  const double expected = std::tanh(0.0 + std::exp(2.0) * eps);
  CHECK(a_s.a[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(a_s.a[0]) <= 1.0);
}

TEST_CASE("policy_sample log-prob matches scalar formula") {
  const WorldModel m = SmallModel(21);
  Rng rng(9);
  const LatentState z = Encode(m, rng.NormalVector(3));
  Rng r1(123), r2(123);
  auto [a, logp] = PolicySample(m, z, r1, false);

  const Eigen::VectorXd head = oracle::EvalStack(m.policy, z.z);
  const double mu = head[0];
  const double ls = std::min(2.0, std::max(-10.0, head[1]));
  const double eps = r2.Normal();
  const double u = mu + std::exp(ls) * eps;
  CHECK(a.a[0] == doctest::Approx(std::tanh(u)).epsilon(1e-12));
  const double want = -0.5 * eps * eps - ls - 0.5 * std::log(2.0 * 3.14159265358979323846) -
                      std::log(1.0 - std::tanh(u) * std::tanh(u));
  CHECK(logp == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("policy_sample empirical std matches tanh-gaussian oracle") {
  const WorldModel m = SmallModel(31);
  Rng rng(10);
  const LatentState z = Encode(m, rng.NormalVector(3));
  const int n = 100000;

  Rng sample_rng(77);
  const PolicyBatchSample s = PolicySampleBatch(m, z.z.replicate(1, n), sample_rng, false);
  const double mean = s.action.row(0).mean();
  const double stddev = std::sqrt((s.action.row(0).array() - mean).square().sum() / (n - 1));

  // Oracle: sample the tanh-Gaussian directly from the head parameters.
  const Eigen::VectorXd head = oracle::EvalStack(m.policy, z.z);
  const double mu = head[0];
  const double sigma = std::exp(std::min(2.0, std::max(-10.0, head[1])));
  Rng orng(88);
  Eigen::VectorXd ref(n);
  for (int i = 0; i < n; ++i) ref[i] = std::tanh(mu + sigma * orng.Normal());
  const double ref_mean = ref.mean();
  const double ref_std = std::sqrt((ref.array() - ref_mean).square().sum() / (n - 1));

  // Std estimator error ~ std/sqrt(2(n-1)) per side; compare within 3 sigma.
  const double tol = 3.0 * std::sqrt(2.0) * ref_std / std::sqrt(2.0 * (n - 1));
  CHECK(std::abs(stddev - ref_std) < tol);
}

TEST_CASE("ensemble_uncertainty closed forms") {
  Eigen::VectorXd flat = Eigen::VectorXd::Ones(5);
  CHECK(EnsembleUncertainty(flat) == 0.0);

  Eigen::VectorXd two(2);
  two << 0.0, 2.0;
  CHECK(EnsembleUncertainty(two) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd neg(2);
  neg << -1.0, -3.0;
  CHECK(EnsembleUncertainty(neg) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(EnsembleUncertainty(neg, /*abs_mean=*/true) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ensemble_uncertainty is permutation invariant") {
  Rng rng(11);
  Eigen::VectorXd q = rng.NormalVector(5);
  const double base = EnsembleUncertainty(q);
  std::vector<int> perm{4, 2, 0, 3, 1};
  Eigen::VectorXd shuffled(5);
  for (int i = 0; i < 5; ++i) shuffled[i] = q[perm[i]];
  CHECK(EnsembleUncertainty(shuffled) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("td_target discount and ensemble behavior") {
  WorldModel m = SmallModel();
  Rng rng(12);
  const LatentState z = Encode(m, rng.NormalVector(3));

  WorldModel zero_gamma = m;
  zero_gamma.config.gamma = 0.0;
  Rng r1(5);
  CHECK(TdTarget(zero_gamma, 1.25, z, r1) == doctest::Approx(1.25).epsilon(1e-12));

  // Identical target members: the two-member min equals any member.
  WorldModel same = m;
  for (auto& q : same.q_targets) q = same.q_targets[0];
  Rng r2(6), r3(6);
  const double got = TdTarget(same, 0.5, z, r2);
  auto a_next = PolicySample(same, z, r3, false).first;
  Eigen::VectorXd za(17);
  za << z.z, a_next.a;
  const double member = oracle::EvalStack(same.q_targets[0], za)[0];
  CHECK(got == doctest::Approx(0.5 + same.config.gamma * member).epsilon(1e-12));
}

TEST_CASE("td_target matches hand-rolled oracle with a replayed stream") {
  WorldModel m = SmallModel(51);
  // Give the target heads nonzero output so the min matters.
  Rng wr(13);
  for (auto& q : m.q_targets) {
    q.layers.back().weight = 0.1 * wr.NormalMatrix(1, 24);
    q.layers.back().bias = wr.NormalVector(1);
  }
  Rng rng(14);
  const LatentState z = Encode(m, rng.NormalVector(3));

  Rng run(1001), replay(1001);
  const double got = TdTarget(m, -0.2, z, run);

  const auto a_next = PolicySample(m, z, replay, false).first;
  const int i = replay.UniformInt(2);
  const int j = (i + 1 + replay.UniformInt(1)) % 2;
  Eigen::VectorXd za(17);
  za << z.z, a_next.a;
  const double qi = oracle::EvalStack(m.q_targets[i], za)[0];
  const double qj = oracle::EvalStack(m.q_targets[j], za)[0];
  CHECK(got == doctest::Approx(-0.2 + m.config.gamma * std::min(qi, qj)).epsilon(1e-12));
}

TEST_CASE("model checkpoint round-trip is bit-exact") {
  const WorldModel m = SmallModel(61);
  const std::string path = (std::filesystem::temp_directory_path() / "dmpc_model_test.dmpc").string();
  SaveModel(m, path);
  const WorldModel loaded = LoadModel(path, m.config.q_dropout);
  CHECK(loaded.config.obs_dim == m.config.obs_dim);
  CHECK(loaded.config.action_dim == m.config.action_dim);
  CHECK(loaded.config.latent_dim == m.config.latent_dim);
  CHECK(loaded.config.simnorm_group == m.config.simnorm_group);
  CHECK(loaded.config.ensemble == m.config.ensemble);
  CHECK(loaded.config.gamma == m.config.gamma);
  CHECK(ModelParams(loaded) == ModelParams(m));
  std::filesystem::remove(path);
}

TEST_CASE("model_update zeroes losses on a memorized-zero world") {
  // Constant-latent encoder/dynamics and zero reward/value heads predict a
  // zero-reward world exactly, so every loss term vanishes.
  WorldModel m = SmallModel();
  ZeroStack(m.encoder);
  ZeroStack(m.dynamics);
  ZeroStack(m.reward);
  for (auto& q : m.q_ensemble) ZeroStack(q);
  for (auto& q : m.q_targets) ZeroStack(q);
  TrainHyper hyper;
  hyper.horizon = 2;
  Trainer trainer(m, hyper);

  SequenceBatch batch;
  Rng rng(15);
  batch.obs = {rng.NormalMatrix(3, 4), rng.NormalMatrix(3, 4), rng.NormalMatrix(3, 4)};
  batch.actions = {rng.NormalMatrix(1, 4), rng.NormalMatrix(1, 4)};
  batch.rewards = {Eigen::RowVectorXd::Zero(4), Eigen::RowVectorXd::Zero(4)};

  Rng urng(16);
  const LossReport report = trainer.ModelUpdate(batch, urng);
  CHECK(report.consistency == 0.0);
  CHECK(report.reward == 0.0);
  CHECK(report.value == 0.0);
  CHECK(report.total == 0.0);
  CHECK(report.finite);
}

TEST_CASE("model_update temporal weighting sums lambda powers") {
  // Constant world with unit rewards: each step's reward loss is exactly 1,
  // so the reported temporal sum is 1 + 0.5 + 0.25.
  WorldModel m = SmallModel();
  ZeroStack(m.encoder);
  ZeroStack(m.dynamics);
  ZeroStack(m.reward);
  for (auto& q : m.q_ensemble) ZeroStack(q);
  for (auto& q : m.q_targets) ZeroStack(q);
  TrainHyper hyper;
  hyper.horizon = 3;
  Trainer trainer(m, hyper);

  SequenceBatch batch;
  Rng rng(17);
  for (int t = 0; t < 4; ++t) batch.obs.push_back(rng.NormalMatrix(3, 2));
  for (int t = 0; t < 3; ++t) {
    batch.actions.push_back(rng.NormalMatrix(1, 2));
    batch.rewards.push_back(Eigen::RowVectorXd::Ones(2));
  }
  Rng urng(18);
  const LossReport report = trainer.ModelUpdate(batch, urng);
  CHECK(report.consistency == 0.0);
  CHECK(report.reward == doctest::Approx(1.75).epsilon(1e-12));
  // The unit reward also enters the TD target (td = 1 + gamma * 0), so the
  // zero-valued ensemble contributes the same temporal sum.
  CHECK(report.value == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("model_update single transition matches a hand-rolled loss oracle") {
  WorldModel m = SmallModel(71);
  // Constant target heads make the TD target independent of the rng.
  for (auto& q : m.q_targets) {
    ZeroStack(q);
    q.layers.back().bias[0] = 0.75;
  }
  // Give online reward/Q heads nonzero output.
  Rng wr(19);
  m.reward.layers.back().weight = 0.1 * wr.NormalMatrix(1, 24);
  for (auto& q : m.q_ensemble) q.layers.back().weight = 0.1 * wr.NormalMatrix(1, 24);

  TrainHyper hyper;
  hyper.horizon = 1;
  Trainer trainer(m, hyper);

  SequenceBatch batch;
  Rng rng(20);
  batch.obs = {rng.NormalMatrix(3, 1), rng.NormalMatrix(3, 1)};
  batch.actions = {rng.NormalMatrix(1, 1)};
  batch.rewards = {Eigen::RowVectorXd::Constant(1, -0.3)};

  // Oracle, straight-line from the pre-update parameters.
  const Eigen::VectorXd z0 = oracle::EvalStack(m.encoder, Eigen::VectorXd(batch.obs[0].col(0)));
  Eigen::VectorXd za(17);
  za << z0, batch.actions[0].col(0);
  const Eigen::VectorXd z1 = oracle::EvalStack(m.dynamics, za);
  const Eigen::VectorXd z1_target = oracle::EvalStack(m.encoder, Eigen::VectorXd(batch.obs[1].col(0)));
  const double consistency = (z1 - z1_target).squaredNorm() / 16.0;
  const double rhat = oracle::EvalStack(m.reward, za)[0];
  const double reward_loss = (rhat + 0.3) * (rhat + 0.3);
  const double td = -0.3 + m.config.gamma * 0.75;
  double value_loss = 0.0;
  for (const auto& q : m.q_ensemble) {
    const double qv = oracle::EvalStack(q, za)[0];
    value_loss += (qv - td) * (qv - td);
  }
  value_loss /= 2.0;
  const double total = 20.0 * consistency + 0.1 * reward_loss + 0.1 * value_loss;

  Rng urng(21);
  const LossReport report = trainer.ModelUpdate(batch, urng);
  CHECK(report.consistency == doctest::Approx(consistency).epsilon(1e-12));
  CHECK(report.reward == doctest::Approx(reward_loss).epsilon(1e-12));
  CHECK(report.value == doctest::Approx(value_loss).epsilon(1e-12));
  CHECK(report.total == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("model_update applies the target EMA") {
  WorldModel m = SmallModel(81);
  TrainHyper hyper;
  hyper.horizon = 1;
  Trainer trainer(m, hyper);

  const Eigen::MatrixXd old_target = m.q_targets[0].layers[0].weight;

  SequenceBatch batch;
  Rng rng(22);
  batch.obs = {rng.NormalMatrix(3, 8), rng.NormalMatrix(3, 8)};
  batch.actions = {rng.NormalMatrix(1, 8)};
  batch.rewards = {Eigen::RowVectorXd::Ones(8)};
  Rng urng(23);
  REQUIRE(trainer.ModelUpdate(batch, urng).finite);

  const Eigen::MatrixXd want = 0.99 * old_target + 0.01 * m.q_ensemble[0].layers[0].weight;
  CHECK((m.q_targets[0].layers[0].weight - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("model_update learns a constant reward") {
  // A few dozen steps of training should pull the reward prediction toward
  // the constant observed reward.
  WorldModel m = SmallModel(91);
  TrainHyper hyper;
  hyper.horizon = 2;
  hyper.lr = 1e-2;
  Trainer trainer(m, hyper);

  Rng rng(24);
  Rng urng(25);
  double first_loss = 0.0, last_loss = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    SequenceBatch batch;
    for (int t = 0; t < 3; ++t) batch.obs.push_back(rng.NormalMatrix(3, 16));
    for (int t = 0; t < 2; ++t) {
      batch.actions.push_back(rng.NormalMatrix(1, 16));
      batch.rewards.push_back(Eigen::RowVectorXd::Constant(16, -2.0));
    }
    const LossReport report = trainer.ModelUpdate(batch, urng);
    REQUIRE(report.finite);
    if (iter == 0) first_loss = report.reward;
    last_loss = report.reward;
  }
  CHECK(last_loss < 0.2 * first_loss);
}

TEST_CASE("policy_update with constant Q and no entropy leaves the policy fixed") {
  WorldModel m = SmallModel();
  for (auto& q : m.q_ensemble) ZeroStack(q);  // constant-zero landscape
  TrainHyper hyper;
  hyper.entropy_coef = 0.0;
  Trainer trainer(m, hyper);
  Eigen::VectorXd before(ParamCount(m.policy));
  CopyParamsTo(m.policy, before);

  Rng rng(26);
  const Eigen::MatrixXd latents = EncodeBatch(m, rng.NormalMatrix(3, 16));
  Rng urng(27);
  const PolicyLossReport report = trainer.PolicyUpdate(latents, urng);
  REQUIRE(report.finite);
  Eigen::VectorXd after(ParamCount(m.policy));
  CopyParamsTo(m.policy, after);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("policy_update degenerate percentile span keeps the objective unnormalized") {
  WorldModel m = SmallModel();
  for (auto& q : m.q_ensemble) ZeroStack(q);
  TrainHyper hyper;
  Trainer trainer(m, hyper);
  Rng rng(28);
  const Eigen::MatrixXd latents = EncodeBatch(m, rng.NormalMatrix(3, 8));
  Rng urng(29);
  const PolicyLossReport report = trainer.PolicyUpdate(latents, urng);
  CHECK(report.scale == 1.0);
  CHECK(report.q_term == 0.0);
  CHECK(report.objective == doctest::Approx(hyper.entropy_coef * report.entropy).epsilon(1e-12));
}

TEST_CASE("policy_update climbs toward a synthetic landscape's argmax") {
  // Unimodal Q(a) = tanh(s(a-c+d)) - tanh(s(a-c-d)) peaks at a = c; the
  // policy mean should move toward it.
  WorldModel m = SmallModel();
  const double peak = 0.5;
  for (auto& q : m.q_ensemble) {
    q.layers.clear();
    DenseLayer l1;
    l1.weight = Eigen::MatrixXd::Zero(2, 17);
    l1.weight(0, 16) = 3.0;
    l1.weight(1, 16) = 3.0;
    l1.bias = Eigen::VectorXd(2);
    l1.bias << -3.0 * (peak - 0.4), -3.0 * (peak + 0.4);
    l1.post = PostOp::kTanh;
    DenseLayer l2;
    l2.weight = Eigen::MatrixXd(1, 2);
    l2.weight << 1.0, -1.0;
    l2.bias = Eigen::VectorXd::Zero(1);
    l2.post = PostOp::kLinear;
    q.layers = {l1, l2};
  }
  // Start the policy mean well below the peak, with a tight std.
  ZeroStack(m.policy);
  m.policy.layers.back().bias[0] = std::atanh(-0.5);
  m.policy.layers.back().bias[1] = -3.0;

  TrainHyper hyper;
  hyper.entropy_coef = 0.0;
  hyper.lr = 3e-3;
  Trainer trainer(m, hyper);
  Rng rng(30);
  const Eigen::MatrixXd latents = EncodeBatch(m, rng.NormalMatrix(3, 64));

  const double before = std::tanh(oracle::EvalStack(m.policy, Eigen::VectorXd(latents.col(0)))[0]);
  Rng urng(31);
  for (int iter = 0; iter < 20; ++iter) REQUIRE(trainer.PolicyUpdate(latents, urng).finite);
  const double after = std::tanh(oracle::EvalStack(m.policy, Eigen::VectorXd(latents.col(0)))[0]);
  CHECK(std::abs(after - peak) < std::abs(before - peak));
  CHECK(after > before);  // moved toward the closed-form argmax
}

TEST_CASE("percentile interpolation") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(Percentile(v, 0.0) == 1.0);
  CHECK(Percentile(v, 100.0) == 4.0);
  CHECK(Percentile(v, 50.0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(Percentile(v, 25.0) == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("MakeWorldModel validates its config") {
  Rng rng(32);
  ModelConfig bad = SmallConfig();
  bad.latent_dim = 10;  // not divisible by group 8
  CHECK_THROWS_AS(MakeWorldModel(bad, rng), std::invalid_argument);
  ModelConfig one = SmallConfig();
  one.ensemble = 1;
  CHECK_THROWS_AS(MakeWorldModel(one, rng), std::invalid_argument);
}
