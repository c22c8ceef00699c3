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

#include "dmpc/envs.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dmpc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Pendulum constants (frictionless rod, pivot at one end).
constexpr double kPendulumDt = 0.05;
constexpr double kPendulumG = 10.0;
constexpr double kPendulumTorqueScale = 2.0;
constexpr double kPendulumMaxSpeed = 8.0;

// Cartpole constants.
constexpr double kCartDt = 0.02;
constexpr double kCartG = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kPoleHalfLength = 0.5;
constexpr double kCartForceScale = 10.0;
constexpr double kCartPosLimit = 2.4;
constexpr double kCartMaxSpeed = 10.0;
constexpr double kCartUprightCos = 0.995;

double ClipAction(double a) { return std::min(1.0, std::max(-1.0, a)); }

class PendulumEnv final : public Env {
 public:
  PendulumEnv(int episode_length, int action_repeat) {
    spec_.name = "pendulum";
    spec_.obs_dim = 3;
    spec_.action_dim = 1;
    spec_.episode_length = episode_length;
    spec_.action_repeat = action_repeat;
    spec_.reward_description = "-(wrap(theta)^2 + 0.1*theta_dot^2 + 0.001*torque^2)";
  }

  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd Reset(Rng& rng) override {
    theta_ = WrapAngle(kPi + rng.Uniform(-0.1, 0.1));
    omega_ = rng.Uniform(-0.1, 0.1);
    step_ = 0;
    return Observation();
  }

  StepResult Step(const Eigen::VectorXd& action) override {
    if (action.size() != 1 || !action.allFinite()) throw std::invalid_argument("pendulum: invalid action");
    const double torque = kPendulumTorqueScale * ClipAction(action[0]);
    double reward = 0.0;
    for (int rep = 0; rep < spec_.action_repeat; ++rep) {
      reward += -(WrapAngle(theta_) * WrapAngle(theta_) + 0.1 * omega_ * omega_ + 0.001 * torque * torque);
      const double accel = 1.5 * kPendulumG * std::sin(theta_) + 3.0 * torque;
      omega_ = std::min(kPendulumMaxSpeed, std::max(-kPendulumMaxSpeed, omega_ + accel * kPendulumDt));
      theta_ += omega_ * kPendulumDt;
    }
    step_ += 1;
    return {Observation(), reward, step_ >= spec_.episode_length};
  }

  Eigen::VectorXd State() const override {
    Eigen::VectorXd s(2);
    s << theta_, omega_;
    return s;
  }

  void SetState(const Eigen::VectorXd& state) override {
    theta_ = state[0];
    omega_ = state[1];
  }

  std::unique_ptr<Env> Clone() const override { return std::make_unique<PendulumEnv>(*this); }

 private:
  Eigen::VectorXd Observation() const {
    Eigen::VectorXd obs(3);
    obs << std::cos(theta_), std::sin(theta_), omega_;
    return obs;
  }

  EnvSpec spec_;
  double theta_ = kPi;
  double omega_ = 0.0;
  int step_ = 0;
};

class CartpoleEnv final : public Env {
 public:
  CartpoleEnv(int episode_length, int action_repeat) {
    spec_.name = "cartpole";
    spec_.obs_dim = 5;
    spec_.action_dim = 1;
    spec_.episode_length = episode_length;
    spec_.action_repeat = action_repeat;
    spec_.reward_description = "1 if cos(theta) > 0.995 else 0";
  }

  const EnvSpec& spec() const override { return spec_; }

  Eigen::VectorXd Reset(Rng& rng) override {
    x_ = rng.Uniform(-0.05, 0.05);
    theta_ = WrapAngle(kPi + rng.Uniform(-0.1, 0.1));
    xdot_ = rng.Uniform(-0.05, 0.05);
    omega_ = rng.Uniform(-0.05, 0.05);
    step_ = 0;
    return Observation();
  }

  StepResult Step(const Eigen::VectorXd& action) override {
    if (action.size() != 1 || !action.allFinite()) throw std::invalid_argument("cartpole: invalid action");
    const double force = kCartForceScale * ClipAction(action[0]);
    double reward = 0.0;
    for (int rep = 0; rep < spec_.action_repeat; ++rep) {
      reward += std::cos(theta_) > kCartUprightCos ? 1.0 : 0.0;
      const double sin_th = std::sin(theta_);
      const double cos_th = std::cos(theta_);
      const double total_mass = kCartMass + kPoleMass;
      const double temp = (force + kPoleMass * kPoleHalfLength * omega_ * omega_ * sin_th) / total_mass;
      const double theta_acc = (kCartG * sin_th - cos_th * temp) /
                               (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * cos_th * cos_th / total_mass));
      const double x_acc = temp - kPoleMass * kPoleHalfLength * theta_acc * cos_th / total_mass;
      xdot_ = std::min(kCartMaxSpeed, std::max(-kCartMaxSpeed, xdot_ + x_acc * kCartDt));
      omega_ = std::min(kCartMaxSpeed, std::max(-kCartMaxSpeed, omega_ + theta_acc * kCartDt));
      x_ += xdot_ * kCartDt;
      if (x_ > kCartPosLimit) {
        x_ = kCartPosLimit;
        xdot_ = 0.0;
      } else if (x_ < -kCartPosLimit) {
        x_ = -kCartPosLimit;
        xdot_ = 0.0;
      }
      theta_ += omega_ * kCartDt;
    }
    step_ += 1;
    return {Observation(), reward, step_ >= spec_.episode_length};
  }

  Eigen::VectorXd State() const override {
    Eigen::VectorXd s(4);
    s << x_, theta_, xdot_, omega_;
    return s;
  }

  void SetState(const Eigen::VectorXd& state) override {
    x_ = state[0];
    theta_ = state[1];
    xdot_ = state[2];
    omega_ = state[3];
  }

  std::unique_ptr<Env> Clone() const override { return std::make_unique<CartpoleEnv>(*this); }

 private:
  Eigen::VectorXd Observation() const {
    Eigen::VectorXd obs(5);
    obs << x_, std::cos(theta_), std::sin(theta_), xdot_, omega_;
    return obs;
  }

  EnvSpec spec_;
  double x_ = 0.0;
  double theta_ = kPi;
  double xdot_ = 0.0;
  double omega_ = 0.0;
  int step_ = 0;
};

// Reverse-mode through the pendulum update chain. Substep forward:
//   r  = -(wrap(th)^2 + 0.1 w^2 + 0.001 tau^2)
//   w' = clamp(w + (15 sin th + 3 tau) dt)
//   th'= th + w' dt
Eigen::MatrixXd PendulumRolloutGrad(const Eigen::VectorXd& state, const Eigen::MatrixXd& actions,
                                    int action_repeat) {
  const int horizon = static_cast<int>(actions.rows());
  struct Sub {
    double theta, omega, torque;
    bool clamped;
    int decision_step;
  };
  std::vector<Sub> subs;
  subs.reserve(static_cast<size_t>(horizon) * action_repeat);
  double theta = state[0], omega = state[1];
  for (int t = 0; t < horizon; ++t) {
    const double torque = kPendulumTorqueScale * ClipAction(actions(t, 0));
    for (int rep = 0; rep < action_repeat; ++rep) {
      const double pre = omega + (1.5 * kPendulumG * std::sin(theta) + 3.0 * torque) * kPendulumDt;
      subs.push_back({theta, omega, torque, std::abs(pre) > kPendulumMaxSpeed, t});
      omega = std::min(kPendulumMaxSpeed, std::max(-kPendulumMaxSpeed, pre));
      theta += omega * kPendulumDt;
    }
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(horizon, 1);
  double g_theta = 0.0, g_omega = 0.0;
  for (int i = static_cast<int>(subs.size()) - 1; i >= 0; --i) {
    const Sub& s = subs[i];
    // th' = th + w' dt feeds both downstream adjoints into w'.
    const double g_omega_next = g_omega + g_theta * kPendulumDt;
    const double g_pre = s.clamped ? 0.0 : g_omega_next;
    double g_tau = -0.002 * s.torque + g_pre * 3.0 * kPendulumDt;
    g_omega = -0.2 * s.omega + g_pre;
    g_theta = -2.0 * WrapAngle(s.theta) + g_pre * 1.5 * kPendulumG * std::cos(s.theta) * kPendulumDt + g_theta;
    if (std::abs(actions(s.decision_step, 0)) <= 1.0) grad(s.decision_step, 0) += g_tau * kPendulumTorqueScale;
  }
  return grad;
}

}  // namespace

double WrapAngle(double theta) {
  double wrapped = std::fmod(theta + kPi, 2.0 * kPi);
  if (wrapped < 0.0) wrapped += 2.0 * kPi;
  return wrapped - kPi;
}

std::unique_ptr<Env> MakePendulum(int episode_length, int action_repeat) {
  return std::make_unique<PendulumEnv>(episode_length, action_repeat);
}

std::unique_ptr<Env> MakeCartpole(int episode_length, int action_repeat) {
  return std::make_unique<CartpoleEnv>(episode_length, action_repeat);
}

std::unique_ptr<Env> MakeEnv(const std::string& name, int episode_length, int action_repeat) {
  if (name == "pendulum") return MakePendulum(episode_length, action_repeat);
  if (name == "cartpole") return MakeCartpole(episode_length, action_repeat);
  throw std::invalid_argument("unknown environment: " + name);
}

std::unique_ptr<Env> MakeEnv(const std::string& name) {
  if (name == "pendulum") return MakePendulum();
  if (name == "cartpole") return MakeCartpole();
  throw std::invalid_argument("unknown environment: " + name);
}

Eigen::MatrixXd TrueRolloutGrad(const Env& env, const Eigen::VectorXd& state, const Eigen::MatrixXd& actions) {
  if (actions.rows() < 1) throw std::invalid_argument("TrueRolloutGrad: empty action sequence");
  if (actions.cols() != env.spec().action_dim) throw std::invalid_argument("TrueRolloutGrad: action dim mismatch");
  if (env.spec().name == "pendulum") return PendulumRolloutGrad(state, actions, env.spec().action_repeat);
  if (env.spec().name == "cartpole") {
    // The sparse indicator reward is piecewise constant, so the return has
    // zero gradient at every interior point.
    return Eigen::MatrixXd::Zero(actions.rows(), actions.cols());
  }
  throw std::invalid_argument("TrueRolloutGrad: unsupported environment");
}

double PendulumEnergy(const Eigen::VectorXd& state) {
  // Rod pivoting at one end: I = m l^2 / 3, center of mass at l/2.
  const double kinetic = 0.5 * (1.0 / 3.0) * state[1] * state[1];
  const double potential = kPendulumG * 0.5 * std::cos(state[0]);
  return kinetic + potential;
}

}  // namespace dmpc
