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

#ifndef DMPC_ENVS_HPP_
#define DMPC_ENVS_HPP_

#include <memory>
#include <string>

#include <Eigen/Dense>

#include "dmpc/rng.hpp"

namespace dmpc {

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_dim = 0;
  int episode_length = 0;  // decision steps
  int action_repeat = 1;
  std::string reward_description;
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;  // episode length limit reached
};

// Analytic toy environment. One decision step applies the action
// `action_repeat` times with summed rewards. Single-owner sequential state
// machine; clone instances for parallel use.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd Reset(Rng& rng) = 0;
  virtual StepResult Step(const Eigen::VectorXd& action) = 0;
  // Raw internal state (pendulum: [theta, theta_dot]); used by analyses that
  // need ground-truth rollouts from a fixed state.
  virtual Eigen::VectorXd State() const = 0;
  virtual void SetState(const Eigen::VectorXd& state) = 0;
  virtual std::unique_ptr<Env> Clone() const = 0;
};

// Frictionless pendulum swing-up: obs [cos th, sin th, th_dot], dense cost
// -(wrap(th)^2 + 0.1 th_dot^2 + 0.001 torque^2), semi-implicit Euler at
// dt=0.05, g=10, m=l=1, torque = 2 * action, angular velocity clamped to
// [-8, 8]. Reset hangs down (th = pi) with small uniform noise.
std::unique_ptr<Env> MakePendulum(int episode_length = 200, int action_repeat = 2);

// Cart-pole swing-up with sparse reward 1[cos th > 0.995]. obs
// [x, cos th, sin th, x_dot, th_dot]; starts hanging down. Cart position is
// clamped to +-2.4 with velocity zeroed at the walls.
std::unique_ptr<Env> MakeCartpole(int episode_length = 250, int action_repeat = 2);

std::unique_ptr<Env> MakeEnv(const std::string& name, int episode_length, int action_repeat);
std::unique_ptr<Env> MakeEnv(const std::string& name);  // per-env defaults

// Angle wrapped to [-pi, pi].
double WrapAngle(double theta);

// Reverse-mode gradient of the undiscounted return of an open-loop action
// sequence (rows = decision steps) through the analytic dynamics and reward,
// starting from `state`. Clamp kinks use the interior subgradient.
Eigen::MatrixXd TrueRolloutGrad(const Env& env, const Eigen::VectorXd& state, const Eigen::MatrixXd& actions);

// Total mechanical energy of the pendulum at raw state [theta, theta_dot].
double PendulumEnergy(const Eigen::VectorXd& state);

}  // namespace dmpc

#endif  // DMPC_ENVS_HPP_
