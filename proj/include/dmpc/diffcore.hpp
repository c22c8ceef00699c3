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

#ifndef DMPC_DIFFCORE_HPP_
#define DMPC_DIFFCORE_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/rng.hpp"

namespace dmpc {

// Post-linear operation of a dense layer. Tag values are part of the
// checkpoint format and must not be reordered.
enum class PostOp : uint8_t {
  kLayerNormMish = 0,
  kSimNorm = 1,
  kLinear = 2,
  kTanh = 3,
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  PostOp post = PostOp::kLinear;
  // Dropout rate on the linear output; only applied by training-mode
  // forwards, never at plan/eval time.
  double dropout = 0.0;
};

// A stack of dense layers. All evaluation is double precision; columns of a
// batched input are independent samples.
struct DenseStack {
  std::vector<DenseLayer> layers;
  // Group size for SimNorm post-ops in this stack.
  int simnorm_group = 8;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

  // Throws std::invalid_argument if layer dimensions do not chain or any
  // parameter entry is non-finite.
  void Validate() const;
};

// Recorded primal values sufficient to replay one backward pass. A tape may
// be consumed by exactly one backward call.
struct GradTape {
  struct LayerRecord {
    Eigen::MatrixXd input;    // layer input (in x B)
    Eigen::MatrixXd post;     // post-op-specific: tanh/simnorm outputs, layernorm normalized values
    Eigen::VectorXd inv_std;  // per-column 1/sqrt(var+eps) for LayerNormMish
    Eigen::MatrixXd mask;     // dropout mask (empty when inactive)
  };
  std::vector<LayerRecord> records;
  int batch = 0;
  bool consumed = false;
};

// Gradients with the same shapes as the stack parameters.
struct StackGrads {
  std::vector<Eigen::MatrixXd> dweight;
  std::vector<Eigen::VectorXd> dbias;

  static StackGrads ZerosLike(const DenseStack& stack);
  void SetZero();
};

// Batched forward evaluation; columns of x are independent samples. When
// `tape` is non-null the primal values needed for one backward pass are
// recorded. Dropout is inactive on this path.
Eigen::MatrixXd Forward(const DenseStack& stack, const Eigen::MatrixXd& x, GradTape* tape = nullptr);

// Training-mode forward: applies dropout where a layer declares it, drawing
// masks from `rng` and recording them on the tape.
Eigen::MatrixXd ForwardTrain(const DenseStack& stack, const Eigen::MatrixXd& x, Rng& rng, GradTape& tape);

// Replays the backward pass for one taped forward. Returns the gradient
// with respect to the input (in x B); when `param_grads` is non-null the
// parameter gradients are accumulated into it (summed over batch columns).
// Consumes the tape; a second call throws std::logic_error.
Eigen::MatrixXd Backward(const DenseStack& stack, GradTape& tape, const Eigen::MatrixXd& dy,
                         StackGrads* param_grads = nullptr);

// Single-vector convenience wrappers.
Eigen::VectorXd DenseForward(const DenseStack& stack, const Eigen::VectorXd& x, GradTape* tape = nullptr);
Eigen::VectorXd BackwardInput(const DenseStack& stack, GradTape& tape, const Eigen::VectorXd& dy);
StackGrads BackwardParams(const DenseStack& stack, GradTape& tape, const Eigen::VectorXd& dy);

// Grouped softmax: partitions x into contiguous groups of `group_size` and
// applies a softmax within each group. Throws on indivisible length.
Eigen::VectorXd SimNorm(const Eigen::VectorXd& x, int group_size);

// Numerically stable x * tanh(softplus(x)).
double Mish(double x);

// --- Parameter flattening -------------------------------------------------

int ParamCount(const DenseStack& stack);
void CopyParamsTo(const DenseStack& stack, Eigen::Ref<Eigen::VectorXd> out);
void CopyParamsFrom(DenseStack& stack, const Eigen::Ref<const Eigen::VectorXd>& in);
void CopyGradsTo(const StackGrads& grads, Eigen::Ref<Eigen::VectorXd> out);

// --- Optimizer --------------------------------------------------------------

// Adaptive-moment state over one flat parameter group.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  // Global-norm gradient clip applied before the moment update; <= 0 disables.
  double clip_norm = 20.0;

  static AdamState Zeros(int n) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(n);
    s.v = Eigen::VectorXd::Zero(n);
    return s;
  }
};

// One adaptive-moment update with bias correction. `grads` is taken by value
// because clipping rescales it. Throws on shape mismatch or lr <= 0.
void AdamStep(Eigen::Ref<Eigen::VectorXd> params, Eigen::VectorXd grads, AdamState& state, double lr,
              double eps = 1e-8);

// --- Stack initialization ---------------------------------------------------

// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero biases.
DenseLayer MakeLayer(int in, int out, PostOp post, Rng& rng, double dropout = 0.0);

}  // namespace dmpc

#endif  // DMPC_DIFFCORE_HPP_
