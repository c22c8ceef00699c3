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
#include <sstream>

#include "dmpc/checkpoint.hpp"
#include "dmpc/diffcore.hpp"
#include "test_oracles.hpp"

using namespace dmpc;

namespace {

DenseStack IdentityStack(int dim) {
  DenseStack stack;
  DenseLayer layer;
  layer.weight = Eigen::MatrixXd::Identity(dim, dim);
  layer.bias = Eigen::VectorXd::Zero(dim);
  layer.post = PostOp::kLinear;
  stack.layers.push_back(layer);
  return stack;
}

}  // namespace

TEST_CASE("dense_forward identity stack") {
  const DenseStack stack = IdentityStack(2);
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  const Eigen::VectorXd y = DenseForward(stack, x);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
}

TEST_CASE("dense_forward tanh of zero") {
  DenseStack stack;
  DenseLayer layer;
  layer.weight = Eigen::MatrixXd::Zero(1, 1);
  layer.bias = Eigen::VectorXd::Zero(1);
  layer.post = PostOp::kTanh;
  stack.layers.push_back(layer);
  Eigen::VectorXd x(1);
  x << 5.0;
  CHECK(DenseForward(stack, x)[0] == 0.0);
}

TEST_CASE("dense_forward matches straight-line oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseStack stack = oracle::RandomStack(rng);
    const Eigen::VectorXd x = rng.NormalVector(stack.input_dim());
    const Eigen::VectorXd got = DenseForward(stack, x);
    const Eigen::VectorXd want = oracle::EvalStack(stack, x);
    REQUIRE(got.size() == want.size());
    for (int i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("dense_forward is deterministic") {
  Rng rng(12);
  const DenseStack stack = oracle::RandomStack(rng);
  const Eigen::VectorXd x = rng.NormalVector(stack.input_dim());
  const Eigen::VectorXd a = DenseForward(stack, x);
  const Eigen::VectorXd b = DenseForward(stack, x);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dense_forward rejects bad input") {
  const DenseStack stack = IdentityStack(2);
  Eigen::VectorXd wrong(3);
  wrong.setZero();
  CHECK_THROWS_AS(DenseForward(stack, wrong), std::invalid_argument);
  Eigen::VectorXd bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(DenseForward(stack, bad), std::invalid_argument);
}

TEST_CASE("simnorm uniform on equal logits") {
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(8);
  Eigen::VectorXd out = SimNorm(zeros, 8);
  for (int i = 0; i < 8; ++i) CHECK(out[i] == doctest::Approx(0.125).epsilon(1e-12));

  Eigen::VectorXd constant = Eigen::VectorXd::Constant(8, -3.7);
  out = SimNorm(constant, 8);
  for (int i = 0; i < 8; ++i) CHECK(out[i] == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("simnorm matches scalar softmax oracle") {
  Eigen::VectorXd x(8);
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  const Eigen::VectorXd got = SimNorm(x, 8);
  const std::vector<double> want = oracle::Softmax({1, 2, 3, 4, 5, 6, 7, 8});
  for (int i = 0; i < 8; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("simnorm group structure") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd x = 5.0 * rng.NormalVector(16);
    const Eigen::VectorXd y = SimNorm(x, 4);
    for (int g = 0; g < 16; g += 4) {
      double sum = 0.0;
      for (int i = 0; i < 4; ++i) {
        CHECK(y[g + i] > 0.0);
        sum += y[g + i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
  CHECK_THROWS_AS(SimNorm(Eigen::VectorXd::Zero(7), 4), std::invalid_argument);
}

TEST_CASE("layernorm-mish shift invariance") {
  Rng rng(6);
  DenseStack stack;
  stack.layers.push_back(MakeLayer(4, 6, PostOp::kLayerNormMish, rng));
  const Eigen::VectorXd x = rng.NormalVector(4);
  const Eigen::VectorXd base = DenseForward(stack, x);
  // Shift all pre-normalization coordinates via the bias.
  DenseStack shifted = stack;
  shifted.layers[0].bias.array() += 17.25;
  const Eigen::VectorXd moved = DenseForward(shifted, x);
  CHECK((base - moved).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("backward_input adjoint of a linear map") {
  Rng rng(7);
  DenseStack stack;
  stack.layers.push_back(MakeLayer(3, 4, PostOp::kLinear, rng));
  const Eigen::MatrixXd w = stack.layers[0].weight;
  const Eigen::VectorXd x = rng.NormalVector(3);
  for (int i = 0; i < 4; ++i) {
    GradTape tape;
    DenseForward(stack, x, &tape);
    Eigen::VectorXd dy = Eigen::VectorXd::Zero(4);
    dy[i] = 1.0;
    const Eigen::VectorXd dx = BackwardInput(stack, tape, dy);
    for (int j = 0; j < 3; ++j) CHECK(dx[j] == w(i, j));
  }
}

TEST_CASE("backward_input zero for constant stack") {
  DenseStack stack;
  DenseLayer layer;
  layer.weight = Eigen::MatrixXd::Zero(2, 3);
  layer.bias = Eigen::VectorXd::Ones(2);
  layer.post = PostOp::kLinear;
  stack.layers.push_back(layer);
  GradTape tape;
  DenseForward(stack, Eigen::VectorXd::Ones(3), &tape);
  const Eigen::VectorXd dx = BackwardInput(stack, tape, Eigen::VectorXd::Ones(2));
  CHECK(dx.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tape consumed exactly once") {
  Rng rng(8);
  const DenseStack stack = oracle::RandomStack(rng);
  GradTape tape;
  DenseForward(stack, rng.NormalVector(stack.input_dim()), &tape);
  const Eigen::VectorXd dy = rng.NormalVector(stack.output_dim());
  BackwardInput(stack, tape, dy);
  CHECK_THROWS_AS(BackwardInput(stack, tape, dy), std::logic_error);
}

TEST_CASE("gradient soundness against central finite differences") {
  // 100 random stacks covering every post-op kind, dims <= 16, depth <= 3.
  Rng rng(1234);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const DenseStack stack = oracle::RandomStack(rng);
    const Eigen::VectorXd x = rng.NormalVector(stack.input_dim());
    const Eigen::VectorXd dy = rng.NormalVector(stack.output_dim());

    GradTape tape;
    DenseForward(stack, x, &tape);
    StackGrads grads = StackGrads::ZerosLike(stack);
    const Eigen::VectorXd dx = Backward(stack, tape, Eigen::MatrixXd(dy), &grads).col(0);

    const Eigen::VectorXd fd_dx = oracle::FdInputGrad(stack, x, dy);
    for (int i = 0; i < dx.size(); ++i) worst = std::max(worst, oracle::RelErr(dx[i], fd_dx[i]));

    const StackGrads fd = oracle::FdParamGrads(stack, x, dy);
    for (size_t l = 0; l < grads.dweight.size(); ++l) {
      for (int r = 0; r < grads.dweight[l].rows(); ++r) {
        for (int c = 0; c < grads.dweight[l].cols(); ++c)
          worst = std::max(worst, oracle::RelErr(grads.dweight[l](r, c), fd.dweight[l](r, c)));
        worst = std::max(worst, oracle::RelErr(grads.dbias[l][r], fd.dbias[l][r]));
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward_params bias gradient of a linear layer") {
  Rng rng(9);
  DenseStack stack;
  stack.layers.push_back(MakeLayer(3, 4, PostOp::kLinear, rng));
  const Eigen::VectorXd dy = rng.NormalVector(4);
  GradTape tape;
  DenseForward(stack, rng.NormalVector(3), &tape);
  const StackGrads grads = BackwardParams(stack, tape, dy);
  for (int i = 0; i < 4; ++i) CHECK(grads.dbias[0][i] == dy[i]);

  GradTape tape2;
  DenseForward(stack, rng.NormalVector(3), &tape2);
  const StackGrads zero = BackwardParams(stack, tape2, Eigen::VectorXd::Zero(4));
  CHECK(zero.dweight[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.dbias[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batched forward/backward agree with per-column calls") {
  Rng rng(10);
  const DenseStack stack = oracle::RandomStack(rng);
  const int batch = 7;
  const Eigen::MatrixXd x = rng.NormalMatrix(stack.input_dim(), batch);
  const Eigen::MatrixXd dy = rng.NormalMatrix(stack.output_dim(), batch);

  GradTape tape;
  const Eigen::MatrixXd y = Forward(stack, x, &tape);
  StackGrads grads = StackGrads::ZerosLike(stack);
  const Eigen::MatrixXd dx = Backward(stack, tape, dy, &grads);

  StackGrads sum = StackGrads::ZerosLike(stack);
  for (int c = 0; c < batch; ++c) {
    GradTape t;
    const Eigen::VectorXd yc = DenseForward(stack, x.col(c), &t);
    CHECK((yc - y.col(c)).cwiseAbs().maxCoeff() < 1e-12);
    StackGrads g = StackGrads::ZerosLike(stack);
    const Eigen::VectorXd dxc = Backward(stack, t, Eigen::MatrixXd(dy.col(c)), &g).col(0);
    CHECK((dxc - dx.col(c)).cwiseAbs().maxCoeff() < 1e-12);
    for (size_t l = 0; l < sum.dweight.size(); ++l) {
      sum.dweight[l] += g.dweight[l];
      sum.dbias[l] += g.dbias[l];
    }
  }
  for (size_t l = 0; l < sum.dweight.size(); ++l) {
    CHECK((sum.dweight[l] - grads.dweight[l]).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((sum.dbias[l] - grads.dbias[l]).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("dropout mask recorded and honored in backward") {
  Rng rng(13);
  DenseStack stack;
  stack.layers.push_back(MakeLayer(4, 8, PostOp::kTanh, rng, /*dropout=*/0.5));
  const Eigen::VectorXd x = rng.NormalVector(4);

  Rng fwd_rng(77);
  GradTape tape;
  const Eigen::MatrixXd y = ForwardTrain(stack, x, fwd_rng, tape);
  const Eigen::MatrixXd mask = tape.records[0].mask;
  REQUIRE(mask.size() == 8);

  // Bake the recorded mask into an equivalent dropout-free layer.
  DenseStack baked = stack;
  baked.layers[0].dropout = 0.0;
  for (int r = 0; r < 8; ++r) {
    baked.layers[0].weight.row(r) *= mask(r, 0);
    baked.layers[0].bias[r] *= mask(r, 0);
  }
  const Eigen::VectorXd want = oracle::EvalStack(baked, x);
  for (int i = 0; i < 8; ++i) CHECK(y(i, 0) == doctest::Approx(want[i]).epsilon(1e-12));

  const Eigen::VectorXd dy = rng.NormalVector(8);
  const Eigen::VectorXd dx = Backward(stack, tape, Eigen::MatrixXd(dy)).col(0);
  const Eigen::VectorXd fd = oracle::FdInputGrad(baked, x, dy);
  for (int i = 0; i < 4; ++i) CHECK(oracle::RelErr(dx[i], fd[i]) < 1e-4);

  // Plan/eval-mode forward ignores dropout entirely.
  GradTape eval_tape;
  Forward(stack, x, &eval_tape);
  CHECK(eval_tape.records[0].mask.size() == 0);
}

TEST_CASE("adam zero gradient leaves params unchanged") {
  AdamState state = AdamState::Zeros(3);
  Eigen::VectorXd params(3);
  params << 1.0, -2.0, 3.0;
  const Eigen::VectorXd before = params;
  AdamStep(params, Eigen::VectorXd::Zero(3), state, 1e-3);
  CHECK((params - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam first step moves against the gradient sign") {
  // Single-variable hand trace: m = (1-b1) g, v = (1-b2) g^2; bias-corrected
  // update is -lr * g / (|g| + eps) ~= -lr * sign(g).
  AdamState state = AdamState::Zeros(2);
  state.clip_norm = 0.0;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd grads(2);
  grads << 0.7, -1.3;
  const double lr = 0.01;
  AdamStep(params, grads, state, lr, 1e-8);
  for (int i = 0; i < 2; ++i) {
    const double expected = -lr * grads[i] / (std::abs(grads[i]) + 1e-8);
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(params[i] * grads[i] < 0.0);
  }
}

TEST_CASE("adam global-norm clipping halves an oversized gradient") {
  AdamState state = AdamState::Zeros(2);
  state.clip_norm = 20.0;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd grads(2);
  grads << 40.0, 0.0;  // norm 40 -> scaled to 20
  AdamStep(params, grads, state, 1.0, 1e-8);
  // First moment holds the clipped gradient: (1 - beta1) * 20.
  CHECK(state.m[0] == doctest::Approx(0.1 * 20.0).epsilon(1e-12));
  CHECK(state.m[1] == 0.0);
}

TEST_CASE("adam rejects shape mismatch") {
  AdamState state = AdamState::Zeros(3);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(AdamStep(params, Eigen::VectorXd::Zero(2), state, 1e-3), std::invalid_argument);
}

TEST_CASE("checkpoint stack round-trip is bit-exact") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseStack stack = oracle::RandomStack(rng);
    std::stringstream buf;
    {
      ByteWriter w(buf);
      WriteHeader(w);
      WriteStack(w, stack);
    }
    ByteReader r(buf);
    ReadHeader(r);
    const DenseStack loaded = ReadStack(r, stack.simnorm_group);
    REQUIRE(loaded.layers.size() == stack.layers.size());
    for (size_t l = 0; l < stack.layers.size(); ++l) {
      CHECK(loaded.layers[l].post == stack.layers[l].post);
      CHECK(loaded.layers[l].weight == stack.layers[l].weight);
      CHECK(loaded.layers[l].bias == stack.layers[l].bias);
    }
  }
}

TEST_CASE("checkpoint rejects bad magic") {
  std::stringstream buf;
  buf << "NOPExxxx";
  ByteReader r(buf);
  CHECK_THROWS_AS(ReadHeader(r), std::runtime_error);
}

TEST_CASE("stack validation catches broken chains") {
  Rng rng(22);
  DenseStack stack;
  stack.layers.push_back(MakeLayer(3, 4, PostOp::kLinear, rng));
  stack.layers.push_back(MakeLayer(5, 2, PostOp::kLinear, rng));  // 4 != 5
  CHECK_THROWS_AS(stack.Validate(), std::invalid_argument);
}
