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

#include "dmpc/diffcore.hpp"

#include <cmath>
#include <stdexcept>

namespace dmpc {

namespace {

constexpr double kLayerNormEps = 1e-5;

double Softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// In-place grouped softmax over each column.
void SimNormColumns(Eigen::MatrixXd& m, int group_size) {
  const int rows = static_cast<int>(m.rows());
  if (group_size <= 0 || rows % group_size != 0)
    throw std::invalid_argument("SimNorm: length not divisible by group size");
  for (int c = 0; c < m.cols(); ++c) {
    for (int g = 0; g < rows; g += group_size) {
      auto seg = m.col(c).segment(g, group_size);
      const double mx = seg.maxCoeff();
      seg = (seg.array() - mx).exp();
      seg /= seg.sum();
    }
  }
}

// LayerNorm (population variance, no affine) followed by Mish, per column.
// Writes normalized values to `normed` and 1/sqrt(var+eps) to `inv_std`.
void LayerNormMishColumns(const Eigen::MatrixXd& lin, Eigen::MatrixXd& normed, Eigen::VectorXd& inv_std,
                          Eigen::MatrixXd& out) {
  const int rows = static_cast<int>(lin.rows());
  const int cols = static_cast<int>(lin.cols());
  normed.resize(rows, cols);
  inv_std.resize(cols);
  out.resize(rows, cols);
  for (int c = 0; c < cols; ++c) {
    const double mean = lin.col(c).mean();
    const double var = (lin.col(c).array() - mean).square().sum() / rows;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[c] = inv;
    normed.col(c) = (lin.col(c).array() - mean) * inv;
    for (int r = 0; r < rows; ++r) out(r, c) = Mish(normed(r, c));
  }
}

Eigen::MatrixXd ForwardImpl(const DenseStack& stack, const Eigen::MatrixXd& x, GradTape* tape, Rng* dropout_rng) {
  if (stack.layers.empty()) throw std::invalid_argument("forward: empty stack");
  if (x.rows() != stack.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");

  Eigen::MatrixXd cur = x;
  if (tape) {
    tape->records.clear();
    tape->records.resize(stack.layers.size());
    tape->batch = static_cast<int>(x.cols());
    tape->consumed = false;
  }
  for (size_t i = 0; i < stack.layers.size(); ++i) {
    const DenseLayer& layer = stack.layers[i];
    Eigen::MatrixXd lin = (layer.weight * cur).colwise() + layer.bias;
    Eigen::MatrixXd mask;
    if (dropout_rng && layer.dropout > 0.0) {
      const double keep = 1.0 - layer.dropout;
      mask.resize(lin.rows(), lin.cols());
      for (int c = 0; c < mask.cols(); ++c)
        for (int r = 0; r < mask.rows(); ++r)
          mask(r, c) = dropout_rng->Uniform01() < keep ? 1.0 / keep : 0.0;
      lin.array() *= mask.array();
    }
    GradTape::LayerRecord* rec = tape ? &tape->records[i] : nullptr;
    if (rec) {
      rec->input = cur;
      rec->mask = std::move(mask);
    }
    switch (layer.post) {
      case PostOp::kLinear:
        cur = std::move(lin);
        break;
      case PostOp::kTanh:
        cur = lin.array().tanh();
        if (rec) rec->post = cur;
        break;
      case PostOp::kSimNorm:
        cur = std::move(lin);
        SimNormColumns(cur, stack.simnorm_group);
        if (rec) rec->post = cur;
        break;
      case PostOp::kLayerNormMish: {
        Eigen::MatrixXd normed, out;
        Eigen::VectorXd inv_std;
        LayerNormMishColumns(lin, normed, inv_std, out);
        if (rec) {
          rec->post = std::move(normed);
          rec->inv_std = std::move(inv_std);
        }
        cur = std::move(out);
        break;
      }
    }
  }
  return cur;
}

}  // namespace

double Mish(double x) {
  const double sp = Softplus(x);
  return x * std::tanh(sp);
}

void DenseStack::Validate() const {
  if (layers.empty()) throw std::invalid_argument("DenseStack: no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.weight.rows() != l.bias.size()) throw std::invalid_argument("DenseStack: bias shape mismatch");
    if (i + 1 < layers.size() && layers[i + 1].weight.cols() != l.weight.rows())
      throw std::invalid_argument("DenseStack: layer dimensions do not chain");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw std::invalid_argument("DenseStack: non-finite parameters");
    if (l.post == PostOp::kSimNorm && l.weight.rows() % simnorm_group != 0)
      throw std::invalid_argument("DenseStack: SimNorm output not divisible by group size");
  }
}

StackGrads StackGrads::ZerosLike(const DenseStack& stack) {
  StackGrads g;
  g.dweight.reserve(stack.layers.size());
  g.dbias.reserve(stack.layers.size());
  for (const DenseLayer& l : stack.layers) {
    g.dweight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.dbias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

void StackGrads::SetZero() {
  for (auto& w : dweight) w.setZero();
  for (auto& b : dbias) b.setZero();
}

Eigen::MatrixXd Forward(const DenseStack& stack, const Eigen::MatrixXd& x, GradTape* tape) {
  return ForwardImpl(stack, x, tape, nullptr);
}

Eigen::MatrixXd ForwardTrain(const DenseStack& stack, const Eigen::MatrixXd& x, Rng& rng, GradTape& tape) {
  return ForwardImpl(stack, x, &tape, &rng);
}

Eigen::MatrixXd Backward(const DenseStack& stack, GradTape& tape, const Eigen::MatrixXd& dy,
                         StackGrads* param_grads) {
  if (tape.consumed) throw std::logic_error("Backward: tape already consumed");
  if (tape.records.size() != stack.layers.size()) throw std::invalid_argument("Backward: tape/stack mismatch");
  if (dy.rows() != stack.output_dim() || dy.cols() != tape.batch)
    throw std::invalid_argument("Backward: dy shape mismatch");
  tape.consumed = true;

  Eigen::MatrixXd g = dy;
  for (int i = static_cast<int>(stack.layers.size()) - 1; i >= 0; --i) {
    const DenseLayer& layer = stack.layers[i];
    const GradTape::LayerRecord& rec = tape.records[i];
    // Post-op backward: g becomes the gradient at the (post-dropout) linear output.
    switch (layer.post) {
      case PostOp::kLinear:
        break;
      case PostOp::kTanh:
        g.array() *= (1.0 - rec.post.array().square());
        break;
      case PostOp::kSimNorm: {
        const int group = stack.simnorm_group;
        for (int c = 0; c < g.cols(); ++c) {
          for (int r = 0; r < g.rows(); r += group) {
            auto s = rec.post.col(c).segment(r, group);
            auto gc = g.col(c).segment(r, group);
            const double dot = gc.dot(s);
            gc = s.array() * (gc.array() - dot);
          }
        }
        break;
      }
      case PostOp::kLayerNormMish: {
        const int rows = static_cast<int>(g.rows());
        for (int c = 0; c < g.cols(); ++c) {
          // Through Mish: d/dn [n*tanh(softplus(n))].
          Eigen::VectorXd gn(rows);
          for (int r = 0; r < rows; ++r) {
            const double n = rec.post(r, c);
            const double t = std::tanh(Softplus(n));
            gn[r] = g(r, c) * (t + n * Sigmoid(n) * (1.0 - t * t));
          }
          // Through LayerNorm (population stats, no affine).
          const double gmean = gn.mean();
          const double gdotn = gn.dot(rec.post.col(c)) / rows;
          g.col(c) = rec.inv_std[c] * (gn.array() - gmean - rec.post.col(c).array() * gdotn);
        }
        break;
      }
    }
    if (rec.mask.size() > 0) g.array() *= rec.mask.array();
    if (param_grads) {
      param_grads->dweight[i].noalias() += g * rec.input.transpose();
      param_grads->dbias[i] += g.rowwise().sum();
    }
    if (i > 0) g = (layer.weight.transpose() * g).eval();
  }
  return stack.layers.front().weight.transpose() * g;
}

Eigen::VectorXd DenseForward(const DenseStack& stack, const Eigen::VectorXd& x, GradTape* tape) {
  return Forward(stack, Eigen::MatrixXd(x), tape).col(0);
}

Eigen::VectorXd BackwardInput(const DenseStack& stack, GradTape& tape, const Eigen::VectorXd& dy) {
  return Backward(stack, tape, Eigen::MatrixXd(dy), nullptr).col(0);
}

StackGrads BackwardParams(const DenseStack& stack, GradTape& tape, const Eigen::VectorXd& dy) {
  StackGrads grads = StackGrads::ZerosLike(stack);
  Backward(stack, tape, Eigen::MatrixXd(dy), &grads);
  return grads;
}

Eigen::VectorXd SimNorm(const Eigen::VectorXd& x, int group_size) {
  Eigen::MatrixXd m(x);
  SimNormColumns(m, group_size);
  return m.col(0);
}

int ParamCount(const DenseStack& stack) {
  int n = 0;
  for (const DenseLayer& l : stack.layers) n += static_cast<int>(l.weight.size() + l.bias.size());
  return n;
}

void CopyParamsTo(const DenseStack& stack, Eigen::Ref<Eigen::VectorXd> out) {
  int off = 0;
  for (const DenseLayer& l : stack.layers) {
    out.segment(off, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
    off += static_cast<int>(l.weight.size());
    out.segment(off, l.bias.size()) = l.bias;
    off += static_cast<int>(l.bias.size());
  }
}

void CopyParamsFrom(DenseStack& stack, const Eigen::Ref<const Eigen::VectorXd>& in) {
  int off = 0;
  for (DenseLayer& l : stack.layers) {
    Eigen::Map<Eigen::VectorXd>(l.weight.data(), l.weight.size()) = in.segment(off, l.weight.size());
    off += static_cast<int>(l.weight.size());
    l.bias = in.segment(off, l.bias.size());
    off += static_cast<int>(l.bias.size());
  }
}

void CopyGradsTo(const StackGrads& grads, Eigen::Ref<Eigen::VectorXd> out) {
  int off = 0;
  for (size_t i = 0; i < grads.dweight.size(); ++i) {
    const auto& w = grads.dweight[i];
    out.segment(off, w.size()) = Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    off += static_cast<int>(w.size());
    out.segment(off, grads.dbias[i].size()) = grads.dbias[i];
    off += static_cast<int>(grads.dbias[i].size());
  }
}

void AdamStep(Eigen::Ref<Eigen::VectorXd> params, Eigen::VectorXd grads, AdamState& state, double lr, double eps) {
  if (lr <= 0.0) throw std::invalid_argument("AdamStep: lr must be positive");
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size())
    throw std::invalid_argument("AdamStep: shape mismatch");
  if (state.clip_norm > 0.0) {
    const double norm = grads.norm();
    if (norm > state.clip_norm) grads *= state.clip_norm / norm;
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + eps);
}

DenseLayer MakeLayer(int in, int out, PostOp post, Rng& rng, double dropout) {
  DenseLayer layer;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  layer.weight.resize(out, in);
  for (int c = 0; c < in; ++c)
    for (int r = 0; r < out; ++r) layer.weight(r, c) = rng.Uniform(-bound, bound);
  layer.bias = Eigen::VectorXd::Zero(out);
  layer.post = post;
  layer.dropout = dropout;
  return layer;
}

}  // namespace dmpc
