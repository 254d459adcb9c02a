// Copyright 2026 The viplab Authors
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

// Minimal tape-based reverse-mode automatic differentiation over dense
// 64-bit tensors, plus an Adam optimizer.
//
// A Tape records every operation in creation order, so reverse creation order
// is a valid topological order for the backward sweep. Var is a cheap handle
// (tape pointer + node index); all ops are free functions over Vars.

#ifndef VIPLAB_GRADCORE_H_
#define VIPLAB_GRADCORE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace viplab::grad {

inline constexpr double kDefaultNormEps = 1e-12;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vector(std::vector<double> values);
  static Tensor scalar(double value);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1; }
};

std::string shape_string(std::span<const std::size_t> shape);

enum class Op : std::uint8_t {
  kLeaf,
  kMatVec,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kRelu,
  kTanh,
  kExp,
  kLog,
  kAbs,
  kSquare,
  kScale,
  kL2Norm,
  kSum,
  kMean,
  kStack,
  kLogMeanExp,
};

const char* op_name(Op op);

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;

  const Tensor& value() const;
  double item() const;  // scalar value
  const std::vector<std::size_t>& shape() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Parameters are leaves with requires_grad; observations are constants.
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(std::span<const double> values);

  // Reverse sweep from a scalar root; accumulates into every node's gradient.
  // Throws std::invalid_argument for a non-scalar root.
  void backward(Var root);
  // Same sweep, seeded with an explicit gradient for a non-scalar root.
  void backward_seeded(Var root, std::span<const double> seed);

  const std::vector<double>& grad(Var v) const;
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  Op op(Var v) const { return nodes_[v.id].op; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Number of nodes the most recent backward sweep touched (each once).
  std::size_t last_backward_visits() const { return last_visits_; }

  // Internal: used by op implementations.
  struct Node {
    Tensor value;
    std::vector<double> grad;
    Op op = Op::kLeaf;
    bool requires_grad = false;
    std::vector<std::int32_t> parents;
    double scalar = 0.0;  // op parameter (scale factor, eps, ...)
  };
  Var push(Node node);
  const Node& node(std::int32_t id) const { return nodes_[id]; }

 private:
  void sweep(std::int32_t root);
  void backprop_node(std::int32_t id);

  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

// --- primitives ------------------------------------------------------------
// All throw std::invalid_argument naming both shapes on mismatch.

Var matvec(Var w, Var x);  // [m,n] x [n] -> [m]
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var neg(Var x);
Var relu(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var abs(Var x);
Var square(Var x);
Var scale(Var x, double c);
// sqrt(sum x^2 + eps); smoothed so the gradient is finite at x = 0.
Var l2norm(Var x, double eps = kDefaultNormEps);
Var sum(Var x);
Var mean(Var x);
Var mean(std::span<const Var> scalars);
Var stack(std::span<const Var> scalars);  // scalars -> vector
// m + log(mean(exp(x - m))), m = max(x).
Var log_mean_exp(Var x);
Var log_mean_exp(std::span<const Var> scalars);

// --- Adam ------------------------------------------------------------------

struct Parameter {
  std::string name;
  Tensor value;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;
  AdamOptions options;

  static AdamState for_parameters(std::span<const Parameter> params,
                                  AdamOptions options = {});
};

// One bias-corrected Adam update. Throws std::invalid_argument on misaligned
// shapes or a non-positive learning rate, std::domain_error (with the
// parameter name) on a non-finite gradient.
void adam_step(std::span<Parameter> params,
               std::span<const std::vector<double>> grads, AdamState& state,
               double learning_rate);

}  // namespace viplab::grad

#endif  // VIPLAB_GRADCORE_H_
