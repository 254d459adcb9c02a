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

#include "viplab/gradcore.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace viplab::grad {

namespace {

std::size_t product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << shape_string(a.shape) << " vs "
     << shape_string(b.shape);
  throw std::invalid_argument(os.str());
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr || a.id < 0) {
    throw std::invalid_argument("unbound Var");
  }
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&t != &tape_of(b)) {
    throw std::invalid_argument("Vars belong to different tapes");
  }
  return t;
}

Var unary(Op op, Var x, Tensor value, double scalar = 0.0) {
  Tape& t = tape_of(x);
  Tape::Node n;
  n.value = std::move(value);
  n.op = op;
  n.parents = {x.id};
  n.requires_grad = t.requires_grad(x);
  n.scalar = scalar;
  return t.push(std::move(n));
}

Var binary(Op op, Var a, Var b, Tensor value) {
  Tape& t = tape_of(a, b);
  Tape::Node n;
  n.value = std::move(value);
  n.op = op;
  n.parents = {a.id, b.id};
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(n));
}

template <typename F>
Var elementwise(Op op, Var x, F f, double scalar = 0.0) {
  const Tensor& in = x.value();
  Tensor out{in.shape, std::vector<double>(in.size())};
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = f(in.data[i]);
  return unary(op, x, std::move(out), scalar);
}

template <typename F>
Var zip(Op op, Var a, Var b, const char* name, F f) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.shape != tb.shape) shape_error(name, ta, tb);
  Tensor out{ta.shape, std::vector<double>(ta.size())};
  for (std::size_t i = 0; i < ta.size(); ++i) {
    out.data[i] = f(ta.data[i], tb.data[i]);
  }
  return binary(op, a, b, std::move(out));
}

double max_of(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (product(shape) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape) +
                                " does not match " +
                                std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatVec: return "matvec";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kNeg: return "neg";
    case Op::kRelu: return "relu";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kAbs: return "abs";
    case Op::kSquare: return "square";
    case Op::kScale: return "scale";
    case Op::kL2Norm: return "l2norm";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kStack: return "stack";
    case Op::kLogMeanExp: return "log_mean_exp";
  }
  return "?";
}

const Tensor& Var::value() const { return tape->value(*this); }
double Var::item() const {
  const Tensor& t = value();
  if (!t.is_scalar()) {
    throw std::invalid_argument("item() on non-scalar " +
                                shape_string(t.shape));
  }
  return t.data[0];
}
const std::vector<std::size_t>& Var::shape() const { return value().shape; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::constant(std::span<const double> values) {
  return leaf(Tensor::vector({values.begin(), values.end()}), false);
}

const std::vector<double>& Tape::grad(Var v) const {
  static const std::vector<double> kEmpty;
  const Node& n = nodes_.at(v.id);
  return n.grad.empty() ? kEmpty : n.grad;
}

void Tape::backward(Var root) {
  const Node& r = nodes_.at(root.id);
  if (!r.value.is_scalar()) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                shape_string(r.value.shape));
  }
  backward_seeded(root, std::vector<double>{1.0});
}

void Tape::backward_seeded(Var root, std::span<const double> seed) {
  Node& r = nodes_.at(root.id);
  if (seed.size() != r.value.size()) {
    throw std::invalid_argument("backward: seed size mismatch");
  }
  for (Node& n : nodes_) n.grad.clear();
  r.grad.assign(seed.begin(), seed.end());
  sweep(root.id);
}

void Tape::sweep(std::int32_t root) {
  last_visits_ = 0;
  for (std::int32_t id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    ++last_visits_;
    backprop_node(id);
  }
}

void Tape::backprop_node(std::int32_t id) {
  Node& n = nodes_[id];
  const std::vector<double>& g = n.grad;
  auto parent_grad = [this](std::int32_t pid) -> std::vector<double>* {
    Node& p = nodes_[pid];
    if (!p.requires_grad) return nullptr;
    if (p.grad.empty()) p.grad.assign(p.value.size(), 0.0);
    return &p.grad;
  };
  switch (n.op) {
    case Op::kLeaf:
      return;
    case Op::kMatVec: {
      const Tensor& w = nodes_[n.parents[0]].value;
      const Tensor& x = nodes_[n.parents[1]].value;
      const std::size_t rows = w.shape[0], cols = w.shape[1];
      if (auto* gw = parent_grad(n.parents[0])) {
        std::vector<std::size_t> nz;
        for (std::size_t j = 0; j < cols; ++j) {
          if (x.data[j] != 0.0) nz.push_back(j);
        }
        for (std::size_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          double* row = &(*gw)[i * cols];
          if (nz.size() == cols) {
            for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x.data[j];
          } else {
            for (std::size_t j : nz) row[j] += gi * x.data[j];
          }
        }
      }
      if (auto* gx = parent_grad(n.parents[1])) {
        for (std::size_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          const double* row = &w.data[i * cols];
          for (std::size_t j = 0; j < cols; ++j) (*gx)[j] += row[j] * gi;
        }
      }
      return;
    }
    case Op::kAdd:
    case Op::kSub: {
      const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
      if (auto* ga = parent_grad(n.parents[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      }
      if (auto* gb = parent_grad(n.parents[1])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += sign * g[i];
      }
      return;
    }
    case Op::kMul: {
      const Tensor& a = nodes_[n.parents[0]].value;
      const Tensor& b = nodes_[n.parents[1]].value;
      if (auto* ga = parent_grad(n.parents[0])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.data[i];
      }
      if (auto* gb = parent_grad(n.parents[1])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.data[i];
      }
      return;
    }
    case Op::kStack:
      for (std::size_t i = 0; i < n.parents.size(); ++i) {
        if (auto* gi = parent_grad(n.parents[i])) (*gi)[0] += g[i];
      }
      return;
    default:
      break;
  }

  // Single-parent ops.
  std::vector<double>* gp = parent_grad(n.parents[0]);
  if (gp == nullptr) return;
  const Tensor& x = nodes_[n.parents[0]].value;
  const Tensor& y = n.value;
  switch (n.op) {
    case Op::kNeg:
      for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] -= g[i];
      break;
    case Op::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x.data[i] > 0.0) (*gp)[i] += g[i];
      }
      break;
    case Op::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gp)[i] += g[i] * (1.0 - y.data[i] * y.data[i]);
      }
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i] * y.data[i];
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i] / x.data[i];
      break;
    case Op::kAbs:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0);
        (*gp)[i] += g[i] * s;
      }
      break;
    case Op::kSquare:
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*gp)[i] += 2.0 * g[i] * x.data[i];
      }
      break;
    case Op::kScale:
      for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i] * n.scalar;
      break;
    case Op::kL2Norm: {
      const double inv = g[0] / y.data[0];
      for (std::size_t i = 0; i < x.size(); ++i) (*gp)[i] += inv * x.data[i];
      break;
    }
    case Op::kSum:
      for (double& v : *gp) v += g[0];
      break;
    case Op::kMean: {
      const double share = g[0] / static_cast<double>(x.size());
      for (double& v : *gp) v += share;
      break;
    }
    case Op::kLogMeanExp: {
      // d/dx_i = softmax(x)_i
      const double m = max_of(x.data);
      double z = 0.0;
      for (double v : x.data) z += std::exp(v - m);
      for (std::size_t i = 0; i < x.size(); ++i) {
        (*gp)[i] += g[0] * std::exp(x.data[i] - m) / z;
      }
      break;
    }
    default:
      throw std::logic_error(std::string("backward: unhandled op ") +
                             op_name(n.op));
  }
}

// ---------------------------------------------------------------------------

Var matvec(Var w, Var x) {
  Tape& t = tape_of(w, x);
  const Tensor& tw = w.value();
  const Tensor& tx = x.value();
  if (tw.rank() != 2 || tx.rank() != 1 || tw.shape[1] != tx.shape[0]) {
    shape_error("matvec", tw, tx);
  }
  const std::size_t rows = tw.shape[0], cols = tw.shape[1];
  Tensor out = Tensor::zeros({rows});
  // Observation inputs (rasters, one-hots) are mostly zero.
  std::vector<std::size_t> nz;
  nz.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    if (tx.data[j] != 0.0) nz.push_back(j);
  }
  if (nz.size() * 2 < cols) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = &tw.data[i * cols];
      double acc = 0.0;
      for (std::size_t j : nz) acc += row[j] * tx.data[j];
      out.data[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = &tw.data[i * cols];
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j] * tx.data[j];
      out.data[i] = acc;
    }
  }
  Tape::Node n;
  n.value = std::move(out);
  n.op = Op::kMatVec;
  n.parents = {w.id, x.id};
  n.requires_grad = t.requires_grad(w) || t.requires_grad(x);
  return t.push(std::move(n));
}

Var add(Var a, Var b) {
  return zip(Op::kAdd, a, b, "add", [](double p, double q) { return p + q; });
}
Var sub(Var a, Var b) {
  return zip(Op::kSub, a, b, "sub", [](double p, double q) { return p - q; });
}
Var mul(Var a, Var b) {
  return zip(Op::kMul, a, b, "mul", [](double p, double q) { return p * q; });
}
Var neg(Var x) {
  return elementwise(Op::kNeg, x, [](double v) { return -v; });
}
Var relu(Var x) {
  return elementwise(Op::kRelu, x, [](double v) { return v > 0.0 ? v : 0.0; });
}
Var tanh(Var x) {
  return elementwise(Op::kTanh, x, [](double v) { return std::tanh(v); });
}
Var exp(Var x) {
  return elementwise(Op::kExp, x, [](double v) { return std::exp(v); });
}
Var log(Var x) {
  return elementwise(Op::kLog, x, [](double v) { return std::log(v); });
}
Var abs(Var x) {
  return elementwise(Op::kAbs, x, [](double v) { return std::fabs(v); });
}
Var square(Var x) {
  return elementwise(Op::kSquare, x, [](double v) { return v * v; });
}
Var scale(Var x, double c) {
  return elementwise(Op::kScale, x, [c](double v) { return v * c; }, c);
}

Var l2norm(Var x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("l2norm: eps must be > 0");
  double ss = 0.0;
  for (double v : x.value().data) ss += v * v;
  return unary(Op::kL2Norm, x, Tensor::scalar(std::sqrt(ss + eps)), eps);
}

Var sum(Var x) {
  const auto& d = x.value().data;
  return unary(Op::kSum, x, Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0)));
}

Var mean(Var x) {
  const auto& d = x.value().data;
  if (d.empty()) throw std::invalid_argument("mean: empty input");
  const double s = std::accumulate(d.begin(), d.end(), 0.0);
  return unary(Op::kMean, x, Tensor::scalar(s / static_cast<double>(d.size())));
}

Var stack(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack: empty input");
  Tape& t = tape_of(scalars.front());
  Tape::Node n;
  n.op = Op::kStack;
  n.value = Tensor::zeros({scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    tape_of(scalars.front(), scalars[i]);
    n.value.data[i] = scalars[i].item();
    n.parents.push_back(scalars[i].id);
    n.requires_grad = n.requires_grad || t.requires_grad(scalars[i]);
  }
  return t.push(std::move(n));
}

Var mean(std::span<const Var> scalars) { return mean(stack(scalars)); }

Var log_mean_exp(Var x) {
  const auto& d = x.value().data;
  if (d.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  const double m = max_of(d);
  double acc = 0.0;
  for (double v : d) acc += std::exp(v - m);
  const double value = m + std::log(acc / static_cast<double>(d.size()));
  return unary(Op::kLogMeanExp, x, Tensor::scalar(value));
}

Var log_mean_exp(std::span<const Var> scalars) {
  if (scalars.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  return log_mean_exp(stack(scalars));
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_parameters(std::span<const Parameter> params,
                                    AdamOptions options) {
  AdamState s;
  s.options = options;
  for (const Parameter& p : params) {
    s.first_moment.emplace_back(p.value.size(), 0.0);
    s.second_moment.emplace_back(p.value.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter> params,
               std::span<const std::vector<double>> grads, AdamState& state,
               double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("adam_step: learning rate must be > 0");
  }
  if (grads.size() != params.size() ||
      state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (grads[p].size() != params[p].value.size() ||
        state.first_moment[p].size() != grads[p].size()) {
      throw std::invalid_argument("adam_step: shape mismatch for " +
                                  params[p].name);
    }
    for (double g : grads[p]) {
      if (!std::isfinite(g)) {
        throw std::domain_error("adam_step: non-finite gradient in " +
                                params[p].name);
      }
    }
  }
  const AdamOptions& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    auto& w = params[p].value.data;
    const auto& g = grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      w[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.eps);
    }
  }
}

}  // namespace viplab::grad
