#include "tae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tae {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void check_shape_valid(const Shape& shape) {
  if (shape.empty()) {
    fail("tensor shape must have at least one extent");
  }
  for (std::size_t e : shape) {
    if (e == 0) {
      fail("tensor shape extents must be positive, got " + shape_str(shape));
    }
  }
}

std::string mismatch(const char* op, const Shape& a, const Shape& b,
                     const char* detail) {
  std::ostringstream out;
  out << op << ": " << detail << ": " << shape_str(a) << " vs " << shape_str(b);
  return out.str();
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) {
      out << ' ';
    }
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape_valid(shape);
  Tensor t;
  t.values.assign(shape_numel(shape), 0.0);
  t.shape = std::move(shape);
  t.requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.shape = {1};
  t.values = {value};
  return t;
}

Tensor Tensor::row_major(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  check_shape_valid(shape);
  if (values.size() != shape_numel(shape)) {
    fail("tensor value count " + std::to_string(values.size()) +
         " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.shape = std::move(shape);
  t.values = std::move(values);
  t.requires_grad = requires_grad;
  return t;
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "elementwise_multiply";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmaxLastDim: return "softmax_lastdim";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kMse: return "mse";
  }
  return "?";
}

const Shape& Var::shape() const { return graph_->node(id_).out.shape; }
const std::vector<double>& Var::value() const {
  return graph_->node(id_).out.values;
}
const std::vector<double>& Var::grad() const {
  return graph_->node(id_).out.grad;
}
bool Var::requires_grad() const { return graph_->node(id_).out.requires_grad; }

const Graph::Node& Graph::node(std::size_t id) const { return nodes_[id]; }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor tensor) {
  check_shape_valid(tensor.shape);
  if (tensor.values.size() != shape_numel(tensor.shape)) {
    fail("leaf value count does not match shape " + shape_str(tensor.shape));
  }
  Node n;
  n.op = OpKind::kLeaf;
  n.out = std::move(tensor);
  return push(std::move(n));
}

Var Graph::constant(Shape shape, std::vector<double> values) {
  return leaf(Tensor::row_major(std::move(shape), std::move(values), false));
}

Var Graph::scalar_constant(double value) { return leaf(Tensor::scalar(value)); }

namespace {

// Interprets the operands of matmul. Ranks: 2x2 -> 2, 2x1 -> 1, 1x2 -> 1.
struct MatDims {
  std::size_t m, k, n;
  Shape out_shape;
};

MatDims matmul_dims(const Shape& a, const Shape& b) {
  if (a.size() == 2 && b.size() == 2) {
    if (a[1] != b[0]) {
      fail(mismatch("matmul", a, b, "inner dimensions differ"));
    }
    return {a[0], a[1], b[1], Shape{a[0], b[1]}};
  }
  if (a.size() == 2 && b.size() == 1) {
    if (a[1] != b[0]) {
      fail(mismatch("matmul", a, b, "inner dimensions differ"));
    }
    return {a[0], a[1], 1, Shape{a[0]}};
  }
  if (a.size() == 1 && b.size() == 2) {
    if (a[0] != b[0]) {
      fail(mismatch("matmul", a, b, "inner dimensions differ"));
    }
    return {1, a[0], b[1], Shape{b[1]}};
  }
  fail(mismatch("matmul", a, b, "expects matrix/vector operands"));
}

double stable_exp_row_sum(const double* row, std::size_t n, double row_max,
                          double* out) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(row[i] - row_max);
    total += out[i];
  }
  return total;
}

}  // namespace

Var Graph::apply(OpKind op, const std::vector<Var>& inputs, OpAttrs attrs) {
  for (const Var& v : inputs) {
    if (v.graph() != this) {
      fail(std::string(op_name(op)) + ": input var belongs to another graph");
    }
  }
  auto arity = [&](std::size_t want) {
    if (inputs.size() != want) {
      fail(std::string(op_name(op)) + ": expected " + std::to_string(want) +
           " inputs, got " + std::to_string(inputs.size()));
    }
  };

  Node n;
  n.op = op;
  n.attrs = attrs;
  for (const Var& v : inputs) {
    n.inputs.push_back(v.id());
    if (v.requires_grad()) {
      n.out.requires_grad = true;
    }
  }

  switch (op) {
    case OpKind::kLeaf:
      fail("apply: leaf is not an operation");
    case OpKind::kMatmul: {
      arity(2);
      const Tensor& a = node(n.inputs[0]).out;
      const Tensor& b = node(n.inputs[1]).out;
      MatDims d = matmul_dims(a.shape, b.shape);
      n.out.shape = d.out_shape;
      n.out.values.assign(d.m * d.n, 0.0);
      for (std::size_t i = 0; i < d.m; ++i) {
        for (std::size_t p = 0; p < d.k; ++p) {
          const double av = a.values[i * d.k + p];
          for (std::size_t j = 0; j < d.n; ++j) {
            n.out.values[i * d.n + j] += av * b.values[p * d.n + j];
          }
        }
      }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kMul:
    case OpKind::kMse: {
      arity(2);
      const Tensor& a = node(n.inputs[0]).out;
      const Tensor& b = node(n.inputs[1]).out;
      if (a.shape != b.shape) {
        fail(mismatch(op_name(op), a.shape, b.shape, "shape mismatch"));
      }
      if (op == OpKind::kMse) {
        double total = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
          const double r = a.values[i] - b.values[i];
          total += r * r;
        }
        n.out.shape = {1};
        n.out.values = {total / static_cast<double>(a.values.size())};
      } else {
        n.out.shape = a.shape;
        n.out.values.resize(a.values.size());
        for (std::size_t i = 0; i < a.values.size(); ++i) {
          n.out.values[i] = op == OpKind::kAdd ? a.values[i] + b.values[i]
                                               : a.values[i] * b.values[i];
        }
      }
      break;
    }
    case OpKind::kConcat: {
      if (inputs.empty()) {
        fail("concat: expected at least one input");
      }
      std::size_t total = 0;
      for (const Var& v : inputs) {
        if (v.shape().size() != 1) {
          fail("concat: expects rank-1 inputs, got " + shape_str(v.shape()));
        }
        total += v.numel();
      }
      n.out.shape = {total};
      n.out.values.reserve(total);
      for (const Var& v : inputs) {
        const auto& src = v.value();
        n.out.values.insert(n.out.values.end(), src.begin(), src.end());
      }
      break;
    }
    case OpKind::kSlice: {
      arity(1);
      const Tensor& a = node(n.inputs[0]).out;
      if (a.shape.size() != 1) {
        fail("slice: expects a rank-1 input, got " + shape_str(a.shape));
      }
      if (attrs.begin >= attrs.end || attrs.end > a.shape[0]) {
        fail("slice: range [" + std::to_string(attrs.begin) + ", " +
             std::to_string(attrs.end) + ") out of bounds for " +
             shape_str(a.shape));
      }
      n.out.shape = {attrs.end - attrs.begin};
      n.out.values.assign(a.values.begin() + static_cast<long>(attrs.begin),
                          a.values.begin() + static_cast<long>(attrs.end));
      break;
    }
    case OpKind::kSigmoid:
    case OpKind::kTanh: {
      arity(1);
      const Tensor& a = node(n.inputs[0]).out;
      n.out.shape = a.shape;
      n.out.values.resize(a.values.size());
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        n.out.values[i] = op == OpKind::kSigmoid
                              ? 1.0 / (1.0 + std::exp(-a.values[i]))
                              : std::tanh(a.values[i]);
      }
      break;
    }
    case OpKind::kSoftmaxLastDim: {
      arity(1);
      const Tensor& a = node(n.inputs[0]).out;
      if (a.shape.size() != 1 && a.shape.size() != 2) {
        fail("softmax_lastdim: expects rank 1 or 2, got " +
             shape_str(a.shape));
      }
      const std::size_t cols = a.shape.back();
      const std::size_t rows = a.values.size() / cols;
      n.out.shape = a.shape;
      n.out.values.resize(a.values.size());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = a.values.data() + r * cols;
        double* dst = n.out.values.data() + r * cols;
        const double row_max = *std::max_element(src, src + cols);
        const double total = stable_exp_row_sum(src, cols, row_max, dst);
        for (std::size_t c = 0; c < cols; ++c) {
          dst[c] /= total;
        }
      }
      break;
    }
    case OpKind::kScale: {
      arity(1);
      const Tensor& a = node(n.inputs[0]).out;
      n.out.shape = a.shape;
      n.out.values.resize(a.values.size());
      for (std::size_t i = 0; i < a.values.size(); ++i) {
        n.out.values[i] = attrs.factor * a.values[i];
      }
      break;
    }
    case OpKind::kSum: {
      arity(1);
      const Tensor& a = node(n.inputs[0]).out;
      double total = 0.0;
      for (double v : a.values) {
        total += v;
      }
      n.out.shape = {1};
      n.out.values = {total};
      break;
    }
  }
  return push(std::move(n));
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) {
    fail("backward: loss var belongs to another graph");
  }
  if (loss.numel() != 1) {
    fail("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }

  // Per-call adjoint buffers; leaf grads persist on the nodes and accumulate
  // across calls.
  std::vector<std::vector<double>> adj(nodes_.size());
  adj[loss.id()] = {1.0};

  auto bump = [&](std::size_t id, std::size_t i, double v) {
    if (!nodes_[id].out.requires_grad) {
      return;
    }
    auto& buf = adj[id];
    if (buf.empty()) {
      buf.assign(nodes_[id].out.values.size(), 0.0);
    }
    buf[i] += v;
  };

  for (std::size_t pos = nodes_.size(); pos-- > 0;) {
    const Node& n = nodes_[pos];
    if (adj[pos].empty() || !n.out.requires_grad || n.op == OpKind::kLeaf) {
      continue;
    }
    const std::vector<double>& g = adj[pos];
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatmul: {
        const Tensor& a = nodes_[n.inputs[0]].out;
        const Tensor& b = nodes_[n.inputs[1]].out;
        MatDims d = matmul_dims(a.shape, b.shape);
        for (std::size_t i = 0; i < d.m; ++i) {
          for (std::size_t j = 0; j < d.n; ++j) {
            const double gv = g[i * d.n + j];
            if (gv == 0.0) {
              continue;
            }
            for (std::size_t p = 0; p < d.k; ++p) {
              bump(n.inputs[0], i * d.k + p, gv * b.values[p * d.n + j]);
              bump(n.inputs[1], p * d.n + j, gv * a.values[i * d.k + p]);
            }
          }
        }
        break;
      }
      case OpKind::kAdd: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          bump(n.inputs[0], i, g[i]);
          bump(n.inputs[1], i, g[i]);
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = nodes_[n.inputs[0]].out;
        const Tensor& b = nodes_[n.inputs[1]].out;
        for (std::size_t i = 0; i < g.size(); ++i) {
          bump(n.inputs[0], i, g[i] * b.values[i]);
          bump(n.inputs[1], i, g[i] * a.values[i]);
        }
        break;
      }
      case OpKind::kMse: {
        const Tensor& a = nodes_[n.inputs[0]].out;
        const Tensor& b = nodes_[n.inputs[1]].out;
        const double inv = 2.0 / static_cast<double>(a.values.size());
        for (std::size_t i = 0; i < a.values.size(); ++i) {
          const double r = inv * (a.values[i] - b.values[i]) * g[0];
          bump(n.inputs[0], i, r);
          bump(n.inputs[1], i, -r);
        }
        break;
      }
      case OpKind::kConcat: {
        std::size_t offset = 0;
        for (std::size_t in : n.inputs) {
          const std::size_t len = nodes_[in].out.values.size();
          for (std::size_t i = 0; i < len; ++i) {
            bump(in, i, g[offset + i]);
          }
          offset += len;
        }
        break;
      }
      case OpKind::kSlice: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          bump(n.inputs[0], n.attrs.begin + i, g[i]);
        }
        break;
      }
      case OpKind::kSigmoid: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double s = n.out.values[i];
          bump(n.inputs[0], i, g[i] * s * (1.0 - s));
        }
        break;
      }
      case OpKind::kTanh: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double t = n.out.values[i];
          bump(n.inputs[0], i, g[i] * (1.0 - t * t));
        }
        break;
      }
      case OpKind::kSoftmaxLastDim: {
        const std::size_t cols = n.out.shape.back();
        const std::size_t rows = n.out.values.size() / cols;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = n.out.values.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double dot = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dot += gr[c] * s[c];
          }
          for (std::size_t c = 0; c < cols; ++c) {
            bump(n.inputs[0], r * cols + c, s[c] * (gr[c] - dot));
          }
        }
        break;
      }
      case OpKind::kScale: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          bump(n.inputs[0], i, g[i] * n.attrs.factor);
        }
        break;
      }
      case OpKind::kSum: {
        const std::size_t len = nodes_[n.inputs[0]].out.values.size();
        for (std::size_t i = 0; i < len; ++i) {
          bump(n.inputs[0], i, g[0]);
        }
        break;
      }
    }
  }

  for (Node& n : nodes_) {
    if (n.op != OpKind::kLeaf || !n.out.requires_grad) {
      continue;
    }
    if (n.out.grad.empty()) {
      n.out.grad.assign(n.out.values.size(), 0.0);
    }
    const auto& buf = adj[&n - nodes_.data()];
    if (!buf.empty()) {
      for (std::size_t i = 0; i < buf.size(); ++i) {
        n.out.grad[i] += buf[i];
      }
    }
  }
}

void Graph::reset_grads() {
  for (Node& n : nodes_) {
    n.out.grad.clear();
  }
}

namespace {

Graph* common_graph(const char* op, std::initializer_list<Var> vars) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) {
      fail(std::string(op) + ": uninitialized var");
    }
    if (g == nullptr) {
      g = v.graph();
    } else if (g != v.graph()) {
      fail(std::string(op) + ": input var belongs to another graph");
    }
  }
  return g;
}

}  // namespace

Var matmul(Var a, Var b) {
  return common_graph("matmul", {a, b})->apply(OpKind::kMatmul, {a, b});
}
Var add(Var a, Var b) {
  return common_graph("add", {a, b})->apply(OpKind::kAdd, {a, b});
}
Var elementwise_multiply(Var a, Var b) {
  return common_graph("elementwise_multiply", {a, b})
      ->apply(OpKind::kMul, {a, b});
}
Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) {
    fail("concat: expected at least one input");
  }
  Graph* g = parts.front().graph();
  return g->apply(OpKind::kConcat, parts);
}
Var slice(Var x, std::size_t begin, std::size_t end) {
  return x.graph()->apply(OpKind::kSlice, {x}, OpAttrs{begin, end, 1.0});
}
Var sigmoid(Var x) { return x.graph()->apply(OpKind::kSigmoid, {x}); }
Var tanh(Var x) { return x.graph()->apply(OpKind::kTanh, {x}); }
Var softmax_lastdim(Var x) {
  return x.graph()->apply(OpKind::kSoftmaxLastDim, {x});
}
Var scale(Var x, double factor) {
  return x.graph()->apply(OpKind::kScale, {x}, OpAttrs{0, 0, factor});
}
Var sum(Var x) { return x.graph()->apply(OpKind::kSum, {x}); }
Var mse(Var pred, Var target) {
  return common_graph("mse", {pred, target})
      ->apply(OpKind::kMse, {pred, target});
}

double finite_difference_check(const ScalarFn& fn,
                               const std::vector<Tensor>& inputs,
                               double epsilon) {
  if (epsilon <= 0.0) {
    fail("finite_difference_check: epsilon must be positive");
  }

  auto evaluate = [&](const std::vector<Tensor>& points) {
    Graph g;
    std::vector<Var> vars;
    vars.reserve(points.size());
    for (const Tensor& t : points) {
      vars.push_back(g.leaf(t));
    }
    Var y = fn(g, vars);
    if (y.numel() != 1) {
      fail("finite_difference_check: function must return a scalar");
    }
    return y.value()[0];
  };

  // Analytic pass.
  std::vector<Tensor> grad_inputs = inputs;
  for (Tensor& t : grad_inputs) {
    t.requires_grad = true;
    t.grad.clear();
  }
  Graph g;
  std::vector<Var> vars;
  vars.reserve(grad_inputs.size());
  for (const Tensor& t : grad_inputs) {
    vars.push_back(g.leaf(t));
  }
  Var y = fn(g, vars);
  if (y.numel() != 1) {
    fail("finite_difference_check: function must return a scalar");
  }
  g.backward(y);

  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (Tensor& t : probe) {
    t.requires_grad = false;
  }
  for (std::size_t which = 0; which < probe.size(); ++which) {
    const std::vector<double>& analytic = vars[which].grad();
    for (std::size_t i = 0; i < probe[which].values.size(); ++i) {
      const double saved = probe[which].values[i];
      probe[which].values[i] = saved + epsilon;
      const double plus = evaluate(probe);
      probe[which].values[i] = saved - epsilon;
      const double minus = evaluate(probe);
      probe[which].values[i] = saved;
      const double central = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[i];
      const double err =
          std::abs(a - central) / std::max(1e-8, std::abs(a) + std::abs(central));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace tae
