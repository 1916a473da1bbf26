#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace tae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense double-precision tensor in row-major order. `grad` is empty until a
// backward pass deposits one; when present it has the same length as
// `values`.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  std::size_t numel() const { return values.size(); }

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor row_major(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
};

enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kMul,
  kConcat,
  kSlice,
  kSigmoid,
  kTanh,
  kSoftmaxLastDim,
  kScale,
  kSum,
  kMse,
};

const char* op_name(OpKind op);

// Extra operands for ops that need them: slice bounds, scale factor.
struct OpAttrs {
  std::size_t begin = 0;
  std::size_t end = 0;
  double factor = 1.0;
};

class Graph;

// Handle to a node inside a Graph. Cheap to copy; valid as long as the graph
// is alive.
class Var {
 public:
  Var() = default;

  const Shape& shape() const;
  const std::vector<double>& value() const;
  const std::vector<double>& grad() const;
  bool requires_grad() const;
  std::size_t numel() const { return value().size(); }
  std::size_t id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Append-only reverse-mode differentiation tape. Rebuilt per document: tree
// shapes vary, so there is no static graph to cache. Single-threaded; distinct
// graphs are independent.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Registers a leaf (input or parameter) node.
  Var leaf(Tensor tensor);
  Var constant(Shape shape, std::vector<double> values);
  Var scalar_constant(double value);

  // Registers one operation node and runs its forward computation.
  Var apply(OpKind op, const std::vector<Var>& inputs, OpAttrs attrs = {});

  // Reverse pass from a scalar loss, visiting nodes in exact reverse
  // insertion order. Accumulates into leaf grads; leaves with requires_grad
  // that the loss does not reach receive an all-zero grad.
  void backward(Var loss);

  // Clears accumulated leaf gradients.
  void reset_grads();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    OpKind op = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Tensor out;
  };

  const Node& node(std::size_t id) const;
  Var push(Node node);

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var elementwise_multiply(Var a, Var b);
Var concat(const std::vector<Var>& parts);
Var slice(Var x, std::size_t begin, std::size_t end);
Var sigmoid(Var x);
Var tanh(Var x);
Var softmax_lastdim(Var x);
Var scale(Var x, double factor);
Var sum(Var x);
Var mse(Var pred, Var target);

// Scalar-valued expression over a fixed set of input leaves, rebuilt per
// evaluation.
using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

// Compares analytic gradients of `fn` against central finite differences.
// Returns the max over all input coordinates of
// |analytic - central| / max(1e-8, |analytic| + |central|).
double finite_difference_check(const ScalarFn& fn,
                               const std::vector<Tensor>& inputs,
                               double epsilon);

}  // namespace tae
