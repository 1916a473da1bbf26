#include "tae/decoder.hpp"

#include <stdexcept>
#include <string>

namespace tae {

DecoderParams DecoderParams::zeros(std::size_t embedding_dim,
                                   std::size_t hidden_dim) {
  if (embedding_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("decoder dimensions must be positive");
  }
  DecoderParams p;
  p.W_left = Tensor::zeros({4 * hidden_dim, hidden_dim}, true);
  p.b_left = Tensor::zeros({4 * hidden_dim}, true);
  p.W_right = Tensor::zeros({4 * hidden_dim, hidden_dim}, true);
  p.b_right = Tensor::zeros({4 * hidden_dim}, true);
  p.W_out = Tensor::zeros({embedding_dim, hidden_dim}, true);
  p.b_out = Tensor::zeros({embedding_dim}, true);
  return p;
}

BoundDecoder bind(Graph& graph, const DecoderParams& params) {
  BoundDecoder b;
  b.d = params.embedding_dim();
  b.H = params.hidden_dim();
  b.W_left = graph.leaf(params.W_left);
  b.b_left = graph.leaf(params.b_left);
  b.W_right = graph.leaf(params.W_right);
  b.b_right = graph.leaf(params.b_right);
  b.W_out = graph.leaf(params.W_out);
  b.b_out = graph.leaf(params.b_out);
  return b;
}

NodeState split(const NodeState& parent, Side side,
                const BoundDecoder& params) {
  const std::size_t H = params.H;
  if (parent.h.shape() != Shape{H} || parent.c.shape() != Shape{H}) {
    throw std::invalid_argument(
        "split: parent state dimension mismatch, expected [" +
        std::to_string(H) + "]");
  }
  const Var& W = side == Side::kLeft ? params.W_left : params.W_right;
  const Var& b = side == Side::kLeft ? params.b_left : params.b_right;
  Var v = add(matmul(W, parent.h), b);
  Var gate_f = sigmoid(slice(v, 0, H));
  Var gate_i = sigmoid(slice(v, H, 2 * H));
  Var gate_o = sigmoid(slice(v, 2 * H, 3 * H));
  Var g = tanh(slice(v, 3 * H, 4 * H));
  NodeState child;
  child.c = add(elementwise_multiply(gate_f, parent.c),
                elementwise_multiply(gate_i, g));
  child.h = elementwise_multiply(gate_o, tanh(child.c));
  return child;
}

DecodeResult decode_document(Graph& graph, const NodeState& root,
                             const BinaryTree& tree,
                             const BoundDecoder& params) {
  std::vector<Var> outputs(tree.leaf_count());
  BinaryTree::Builder builder;

  // Explicit stack; states flow down, the traversal tree is assembled on the
  // way back up.
  struct Item {
    std::size_t node;
    NodeState state;
    bool entered;
  };
  std::vector<Item> stack{{tree.root(), root, false}};
  std::vector<std::size_t> built;  // builder ids in post-order
  while (!stack.empty()) {
    Item item = std::move(stack.back());
    stack.pop_back();
    if (tree.is_leaf(item.node)) {
      const std::size_t leaf = tree.leaf_index(item.node);
      outputs[leaf] = add(matmul(params.W_out, item.state.h), params.b_out);
      built.push_back(builder.add_leaf(leaf));
      continue;
    }
    if (!item.entered) {
      NodeState left_state = split(item.state, Side::kLeft, params);
      NodeState right_state = split(item.state, Side::kRight, params);
      stack.push_back({item.node, item.state, true});
      stack.push_back({tree.right(item.node), right_state, false});
      stack.push_back({tree.left(item.node), left_state, false});
      continue;
    }
    const std::size_t right_id = built.back();
    built.pop_back();
    const std::size_t left_id = built.back();
    built.pop_back();
    built.push_back(builder.add_internal(left_id, right_id));
  }

  (void)graph;
  DecodeResult result;
  result.outputs = std::move(outputs);
  result.traversal = std::move(builder).finish(built.front());
  return result;
}

Var reconstruction_loss(const std::vector<Var>& preds,
                        const std::vector<Var>& targets) {
  if (preds.empty() || preds.size() != targets.size()) {
    throw std::invalid_argument(
        "reconstruction_loss: need equal, nonempty prediction/target lists (" +
        std::to_string(preds.size()) + " vs " + std::to_string(targets.size()) +
        ")");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].shape() != targets[i].shape()) {
      throw std::invalid_argument(
          "reconstruction_loss: dimension mismatch at position " +
          std::to_string(i) + ": " + shape_str(preds[i].shape()) + " vs " +
          shape_str(targets[i].shape()));
    }
  }
  if (preds.size() == 1) {
    return mse(preds[0], targets[0]);
  }
  return mse(concat(preds), concat(targets));
}

}  // namespace tae
