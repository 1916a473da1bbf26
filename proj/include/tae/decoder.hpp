#pragma once

#include <cstddef>
#include <vector>

#include "tae/encoder.hpp"
#include "tae/tensor.hpp"
#include "tae/tree.hpp"

namespace tae {

// Trainable decoder weights: two independent split cells (left/right child)
// plus the projection from leaf states back to embedding space.
struct DecoderParams {
  Tensor W_left;   // (4H x H)
  Tensor b_left;   // (4H)
  Tensor W_right;  // (4H x H)
  Tensor b_right;  // (4H)
  Tensor W_out;    // (d x H)
  Tensor b_out;    // (d)

  std::size_t embedding_dim() const { return W_out.shape[0]; }
  std::size_t hidden_dim() const { return W_out.shape[1]; }

  static DecoderParams zeros(std::size_t embedding_dim,
                             std::size_t hidden_dim);
};

struct BoundDecoder {
  Var W_left, b_left, W_right, b_right, W_out, b_out;
  std::size_t d = 0;
  std::size_t H = 0;
};

BoundDecoder bind(Graph& graph, const DecoderParams& params);

enum class Side { kLeft, kRight };

// Inverse Tree-LSTM step: with (W, b) picked by side,
// [f; i; o; g] = W h_parent + b,
// c_child = sig(f) c_parent + sig(i) tanh(g), h_child = sig(o) tanh(c_child).
NodeState split(const NodeState& parent, Side side, const BoundDecoder& params);

struct DecodeResult {
  std::vector<Var> outputs;  // one d-dim reconstruction per leaf, in order
  BinaryTree traversal;      // the tree the recursion actually followed
};

// Top-down decoding along `tree`: the root gets `root`, every internal node
// splits its state into child states, every leaf is projected through
// W_out/b_out. The traversal tree is rebuilt from the recursion itself so the
// tie to the encoder tree can be asserted.
DecodeResult decode_document(Graph& graph, const NodeState& root,
                             const BinaryTree& tree,
                             const BoundDecoder& params);

// Mean over all n*d coordinates of the squared difference.
Var reconstruction_loss(const std::vector<Var>& preds,
                        const std::vector<Var>& targets);

}  // namespace tae
