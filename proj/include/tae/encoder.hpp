#pragma once

#include <cstddef>
#include <vector>

#include "tae/rng.hpp"
#include "tae/tensor.hpp"
#include "tae/tree.hpp"

namespace tae {

// Hidden/memory pair carried by every tree position, from leaf encodings up
// to the document state at the root.
struct NodeState {
  Var h;
  Var c;
};

// Trainable encoder weights. W_leaf/b_leaf lift a d-dim EDU embedding into
// state space, W_comp/b_comp is the binary composition cell, q scores merge
// candidates.
struct EncoderParams {
  Tensor W_leaf;  // (2H x d)
  Tensor b_leaf;  // (2H)
  Tensor W_comp;  // (5H x 2H)
  Tensor b_comp;  // (5H)
  Tensor q;       // (H)

  std::size_t embedding_dim() const { return W_leaf.shape[1]; }
  std::size_t hidden_dim() const { return q.shape[0]; }

  static EncoderParams zeros(std::size_t embedding_dim,
                             std::size_t hidden_dim);
};

// Encoder weights registered as leaves of one document graph.
struct BoundEncoder {
  Var W_leaf, b_leaf, W_comp, b_comp, q;
  std::size_t d = 0;
  std::size_t H = 0;
};

BoundEncoder bind(Graph& graph, const EncoderParams& params);

// u = W_leaf e + b_leaf; h = tanh(u[0:H]), c = u[H:2H].
NodeState leaf_transform(Var embedding, const BoundEncoder& params);

// Tree-LSTM composition: [i; f_l; f_r; o; g] = W_comp [h_l; h_r] + b_comp,
// c_p = sig(f_l) c_l + sig(f_r) c_r + sig(i) tanh(g), h_p = sig(o) tanh(c_p).
NodeState compose(const NodeState& left, const NodeState& right,
                  const BoundEncoder& params);

struct PairScores {
  std::vector<NodeState> candidates;  // candidate parents of adjacent pairs
  Var logits;                         // (k-1), logit_i = q . candidates[i].h
};

PairScores score_pairs(const std::vector<NodeState>& frontier,
                       const BoundEncoder& params);

enum class SelectMode { kSample, kArgmax };

// Straight-through Gumbel-Softmax selection over m logits. The hard output's
// forward value is exactly one-hot (ties broken toward the lowest index);
// its gradient is defined as the gradient of the relaxed softmax.
struct Selection {
  Var hard;           // (m), exactly one-hot in the forward pass
  Var soft;           // (m), softmax((logits + noise) / temperature)
  std::size_t index;  // argmax of the perturbed logits
};

Selection st_gumbel_select(Var logits, double temperature, SelectMode mode,
                           Rng& rng);

struct EncodeResult {
  NodeState root;
  BinaryTree tree;
  MergeTrace trace;
};

// Bottom-up encoding: leaf_transform everything, then repeatedly score
// adjacent pairs, select one discretely, and gate the candidate states with
// the straight-through mask until a single document state remains.
EncodeResult encode_document(Graph& graph,
                             const std::vector<Var>& edu_embeddings,
                             const BoundEncoder& params, SelectMode mode,
                             double temperature, Rng& rng);

// Deterministic composition along a fixed merge trace; no selector in the
// graph, so the result is differentiable in the ordinary sense.
NodeState encode_with_trace(Graph& graph,
                            const std::vector<Var>& edu_embeddings,
                            const BoundEncoder& params,
                            const MergeTrace& trace);

}  // namespace tae
