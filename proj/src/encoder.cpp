#include "tae/encoder.hpp"

#include <stdexcept>
#include <string>

namespace tae {

namespace {

Tensor zeros_grad(Shape shape) { return Tensor::zeros(std::move(shape), true); }

void check_state_dim(const NodeState& s, std::size_t H, const char* who) {
  if (s.h.shape() != Shape{H} || s.c.shape() != Shape{H}) {
    throw std::invalid_argument(std::string(who) +
                                ": node state dimension mismatch, expected [" +
                                std::to_string(H) + "]");
  }
}

}  // namespace

EncoderParams EncoderParams::zeros(std::size_t embedding_dim,
                                   std::size_t hidden_dim) {
  if (embedding_dim == 0 || hidden_dim == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  EncoderParams p;
  p.W_leaf = zeros_grad({2 * hidden_dim, embedding_dim});
  p.b_leaf = zeros_grad({2 * hidden_dim});
  p.W_comp = zeros_grad({5 * hidden_dim, 2 * hidden_dim});
  p.b_comp = zeros_grad({5 * hidden_dim});
  p.q = zeros_grad({hidden_dim});
  return p;
}

BoundEncoder bind(Graph& graph, const EncoderParams& params) {
  BoundEncoder b;
  b.d = params.embedding_dim();
  b.H = params.hidden_dim();
  b.W_leaf = graph.leaf(params.W_leaf);
  b.b_leaf = graph.leaf(params.b_leaf);
  b.W_comp = graph.leaf(params.W_comp);
  b.b_comp = graph.leaf(params.b_comp);
  b.q = graph.leaf(params.q);
  return b;
}

NodeState leaf_transform(Var embedding, const BoundEncoder& params) {
  if (embedding.shape() != Shape{params.d}) {
    throw std::invalid_argument(
        "leaf_transform: embedding shape " + shape_str(embedding.shape()) +
        " does not match configured dimension [" + std::to_string(params.d) +
        "]");
  }
  Var u = add(matmul(params.W_leaf, embedding), params.b_leaf);
  NodeState s;
  s.h = tanh(slice(u, 0, params.H));
  s.c = slice(u, params.H, 2 * params.H);
  return s;
}

NodeState compose(const NodeState& left, const NodeState& right,
                  const BoundEncoder& params) {
  const std::size_t H = params.H;
  check_state_dim(left, H, "compose");
  check_state_dim(right, H, "compose");
  Var x = concat({left.h, right.h});
  Var v = add(matmul(params.W_comp, x), params.b_comp);
  Var gate_i = sigmoid(slice(v, 0, H));
  Var gate_fl = sigmoid(slice(v, H, 2 * H));
  Var gate_fr = sigmoid(slice(v, 2 * H, 3 * H));
  Var gate_o = sigmoid(slice(v, 3 * H, 4 * H));
  Var g = tanh(slice(v, 4 * H, 5 * H));
  NodeState parent;
  parent.c = add(add(elementwise_multiply(gate_fl, left.c),
                     elementwise_multiply(gate_fr, right.c)),
                 elementwise_multiply(gate_i, g));
  parent.h = elementwise_multiply(gate_o, tanh(parent.c));
  return parent;
}

PairScores score_pairs(const std::vector<NodeState>& frontier,
                       const BoundEncoder& params) {
  if (frontier.size() < 2) {
    throw std::invalid_argument("score_pairs: frontier needs at least 2 nodes");
  }
  PairScores out;
  std::vector<Var> logit_parts;
  for (std::size_t i = 0; i + 1 < frontier.size(); ++i) {
    NodeState candidate = compose(frontier[i], frontier[i + 1], params);
    logit_parts.push_back(sum(elementwise_multiply(params.q, candidate.h)));
    out.candidates.push_back(std::move(candidate));
  }
  out.logits = concat(logit_parts);
  return out;
}

Selection st_gumbel_select(Var logits, double temperature, SelectMode mode,
                           Rng& rng) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("st_gumbel_select: temperature must be > 0");
  }
  if (logits.shape().size() != 1) {
    throw std::invalid_argument("st_gumbel_select: logits must be rank 1");
  }
  Graph& graph = *logits.graph();
  const std::size_t m = logits.numel();

  Var perturbed = logits;
  if (mode == SelectMode::kSample) {
    std::vector<double> noise(m);
    for (double& v : noise) {
      v = rng.gumbel();
    }
    perturbed = add(logits, graph.constant({m}, std::move(noise)));
  }
  Var scaled = scale(perturbed, 1.0 / temperature);
  Var soft = softmax_lastdim(scaled);

  const std::vector<double>& sv = scaled.value();
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (sv[i] > sv[best]) {  // strict: ties stay at the lowest index
      best = i;
    }
  }

  // Forward value is exactly the one-hot; backward flows through `soft`
  // with unit weight (hard = onehot + soft - stop_grad(soft)).
  std::vector<double> onehot(m, 0.0);
  onehot[best] = 1.0;
  Var drift = add(soft, scale(graph.constant({m}, soft.value()), -1.0));
  Var hard = add(graph.constant({m}, std::move(onehot)), drift);

  Selection sel;
  sel.hard = hard;
  sel.soft = soft;
  sel.index = best;
  return sel;
}

EncodeResult encode_document(Graph& graph,
                             const std::vector<Var>& edu_embeddings,
                             const BoundEncoder& params, SelectMode mode,
                             double temperature, Rng& rng) {
  if (edu_embeddings.empty()) {
    throw std::invalid_argument("encode_document: no EDU embeddings");
  }
  const std::size_t n = edu_embeddings.size();
  std::vector<NodeState> frontier;
  frontier.reserve(n);
  for (const Var& e : edu_embeddings) {
    frontier.push_back(leaf_transform(e, params));
  }

  Var ones_col;
  if (n > 1) {
    ones_col =
        graph.constant({params.H, 1}, std::vector<double>(params.H, 1.0));
  }

  MergeTrace trace;
  while (frontier.size() > 1) {
    PairScores scores = score_pairs(frontier, params);
    Selection sel = st_gumbel_select(scores.logits, temperature, mode, rng);

    // Gate every candidate with the straight-through mask; the forward value
    // is the selected candidate, the backward pass also reaches the logits.
    NodeState merged;
    for (std::size_t i = 0; i < scores.candidates.size(); ++i) {
      Var gate = matmul(ones_col, slice(sel.hard, i, i + 1));
      Var h = elementwise_multiply(gate, scores.candidates[i].h);
      Var c = elementwise_multiply(gate, scores.candidates[i].c);
      if (i == 0) {
        merged = {h, c};
      } else {
        merged = {add(merged.h, h), add(merged.c, c)};
      }
    }

    frontier[sel.index] = merged;
    frontier.erase(frontier.begin() + static_cast<long>(sel.index) + 1);
    trace.push_back(sel.index);
  }

  EncodeResult result;
  result.root = frontier.front();
  result.trace = std::move(trace);
  result.tree = from_merge_trace(n, result.trace);
  return result;
}

NodeState encode_with_trace(Graph& graph,
                            const std::vector<Var>& edu_embeddings,
                            const BoundEncoder& params,
                            const MergeTrace& trace) {
  if (edu_embeddings.empty()) {
    throw std::invalid_argument("encode_with_trace: no EDU embeddings");
  }
  if (trace.size() != edu_embeddings.size() - 1) {
    throw std::invalid_argument("encode_with_trace: trace length " +
                                std::to_string(trace.size()) +
                                " does not match leaf count " +
                                std::to_string(edu_embeddings.size()));
  }
  std::vector<NodeState> frontier;
  frontier.reserve(edu_embeddings.size());
  for (const Var& e : edu_embeddings) {
    frontier.push_back(leaf_transform(e, params));
  }
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const std::size_t p = trace[t];
    if (p + 2 > frontier.size()) {
      throw std::invalid_argument("encode_with_trace: step " +
                                  std::to_string(t) + " picks pair " +
                                  std::to_string(p) + " out of range");
    }
    frontier[p] = compose(frontier[p], frontier[p + 1], params);
    frontier.erase(frontier.begin() + static_cast<long>(p) + 1);
  }
  (void)graph;
  return frontier.front();
}

}  // namespace tae
