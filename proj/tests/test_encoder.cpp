#include "tae/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

using namespace tae;

namespace {

EncoderParams random_params(std::size_t d, std::size_t H, Rng& rng,
                            double range = 0.5) {
  EncoderParams p = EncoderParams::zeros(d, H);
  for (Tensor* t : {&p.W_leaf, &p.b_leaf, &p.W_comp, &p.b_comp, &p.q}) {
    for (double& v : t->values) {
      v = rng.uniform(-range, range);
    }
  }
  return p;
}

Var embed(Graph& g, const std::vector<double>& e) {
  return g.constant({e.size()}, e);
}

}  // namespace

TEST_SUITE_BEGIN("encoder");

TEST_CASE("leaf_transform hand examples") {
  SUBCASE("zero weights give the zero state") {
    Graph g;
    BoundEncoder p = bind(g, EncoderParams::zeros(3, 2));
    NodeState s = leaf_transform(embed(g, {0.7, -0.3, 1.1}), p);
    CHECK(s.h.value() == std::vector<double>{0, 0});
    CHECK(s.c.value() == std::vector<double>{0, 0});
  }
  SUBCASE("scalar case against direct evaluation") {
    EncoderParams params = EncoderParams::zeros(1, 1);
    params.W_leaf.values = {1.0, 2.0};  // rows: h-part then c-part
    Graph g;
    BoundEncoder p = bind(g, params);
    NodeState s = leaf_transform(embed(g, {0.5}), p);
    CHECK(s.h.value()[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
    CHECK(s.h.value()[0] == doctest::Approx(0.46212).epsilon(1e-4));
    CHECK(s.c.value()[0] == 1.0);
  }
  SUBCASE("dimension mismatch rejected") {
    Graph g;
    BoundEncoder p = bind(g, EncoderParams::zeros(3, 2));
    CHECK_THROWS_AS(leaf_transform(embed(g, {1.0}), p),
                    std::invalid_argument);
  }
}

TEST_CASE("compose hand examples") {
  // With zero parameters every gate is 1/2 and g = 0, so
  // c_p = (c_l + c_r) / 2 and h_p = tanh(c_p) / 2.
  Graph g;
  BoundEncoder p = bind(g, EncoderParams::zeros(2, 1));

  auto state = [&](double h, double c) {
    return NodeState{g.constant({1}, {h}), g.constant({1}, {c})};
  };

  SUBCASE("zero children stay zero") {
    NodeState parent = compose(state(0, 0), state(0, 0), p);
    CHECK(parent.h.value() == std::vector<double>{0});
    CHECK(parent.c.value() == std::vector<double>{0});
  }
  SUBCASE("memory averages through the forget gates") {
    NodeState parent = compose(state(0, 2), state(0, 2), p);
    CHECK(parent.c.value()[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(parent.h.value()[0] ==
          doctest::Approx(0.5 * std::tanh(2.0)).epsilon(1e-12));
    CHECK(parent.h.value()[0] == doctest::Approx(0.48201).epsilon(1e-4));
  }
  SUBCASE("one-sided memory halves") {
    NodeState parent = compose(state(0, 4), state(0, 0), p);
    CHECK(parent.c.value()[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("score_pairs") {
  Rng rng(42);
  SUBCASE("two nodes give exactly one candidate") {
    Graph g;
    BoundEncoder p = bind(g, random_params(2, 3, rng));
    std::vector<NodeState> frontier = {
        leaf_transform(embed(g, {0.1, 0.2}), p),
        leaf_transform(embed(g, {-0.4, 0.3}), p)};
    PairScores scores = score_pairs(frontier, p);
    CHECK(scores.candidates.size() == 1);
    CHECK(scores.logits.numel() == 1);
  }
  SUBCASE("zero query makes all logits zero") {
    EncoderParams params = random_params(2, 3, rng);
    params.q.values = {0, 0, 0};
    Graph g;
    BoundEncoder p = bind(g, params);
    std::vector<NodeState> frontier;
    for (int i = 0; i < 4; ++i) {
      frontier.push_back(
          leaf_transform(embed(g, {rng.uniform(-1, 1), rng.uniform(-1, 1)}), p));
    }
    PairScores scores = score_pairs(frontier, p);
    CHECK(scores.logits.value() == std::vector<double>{0, 0, 0});
  }
  SUBCASE("unit query reads the candidate h directly") {
    EncoderParams params = EncoderParams::zeros(1, 1);
    params.q.values = {1.0};
    Graph g;
    BoundEncoder p = bind(g, params);
    std::vector<NodeState> frontier = {
        NodeState{g.constant({1}, {0.0}), g.constant({1}, {0.6})},
        NodeState{g.constant({1}, {0.0}), g.constant({1}, {-0.4})},
        NodeState{g.constant({1}, {0.0}), g.constant({1}, {0.0})}};
    PairScores scores = score_pairs(frontier, p);
    // candidate h = tanh((c_l + c_r)/2) / 2 under zero weights
    CHECK(scores.logits.value()[0] ==
          doctest::Approx(0.5 * std::tanh(0.1)).epsilon(1e-12));
    CHECK(scores.logits.value()[1] ==
          doctest::Approx(0.5 * std::tanh(-0.2)).epsilon(1e-12));
  }
  SUBCASE("fewer than two nodes rejected") {
    Graph g;
    BoundEncoder p = bind(g, random_params(2, 3, rng));
    std::vector<NodeState> frontier = {leaf_transform(embed(g, {0.1, 0.2}), p)};
    CHECK_THROWS_AS(score_pairs(frontier, p), std::invalid_argument);
  }
}

TEST_CASE("st_gumbel_select") {
  Rng rng(7);
  SUBCASE("argmax mode picks the larger logit") {
    Graph g;
    Var logits = g.constant({2}, {2.0, 1.0});
    Selection sel = st_gumbel_select(logits, 1.0, SelectMode::kArgmax, rng);
    CHECK(sel.index == 0);
    CHECK(sel.hard.value() == std::vector<double>{1.0, 0.0});
  }
  SUBCASE("huge temperature flattens the soft distribution") {
    Graph g;
    Var logits = g.constant({4}, {3.0, -1.0, 0.5, 2.0});
    Selection sel = st_gumbel_select(logits, 1e6, SelectMode::kArgmax, rng);
    for (double p : sel.soft.value()) {
      CHECK(p == doctest::Approx(0.25).epsilon(1e-5));
    }
  }
  SUBCASE("zero-noise sampling equals argmax") {
    Graph g;
    Var logits = g.constant({3}, {0.3, 1.4, -0.2});
    Rng sampler(11);
    sampler.set_zero_gumbel(true);
    Selection sampled =
        st_gumbel_select(logits, 0.7, SelectMode::kSample, sampler);
    Selection greedy = st_gumbel_select(logits, 0.7, SelectMode::kArgmax, rng);
    CHECK(sampled.index == greedy.index);
    CHECK(sampled.hard.value() == greedy.hard.value());
    CHECK(sampled.soft.value() == greedy.soft.value());
  }
  SUBCASE("hard output is exactly one-hot") {
    for (int trial = 0; trial < 200; ++trial) {
      Graph g;
      std::size_t m = 1 + rng.below(6);
      Tensor t = Tensor::zeros({m});
      for (double& v : t.values) {
        v = rng.uniform(-3, 3);
      }
      Var logits = g.leaf(t);
      Selection sel = st_gumbel_select(logits, 0.5 + rng.uniform01(),
                                       SelectMode::kSample, rng);
      double total = 0.0;
      std::size_t ones = 0;
      for (double v : sel.hard.value()) {
        total += v;
        if (v == 1.0) {
          ++ones;
        } else {
          CHECK(v == 0.0);
        }
      }
      CHECK(total == 1.0);
      CHECK(ones == 1);
    }
  }
  SUBCASE("ties break toward the lowest index") {
    Graph g;
    Var logits = g.constant({3}, {1.5, 1.5, 1.5});
    Selection sel = st_gumbel_select(logits, 1.0, SelectMode::kArgmax, rng);
    CHECK(sel.index == 0);
  }
  SUBCASE("non-positive temperature rejected") {
    Graph g;
    Var logits = g.constant({2}, {0.0, 0.0});
    CHECK_THROWS_AS(st_gumbel_select(logits, 0.0, SelectMode::kArgmax, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("encode_document base cases") {
  Rng rng(3);
  EncoderParams params = random_params(2, 3, rng);
  SUBCASE("single EDU needs no merge") {
    Graph g;
    BoundEncoder p = bind(g, params);
    Var e = embed(g, {0.2, -0.1});
    EncodeResult r =
        encode_document(g, {e}, p, SelectMode::kArgmax, 1.0, rng);
    CHECK(r.trace.empty());
    CHECK(r.tree.leaf_count() == 1);
    NodeState direct = leaf_transform(e, p);
    CHECK(r.root.h.value() == direct.h.value());
    CHECK(r.root.c.value() == direct.c.value());
  }
  SUBCASE("two EDUs merge regardless of parameters") {
    Graph g;
    BoundEncoder p = bind(g, params);
    EncodeResult r = encode_document(
        g, {embed(g, {0.2, -0.1}), embed(g, {1.0, 0.4})}, p,
        SelectMode::kSample, 2.0, rng);
    CHECK(r.trace == MergeTrace{0});
    CHECK(to_bracketed(r.tree) == "( 0 1 )");
  }
  SUBCASE("empty input rejected") {
    Graph g;
    BoundEncoder p = bind(g, params);
    CHECK_THROWS_AS(
        encode_document(g, {}, p, SelectMode::kArgmax, 1.0, rng),
        std::invalid_argument);
  }
}

// Hand-set scalar model whose merge order is predictable by direct
// evaluation: with W_comp = 0 the candidate h is tanh((c_l + c_r)/2) / 2, so
// the selector greedily merges the adjacent pair with the largest mean
// memory.
TEST_CASE("encode_document follows the per-step score oracle") {
  EncoderParams params = EncoderParams::zeros(1, 1);
  params.W_leaf.values = {1.0, 1.0};  // h = tanh(e), c = e
  params.q.values = {1.0};

  const std::vector<double> edus = {5.0, 1.0, 4.0, 4.0};

  // Oracle: simulate the merge loop with plain doubles.
  std::vector<double> frontier_c(edus);
  MergeTrace expected_trace;
  while (frontier_c.size() > 1) {
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t i = 0; i + 1 < frontier_c.size(); ++i) {
      const double parent_c = 0.5 * (frontier_c[i] + frontier_c[i + 1]);
      const double score = 0.5 * std::tanh(parent_c);
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    expected_trace.push_back(best);
    frontier_c[best] = 0.5 * (frontier_c[best] + frontier_c[best + 1]);
    frontier_c.erase(frontier_c.begin() + static_cast<long>(best) + 1);
  }
  REQUIRE(expected_trace == MergeTrace{2, 0, 0});

  Graph g;
  BoundEncoder p = bind(g, params);
  std::vector<Var> inputs;
  for (double e : edus) {
    inputs.push_back(embed(g, {e}));
  }
  Rng rng(1);
  EncodeResult r =
      encode_document(g, inputs, p, SelectMode::kArgmax, 1.0, rng);
  CHECK(r.trace == expected_trace);
  CHECK(to_bracketed(r.tree) == "( ( 0 1 ) ( 2 3 ) )");
}

TEST_CASE("encoder outputs are valid trees under fuzzing") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const std::size_t d = 1 + rng.below(4);
    const std::size_t H = 1 + rng.below(5);
    EncoderParams params = random_params(d, H, rng);
    Graph g;
    BoundEncoder p = bind(g, params);
    std::vector<Var> inputs;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor t = Tensor::zeros({d});
      for (double& v : t.values) {
        v = rng.uniform(-1, 1);
      }
      inputs.push_back(g.leaf(std::move(t)));
    }
    const SelectMode mode =
        trial % 2 ? SelectMode::kSample : SelectMode::kArgmax;
    EncodeResult r = encode_document(g, inputs, p, mode, 0.5, rng);
    CHECK(r.tree.leaf_count() == n);
    CHECK(r.trace.size() == n - 1);
    CHECK(from_merge_trace(n, r.trace) == r.tree);
    for (double v : r.root.h.value()) {
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("forcing index 0 yields fully left-branching trees") {
  Rng rng(123);
  for (std::size_t n = 2; n <= 12; ++n) {
    EncoderParams params = random_params(3, 4, rng);
    params.q.values.assign(params.q.values.size(), 0.0);  // all logits tie
    Graph g;
    BoundEncoder p = bind(g, params);
    std::vector<Var> inputs;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor t = Tensor::zeros({3});
      for (double& v : t.values) {
        v = rng.uniform(-1, 1);
      }
      inputs.push_back(g.leaf(std::move(t)));
    }
    EncodeResult r =
        encode_document(g, inputs, p, SelectMode::kArgmax, 1.0, rng);
    CHECK(r.trace == MergeTrace(n - 1, 0));
    CHECK(r.tree == baseline_tree(BaselineKind::kLeft, n, 0));
  }
}

TEST_CASE("fixed-trace encoding gradient matches finite differences") {
  Rng rng(55);
  const std::size_t d = 3, H = 4, n = 4;
  EncoderParams params = random_params(d, H, rng);
  std::vector<std::vector<double>> edus;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(d);
    for (double& v : e) {
      v = rng.uniform(-1, 1);
    }
    edus.push_back(e);
  }
  const MergeTrace trace = {1, 0, 0};
  Tensor target = Tensor::zeros({2 * H});
  for (double& v : target.values) {
    v = rng.uniform(-1, 1);
  }

  std::vector<Tensor> inputs = {params.W_leaf, params.b_leaf, params.W_comp,
                                params.b_comp, params.q};
  double err = finite_difference_check(
      [&](Graph& g, const std::vector<Var>& in) {
        BoundEncoder p{in[0], in[1], in[2], in[3], in[4], d, H};
        std::vector<Var> vars;
        for (const auto& e : edus) {
          vars.push_back(g.constant({d}, e));
        }
        NodeState root = encode_with_trace(g, vars, p, trace);
        return mse(concat({root.h, root.c}), g.leaf(target));
      },
      inputs, 1e-5);
  CHECK(err < 1e-3);
}

TEST_SUITE_END();
