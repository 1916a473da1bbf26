#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tae {

// Adjacent-pair merge choices; step t picks an index into a frontier of
// (n - t) nodes, so valid picks are 0..n-t-2. A trace of length n-1 uniquely
// determines a binary tree over n leaves.
using MergeTrace = std::vector<std::size_t>;

// Leaf-index span (i, j) covered by a node, inclusive on both ends.
using Span = std::pair<std::size_t, std::size_t>;

// Strictly binary tree over leaves 0..n-1 in left-to-right order. Nodes live
// in an arena; every construction path validates the invariants (contiguous
// nested spans, exactly n-1 internal nodes).
class BinaryTree {
 public:
  // A single leaf with index 0.
  BinaryTree();

  std::size_t leaf_count() const { return leaf_count_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t root() const { return root_; }

  bool is_leaf(std::size_t node) const { return nodes_[node].left < 0; }
  std::size_t left(std::size_t node) const;
  std::size_t right(std::size_t node) const;
  std::size_t leaf_index(std::size_t node) const;
  Span span(std::size_t node) const;

  // Spans of all internal nodes (root included, leaves excluded).
  std::set<Span> spans() const;

  std::size_t height() const;

  bool operator==(const BinaryTree& other) const;

 private:
  struct TreeNodeRep {
    int left = -1;
    int right = -1;
    std::size_t lo = 0;
    std::size_t hi = 0;
  };

 public:
  // Builder used by every construction path.
  class Builder {
   public:
    std::size_t add_leaf(std::size_t index);
    std::size_t add_internal(std::size_t left, std::size_t right);
    BinaryTree finish(std::size_t root) &&;

   private:
    std::vector<TreeNodeRep> nodes_;
  };

 private:
  std::vector<TreeNodeRep> nodes_;
  std::size_t root_ = 0;
  std::size_t leaf_count_ = 1;
};

BinaryTree from_merge_trace(std::size_t leaf_count, const MergeTrace& trace);

std::set<Span> spans(const BinaryTree& tree);

struct SpanScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Unlabeled span precision/recall/F1 of pred against gold. Counts all
// internal spans including the root and excluding single-leaf spans; n = 1
// scores as perfect (both span sets empty).
SpanScore unlabeled_span_f1(const BinaryTree& pred, const BinaryTree& gold);

enum class BaselineKind { kLeft, kRight, kBalanced, kRandom };

BaselineKind baseline_kind_from_string(const std::string& name);

// left/right: fully one-sided chains. balanced: recursive midpoint split at
// ceil(n/2). random: merge trace sampled uniformly per step (each adjacent
// pair equally likely), which is not uniform over tree shapes.
BinaryTree baseline_tree(BaselineKind kind, std::size_t leaf_count,
                         std::uint64_t seed);

// Rng-threading variant so one seeded stream can cover a whole corpus.
class Rng;
BinaryTree baseline_tree(BaselineKind kind, std::size_t leaf_count, Rng& rng);

// "( ( 0 1 ) 2 )" style serialization: decimal leaf indices, single spaces.
std::string to_bracketed(const BinaryTree& tree);
BinaryTree parse_bracketed(const std::string& text);

struct NamedTree {
  std::string doc_id;
  BinaryTree tree;
};

// Tree file: one "doc_id<TAB>bracketed_tree" record per line.
std::vector<NamedTree> read_tree_file(const std::filesystem::path& path);
void write_tree_file(const std::filesystem::path& path,
                     const std::vector<NamedTree>& trees);

}  // namespace tae
