#include "tae/tree.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tae/rng.hpp"

namespace tae {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

BinaryTree::BinaryTree() {
  nodes_.push_back(TreeNodeRep{-1, -1, 0, 0});
  root_ = 0;
  leaf_count_ = 1;
}

std::size_t BinaryTree::left(std::size_t node) const {
  return static_cast<std::size_t>(nodes_[node].left);
}

std::size_t BinaryTree::right(std::size_t node) const {
  return static_cast<std::size_t>(nodes_[node].right);
}

std::size_t BinaryTree::leaf_index(std::size_t node) const {
  return nodes_[node].lo;
}

Span BinaryTree::span(std::size_t node) const {
  return {nodes_[node].lo, nodes_[node].hi};
}

std::set<Span> BinaryTree::spans() const {
  std::set<Span> out;
  for (const TreeNodeRep& n : nodes_) {
    if (n.left >= 0) {
      out.insert({n.lo, n.hi});
    }
  }
  return out;
}

std::size_t BinaryTree::height() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t best = 0;
  // Children precede parents in the arena for every construction path.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!is_leaf(i)) {
      depth[i] = 1 + std::max(depth[left(i)], depth[right(i)]);
      best = std::max(best, depth[i]);
    }
  }
  return best;
}

bool BinaryTree::operator==(const BinaryTree& other) const {
  if (leaf_count_ != other.leaf_count_) {
    return false;
  }
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root_, other.root_}};
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    if (is_leaf(a) != other.is_leaf(b)) {
      return false;
    }
    if (is_leaf(a)) {
      if (leaf_index(a) != other.leaf_index(b)) {
        return false;
      }
      continue;
    }
    stack.push_back({left(a), other.left(b)});
    stack.push_back({right(a), other.right(b)});
  }
  return true;
}

std::size_t BinaryTree::Builder::add_leaf(std::size_t index) {
  nodes_.push_back(TreeNodeRep{-1, -1, index, index});
  return nodes_.size() - 1;
}

std::size_t BinaryTree::Builder::add_internal(std::size_t left,
                                              std::size_t right) {
  if (left >= nodes_.size() || right >= nodes_.size()) {
    fail("tree builder: child id out of range");
  }
  if (nodes_[left].hi + 1 < nodes_[right].lo) {
    fail("tree builder: leaf " + std::to_string(nodes_[left].hi + 1) +
         " missing between children spans (" +
         std::to_string(nodes_[left].lo) + ", " +
         std::to_string(nodes_[left].hi) + ") and (" +
         std::to_string(nodes_[right].lo) + ", " +
         std::to_string(nodes_[right].hi) + ")");
  }
  if (nodes_[left].hi + 1 != nodes_[right].lo) {
    std::ostringstream out;
    out << "tree builder: children spans overlap or are out of order: ("
        << nodes_[left].lo << ", " << nodes_[left].hi << ") then ("
        << nodes_[right].lo << ", " << nodes_[right].hi << ")";
    fail(out.str());
  }
  nodes_.push_back(TreeNodeRep{static_cast<int>(left), static_cast<int>(right),
                               nodes_[left].lo, nodes_[right].hi});
  return nodes_.size() - 1;
}

BinaryTree BinaryTree::Builder::finish(std::size_t root) && {
  if (root >= nodes_.size()) {
    fail("tree builder: root id out of range");
  }
  // Walk from the root: every arena node must be reached exactly once and
  // the in-order leaf sequence must be exactly 0..n-1.
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> leaves;
  std::vector<std::size_t> stack{root};
  while (!stack.empty()) {
    std::size_t cur = stack.back();
    stack.pop_back();
    if (seen[cur]) {
      fail("tree builder: node reachable twice");
    }
    seen[cur] = true;
    const TreeNodeRep& n = nodes_[cur];
    if (n.left < 0) {
      leaves.push_back(n.lo);
    } else {
      stack.push_back(static_cast<std::size_t>(n.left));
      stack.push_back(static_cast<std::size_t>(n.right));
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    fail("tree builder: dangling nodes outside the tree");
  }
  std::sort(leaves.begin(), leaves.end());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i] != i) {
      fail("tree builder: leaf " + std::to_string(i) +
           " missing or duplicated; leaf indices must be exactly 0..n-1");
    }
  }
  if (nodes_.size() != 2 * leaves.size() - 1) {
    fail("tree builder: wrong internal node count");
  }
  BinaryTree t;
  t.nodes_ = std::move(nodes_);
  t.root_ = root;
  t.leaf_count_ = leaves.size();
  return t;
}

BinaryTree from_merge_trace(std::size_t leaf_count, const MergeTrace& trace) {
  if (leaf_count == 0) {
    fail("from_merge_trace: leaf count must be at least 1");
  }
  if (trace.size() != leaf_count - 1) {
    fail("from_merge_trace: trace length " + std::to_string(trace.size()) +
         " does not match leaf count " + std::to_string(leaf_count));
  }
  BinaryTree::Builder builder;
  std::vector<std::size_t> frontier;
  frontier.reserve(leaf_count);
  for (std::size_t i = 0; i < leaf_count; ++i) {
    frontier.push_back(builder.add_leaf(i));
  }
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const std::size_t p = trace[t];
    if (p + 2 > frontier.size()) {
      fail("from_merge_trace: step " + std::to_string(t) + " picks pair " +
           std::to_string(p) + " but frontier has " +
           std::to_string(frontier.size()) + " nodes");
    }
    const std::size_t parent = builder.add_internal(frontier[p], frontier[p + 1]);
    frontier[p] = parent;
    frontier.erase(frontier.begin() + static_cast<long>(p) + 1);
  }
  return std::move(builder).finish(frontier.front());
}

std::set<Span> spans(const BinaryTree& tree) { return tree.spans(); }

SpanScore unlabeled_span_f1(const BinaryTree& pred, const BinaryTree& gold) {
  if (pred.leaf_count() != gold.leaf_count()) {
    fail("unlabeled_span_f1: leaf counts differ: " +
         std::to_string(pred.leaf_count()) + " vs " +
         std::to_string(gold.leaf_count()));
  }
  const std::set<Span> sp = pred.spans();
  const std::set<Span> sg = gold.spans();
  if (sp.empty() && sg.empty()) {
    return {1.0, 1.0, 1.0};
  }
  std::size_t hits = 0;
  for (const Span& s : sp) {
    hits += sg.count(s);
  }
  SpanScore r;
  r.precision = static_cast<double>(hits) / static_cast<double>(sp.size());
  r.recall = static_cast<double>(hits) / static_cast<double>(sg.size());
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

BaselineKind baseline_kind_from_string(const std::string& name) {
  if (name == "left") return BaselineKind::kLeft;
  if (name == "right") return BaselineKind::kRight;
  if (name == "balanced") return BaselineKind::kBalanced;
  if (name == "random") return BaselineKind::kRandom;
  fail("unknown baseline kind '" + name +
       "' (expected left|right|balanced|random)");
}

namespace {

std::size_t build_balanced(BinaryTree::Builder& builder, std::size_t lo,
                           std::size_t hi) {
  if (lo == hi) {
    return builder.add_leaf(lo);
  }
  const std::size_t len = hi - lo + 1;
  const std::size_t mid = lo + (len + 1) / 2;  // ceil(len/2) leaves go left
  return builder.add_internal(build_balanced(builder, lo, mid - 1),
                              build_balanced(builder, mid, hi));
}

}  // namespace

BinaryTree baseline_tree(BaselineKind kind, std::size_t leaf_count, Rng& rng) {
  if (leaf_count == 0) {
    fail("baseline_tree: leaf count must be at least 1");
  }
  switch (kind) {
    case BaselineKind::kLeft:
      return from_merge_trace(leaf_count, MergeTrace(leaf_count - 1, 0));
    case BaselineKind::kRight: {
      MergeTrace trace;
      for (std::size_t k = leaf_count; k > 1; --k) {
        trace.push_back(k - 2);
      }
      return from_merge_trace(leaf_count, trace);
    }
    case BaselineKind::kBalanced: {
      BinaryTree::Builder builder;
      const std::size_t root = build_balanced(builder, 0, leaf_count - 1);
      return std::move(builder).finish(root);
    }
    case BaselineKind::kRandom: {
      MergeTrace trace;
      for (std::size_t k = leaf_count; k > 1; --k) {
        trace.push_back(rng.below(k - 1));
      }
      return from_merge_trace(leaf_count, trace);
    }
  }
  fail("baseline_tree: unknown kind");
}

BinaryTree baseline_tree(BaselineKind kind, std::size_t leaf_count,
                         std::uint64_t seed) {
  Rng rng(seed);
  return baseline_tree(kind, leaf_count, rng);
}

std::string to_bracketed(const BinaryTree& tree) {
  std::string out;
  struct Item {
    std::size_t node;
    int stage;  // 0 = open, 1 = between children, 2 = close
  };
  std::vector<Item> stack{{tree.root(), 0}};
  while (!stack.empty()) {
    Item& top = stack.back();
    if (tree.is_leaf(top.node)) {
      out += std::to_string(tree.leaf_index(top.node));
      stack.pop_back();
      continue;
    }
    if (top.stage == 0) {
      out += "( ";
      top.stage = 1;
      stack.push_back({tree.left(top.node), 0});
    } else if (top.stage == 1) {
      out += ' ';
      top.stage = 2;
      stack.push_back({tree.right(top.node), 0});
    } else {
      out += " )";
      stack.pop_back();
    }
  }
  return out;
}

namespace {

struct Token {
  std::string text;
  std::size_t pos;  // character offset in the input
};

std::vector<Token> tokenize_bracketed(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    if (text[i] == '(' || text[i] == ')') {
      tokens.push_back({std::string(1, text[i]), i});
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
           text[i] != '(' && text[i] != ')') {
      ++i;
    }
    tokens.push_back({text.substr(start, i - start), start});
  }
  return tokens;
}

class BracketParser {
 public:
  explicit BracketParser(const std::string& text)
      : tokens_(tokenize_bracketed(text)) {}

  BinaryTree parse() {
    if (tokens_.empty()) {
      fail("parse_bracketed: empty input");
    }
    const std::size_t root = parse_node();
    if (pos_ != tokens_.size()) {
      fail("parse_bracketed: trailing input at position " +
           std::to_string(tokens_[pos_].pos));
    }
    return std::move(builder_).finish(root);
  }

 private:
  const Token& peek() const {
    if (pos_ >= tokens_.size()) {
      fail("parse_bracketed: unexpected end of input (unbalanced parentheses)");
    }
    return tokens_[pos_];
  }

  std::size_t parse_node() {
    const Token& tok = peek();
    if (tok.text == "(") {
      ++pos_;
      const std::size_t left = parse_node();
      const std::size_t right = parse_node();
      const Token& close = peek();
      if (close.text != ")") {
        fail("parse_bracketed: expected ')' at position " +
             std::to_string(close.pos) + ", got '" + close.text + "'");
      }
      ++pos_;
      return builder_.add_internal(left, right);
    }
    if (tok.text == ")") {
      fail("parse_bracketed: unexpected ')' at position " +
           std::to_string(tok.pos));
    }
    for (char c : tok.text) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        fail("parse_bracketed: invalid leaf '" + tok.text + "' at position " +
             std::to_string(tok.pos));
      }
    }
    ++pos_;
    return builder_.add_leaf(std::stoul(tok.text));
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  BinaryTree::Builder builder_;
};

}  // namespace

BinaryTree parse_bracketed(const std::string& text) {
  return BracketParser(text).parse();
}

std::vector<NamedTree> read_tree_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open tree file: " + path.string());
  }
  std::vector<NamedTree> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": empty record");
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected doc_id<TAB>tree");
    }
    NamedTree named;
    named.doc_id = line.substr(0, tab);
    try {
      named.tree = parse_bracketed(line.substr(tab + 1));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": " + e.what());
    }
    out.push_back(std::move(named));
  }
  return out;
}

void write_tree_file(const std::filesystem::path& path,
                     const std::vector<NamedTree>& trees) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write tree file: " + path.string());
  }
  for (const NamedTree& named : trees) {
    out << named.doc_id << '\t' << to_bracketed(named.tree) << '\n';
  }
  if (!out) {
    throw std::runtime_error("error writing tree file: " + path.string());
  }
}

}  // namespace tae
