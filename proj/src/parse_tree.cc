#include "grex/parse_tree.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "grex/errors.h"

namespace grex {
namespace {

constexpr std::array<std::string_view, kNumActionKinds> kKindNames = {
    "Regular", "AnchoredLeft", "AnchoredRight", "SubgrammarLeft",
    "SubgrammarRight"};

void AppendQuoted(std::string& out, std::string_view text) {
  out.push_back('\'');
  for (char c : text) {
    if (c == '\'' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('\'');
}

// Recursive-descent reader for the text produced by ParseTree::ToText.
class TreeReader {
 public:
  explicit TreeReader(std::string_view text) : text_(text) {}

  // Returns the subtree as a nested description, appending leaves in order.
  struct Parsed {
    bool leaf = false;
    char token = 0;
    std::size_t index = 0;
    std::string atom;
    ActionKind kind = ActionKind::kRegular;
    std::vector<Parsed> children;
  };

  Parsed ReadNode() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail("unexpected end of tree text");
    if (text_[pos_] == '[') return ReadLeaf();
    if (text_[pos_] != '(') Fail("expected '(' or '['");
    ++pos_;
    Parsed node;
    SkipSpace();
    node.atom = ReadQuoted();
    SkipSpace();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    auto kind = ActionKindFromName(text_.substr(start, pos_ - start));
    if (!kind) Fail("unknown action kind");
    node.kind = *kind;
    node.children.push_back(ReadNode());
    node.children.push_back(ReadNode());
    SkipSpace();
    Expect(')');
    return node;
  }

  void ExpectEnd() {
    SkipSpace();
    if (pos_ != text_.size()) Fail("trailing characters after tree");
  }

 private:
  Parsed ReadLeaf() {
    Expect('[');
    if (pos_ >= text_.size()) Fail("truncated leaf");
    Parsed leaf;
    leaf.leaf = true;
    leaf.token = text_[pos_++];
    Expect('@');
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) Fail("missing leaf index");
    leaf.index = std::stoul(std::string(text_.substr(start, pos_ - start)));
    Expect(']');
    return leaf;
  }

  std::string ReadQuoted() {
    Expect('\'');
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) Fail("unterminated atom");
      char c = text_[pos_++];
      if (c == '\'') break;
      if (c == '\\') {
        if (pos_ >= text_.size()) Fail("dangling escape");
        c = text_[pos_++];
      }
      out.push_back(c);
    }
    if (out.empty()) Fail("empty atom");
    return out;
  }

  void SkipSpace() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  void Expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) {
      Fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw ParseError("tree text, offset " + std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void CollectLeaves(const TreeReader::Parsed& node,
                   std::vector<const TreeReader::Parsed*>& leaves) {
  if (node.leaf) {
    leaves.push_back(&node);
    return;
  }
  for (const auto& child : node.children) CollectLeaves(child, leaves);
}

int Rebuild(const TreeReader::Parsed& node, ParseTree& tree) {
  if (node.leaf) return static_cast<int>(node.index);
  int left = Rebuild(node.children[0], tree);
  int right = Rebuild(node.children[1], tree);
  int id = tree.Merge(left, right, node.kind);
  if (tree.node(id).atom != node.atom) {
    throw ParseError("tree text: atom '" + node.atom +
                     "' does not match its merge");
  }
  return id;
}

bool SubtreesEqual(const ParseTree& a, int x, const ParseTree& b, int y) {
  const auto& nx = a.node(x);
  const auto& ny = b.node(y);
  if (nx.is_leaf() != ny.is_leaf()) return false;
  if (nx.is_leaf()) return nx.begin == ny.begin && nx.atom == ny.atom;
  return nx.kind == ny.kind && nx.atom == ny.atom &&
         SubtreesEqual(a, nx.left, b, ny.left) &&
         SubtreesEqual(a, nx.right, b, ny.right);
}

}  // namespace

std::string_view ActionKindName(ActionKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<ActionKind> ActionKindFromName(std::string_view name) {
  for (std::size_t i = 0; i < kNumActionKinds; ++i) {
    if (kKindNames[i] == name) return static_cast<ActionKind>(i);
  }
  return std::nullopt;
}

std::string MergeSemantics(ActionKind kind, std::string_view left,
                           std::string_view right) {
  switch (kind) {
    case ActionKind::kRegular:
      return std::string(left) + std::string(right);
    case ActionKind::kAnchoredLeft:
      return std::string(left);
    case ActionKind::kAnchoredRight:
      return std::string(right);
    case ActionKind::kSubgrammarLeft:
      return std::string(left) + kSubgrammarSymbol;
    case ActionKind::kSubgrammarRight:
      return kSubgrammarSymbol + std::string(right);
  }
  return {};
}

ParseTree::ParseTree(std::string_view sentence) : sentence_(sentence) {
  nodes_.reserve(2 * sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    Node leaf;
    leaf.atom = std::string(1, sentence[i]);
    leaf.begin = i;
    leaf.end = i + 1;
    nodes_.push_back(std::move(leaf));
  }
}

int ParseTree::Merge(int left, int right, ActionKind kind) {
  const int n = static_cast<int>(nodes_.size());
  if (left < 0 || right < 0 || left >= n || right >= n) {
    throw std::invalid_argument("Merge: node id out of range");
  }
  Node& l = nodes_[static_cast<std::size_t>(left)];
  Node& r = nodes_[static_cast<std::size_t>(right)];
  if (l.parent >= 0 || r.parent >= 0) {
    throw std::invalid_argument("Merge: node already has a parent");
  }
  if (l.end != r.begin) {
    throw std::invalid_argument("Merge: nodes are not adjacent");
  }
  Node merged;
  merged.atom = MergeSemantics(kind, l.atom, r.atom);
  merged.kind = kind;
  merged.left = left;
  merged.right = right;
  merged.begin = l.begin;
  merged.end = r.end;
  l.parent = n;
  r.parent = n;
  nodes_.push_back(std::move(merged));
  return n;
}

std::string ParseTree::ToText() const {
  std::string out;
  if (nodes_.empty()) return out;
  std::function<void(int)> emit = [&](int id) {
    const Node& n = node(id);
    if (n.is_leaf()) {
      out += '[';
      out += n.atom;
      out += '@';
      out += std::to_string(n.begin);
      out += ']';
      return;
    }
    out += '(';
    AppendQuoted(out, n.atom);
    out += ' ';
    out += ActionKindName(n.kind);
    out += ' ';
    emit(n.left);
    out += ' ';
    emit(n.right);
    out += ')';
  };
  emit(root());
  return out;
}

ParseTree ParseTree::FromText(std::string_view text) {
  TreeReader reader(text);
  auto parsed = reader.ReadNode();
  reader.ExpectEnd();
  std::vector<const TreeReader::Parsed*> leaves;
  CollectLeaves(parsed, leaves);
  Sentence sentence;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i]->index != i) throw ParseError("tree text: leaf indices out of order");
    sentence.push_back(leaves[i]->token);
  }
  ParseTree tree(sentence);
  Rebuild(parsed, tree);
  return tree;
}

bool operator==(const ParseTree& a, const ParseTree& b) {
  if (a.sentence_ != b.sentence_ || a.nodes_.size() != b.nodes_.size()) {
    return false;
  }
  if (a.nodes_.empty()) return true;
  return SubtreesEqual(a, a.root(), b, b.root());
}

std::string ValidateTree(const ParseTree& tree) {
  const std::size_t n = tree.num_tokens();
  if (n == 0) return "empty sentence";
  if (!tree.complete()) {
    return "expected " + std::to_string(n - 1) + " internal nodes, found " +
           std::to_string(tree.num_internal());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& leaf = tree.node(static_cast<int>(i));
    if (!leaf.is_leaf() || leaf.begin != i || leaf.end != i + 1 ||
        leaf.atom.size() != 1 || leaf.atom[0] != tree.sentence()[i]) {
      return "leaf " + std::to_string(i) + " out of order";
    }
  }
  for (std::size_t id = n; id < tree.size(); ++id) {
    const auto& node = tree.node(static_cast<int>(id));
    if (node.is_leaf()) return "internal node without children";
    const auto& l = tree.node(node.left);
    const auto& r = tree.node(node.right);
    if (l.end != r.begin || node.begin != l.begin || node.end != r.end) {
      return "node " + std::to_string(id) + " merges non-adjacent spans";
    }
    if (node.atom.empty() || node.atom != MergeSemantics(node.kind, l.atom, r.atom)) {
      return "node " + std::to_string(id) + " atom inconsistent with merge";
    }
    if ((static_cast<int>(id) == tree.root()) != (node.parent < 0)) {
      return "node " + std::to_string(id) + " has a bad parent link";
    }
  }
  const auto& root = tree.node(tree.root());
  if (root.begin != 0 || root.end != n) return "root does not span the sentence";
  return {};
}

ParseState::ParseState(std::string_view sentence, const Policy& policy)
    : policy_(&policy), tree_(sentence) {
  frontier_.resize(sentence.size());
  for (std::size_t i = 0; i < frontier_.size(); ++i) {
    frontier_[i] = static_cast<int>(i);
  }
  if (frontier_.size() > 1) {
    scores_.resize((frontier_.size() - 1) * kNumActionKinds);
    for (std::size_t i = 0; i + 1 < frontier_.size(); ++i) ScorePair(i);
  }
}

const std::string& ParseState::atom(std::size_t pos) const {
  return tree_.node(frontier_[pos]).atom;
}

void ParseState::ScorePair(std::size_t index) {
  const std::string& left = atom(index);
  const std::string& right = atom(index + 1);
  for (std::size_t k = 0; k < kNumActionKinds; ++k) {
    scores_[index * kNumActionKinds + k] =
        policy_->Score(left, right, static_cast<ActionKind>(k));
  }
}

MergeAction ParseState::BestAction() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores_.size(); ++i) {
    if (scores_[i] > scores_[best]) best = i;
  }
  return {static_cast<ActionKind>(best % kNumActionKinds),
          best / kNumActionKinds};
}

MergeAction ParseState::SampleAction(std::mt19937_64& rng,
                                     double temperature) const {
  const double top = *std::max_element(scores_.begin(), scores_.end());
  std::vector<double> weights(scores_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    weights[i] = std::exp((scores_[i] - top) / temperature);
    total += weights[i];
  }
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  std::size_t pick = scores_.size() - 1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) {
      pick = i;
      break;
    }
    u -= weights[i];
  }
  return {static_cast<ActionKind>(pick % kNumActionKinds),
          pick / kNumActionKinds};
}

void ParseState::Apply(MergeAction action) {
  if (action.index + 1 >= frontier_.size()) {
    throw std::out_of_range("ParseState::Apply: index out of range");
  }
  const std::size_t i = action.index;
  const int merged = tree_.Merge(frontier_[i], frontier_[i + 1], action.kind);
  frontier_[i] = merged;
  frontier_.erase(frontier_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
  const auto pair_begin =
      scores_.begin() + static_cast<std::ptrdiff_t>(i * kNumActionKinds);
  scores_.erase(pair_begin, pair_begin + kNumActionKinds);
  if (i > 0) ScorePair(i - 1);
  if (i + 1 < frontier_.size()) ScorePair(i);
}

ParseTree Parse(std::string_view sentence, const Policy& policy) {
  ParseState state(sentence, policy);
  while (!state.done()) state.Apply(state.BestAction());
  return std::move(state).Release();
}

ParseTree ParseSampled(std::string_view sentence, const Policy& policy,
                       std::mt19937_64& rng, double temperature) {
  ParseState state(sentence, policy);
  while (!state.done()) state.Apply(state.SampleAction(rng, temperature));
  return std::move(state).Release();
}

}  // namespace grex
