#ifndef GREX_PARSE_TREE_H_
#define GREX_PARSE_TREE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace grex {

// Wildcard symbol introduced by subgrammar merges. Never produced by a
// format generator.
inline constexpr char kSubgrammarSymbol = 'G';
// Replaces a maximal run of high-entropy tokens during simplification.
inline constexpr char kHighEntropySymbol = '&';

// A sentence is a sequence of single-character tokens.
using Sentence = std::string;

enum class ActionKind : std::uint8_t {
  kRegular = 0,
  kAnchoredLeft = 1,
  kAnchoredRight = 2,
  kSubgrammarLeft = 3,
  kSubgrammarRight = 4,
};

inline constexpr std::size_t kNumActionKinds = 5;
inline constexpr std::array<ActionKind, kNumActionKinds> kAllActionKinds = {
    ActionKind::kRegular, ActionKind::kAnchoredLeft, ActionKind::kAnchoredRight,
    ActionKind::kSubgrammarLeft, ActionKind::kSubgrammarRight};

std::string_view ActionKindName(ActionKind kind);
std::optional<ActionKind> ActionKindFromName(std::string_view name);

inline bool IsAnchored(ActionKind kind) {
  return kind == ActionKind::kAnchoredLeft ||
         kind == ActionKind::kAnchoredRight;
}

// Label of the atom produced by merging `left` and `right` with `kind`:
//   Regular          -> left + right
//   AnchoredLeft     -> left
//   AnchoredRight    -> right
//   SubgrammarLeft   -> left + 'G'
//   SubgrammarRight  -> 'G' + right
std::string MergeSemantics(ActionKind kind, std::string_view left,
                           std::string_view right);

// Merge `kind` applied to atoms `index` and `index + 1` of the current atom
// sequence.
struct MergeAction {
  ActionKind kind = ActionKind::kRegular;
  std::size_t index = 0;

  friend bool operator==(const MergeAction&, const MergeAction&) = default;
};

// Binary parse tree stored as an arena. Nodes [0, N) are the leaves in
// sentence order; internal nodes follow in the order they were merged, so the
// last node is the root once the parse is complete.
class ParseTree {
 public:
  struct Node {
    std::string atom;
    ActionKind kind = ActionKind::kRegular;  // unused for leaves
    int left = -1;
    int right = -1;
    int parent = -1;
    // Covered token range [begin, end).
    std::size_t begin = 0;
    std::size_t end = 0;

    bool is_leaf() const { return left < 0; }
  };

  ParseTree() = default;
  explicit ParseTree(std::string_view sentence);

  // Appends the internal node produced by merging two adjacent, parentless
  // nodes. Returns the id of the new node. Throws std::invalid_argument when
  // the nodes are not adjacent roots.
  int Merge(int left, int right, ActionKind kind);

  const Sentence& sentence() const { return sentence_; }
  std::size_t num_tokens() const { return sentence_.size(); }
  std::size_t num_internal() const { return nodes_.size() - sentence_.size(); }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::span<const Node> nodes() const { return nodes_; }

  // A tree is complete when it has exactly N - 1 internal nodes.
  bool complete() const { return num_internal() + 1 == num_tokens(); }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }

  // Parenthesized text form: internal nodes as (<'atom'> <Kind> <left>
  // <right>), leaves as [<token>@<index>].
  std::string ToText() const;
  static ParseTree FromText(std::string_view text);

  // Structural equality (independent of internal node order).
  friend bool operator==(const ParseTree& a, const ParseTree& b);

 private:
  Sentence sentence_;
  std::vector<Node> nodes_;
};

// Checks all tree invariants: completeness, leaf order, adjacency of merged
// spans, and that every internal atom equals MergeSemantics of its children.
// Returns an empty string when valid, else a description of the first
// violation.
std::string ValidateTree(const ParseTree& tree);

// Scores candidate merges from the labels of the two adjacent atoms. Every
// candidate gets a finite score, so parsing never gets stuck.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual double Score(std::string_view left, std::string_view right,
                       ActionKind kind) const = 0;
};

// Incremental parse state: the current atom sequence plus a cached score for
// every candidate action. Only the two pairs around a merge are rescored.
class ParseState {
 public:
  ParseState(std::string_view sentence, const Policy& policy);

  bool done() const { return frontier_.size() <= 1; }
  std::size_t atom_count() const { return frontier_.size(); }
  const std::string& atom(std::size_t pos) const;

  // Scores laid out as [index * kNumActionKinds + kind].
  std::span<const double> scores() const { return scores_; }

  // Highest-scoring action; ties go to the lowest index, then to the
  // earliest kind in ActionKind order.
  MergeAction BestAction() const;

  // Draws an action with probability proportional to exp(score / T).
  MergeAction SampleAction(std::mt19937_64& rng, double temperature) const;

  void Apply(MergeAction action);

  const ParseTree& tree() const { return tree_; }
  ParseTree Release() && { return std::move(tree_); }

 private:
  void ScorePair(std::size_t index);

  const Policy* policy_;
  ParseTree tree_;
  std::vector<int> frontier_;
  std::vector<double> scores_;
};

// Greedy parse: repeatedly applies BestAction until one atom remains.
ParseTree Parse(std::string_view sentence, const Policy& policy);

// Sampled parse (used for exploration during training).
ParseTree ParseSampled(std::string_view sentence, const Policy& policy,
                       std::mt19937_64& rng, double temperature = 1.0);

}  // namespace grex

#endif  // GREX_PARSE_TREE_H_
