#ifndef GREX_GRAMMAR_H_
#define GREX_GRAMMAR_H_

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "grex/parse_tree.h"

namespace grex {

// Production lhs -> rhs_left rhs_right, as applied by one merge. A rule seen
// at the root of a tree is a start rule; start and non-start rules with the
// same productions are different rules.
struct Rule {
  std::string lhs;
  std::string rhs_left;
  std::string rhs_right;
  ActionKind kind = ActionKind::kRegular;
  bool is_start = false;

  friend auto operator<=>(const Rule&, const Rule&) = default;
};

struct Token {
  char symbol = 0;

  friend auto operator<=>(const Token&, const Token&) = default;
};

// What fed one side of a merge: the rule of an internal child, or a leaf token.
using Producer = std::variant<Rule, Token>;

// (parent > left ^ right): a node using `parent` whose children were produced
// by `left` and `right`.
struct PrecedenceConstraint {
  Rule parent;
  Producer left;
  Producer right;

  friend auto operator<=>(const PrecedenceConstraint&,
                          const PrecedenceConstraint&) = default;
};

// Rules and constraints with occurrence counts.
struct GrammarModel {
  std::map<Rule, std::size_t> rules;
  std::map<PrecedenceConstraint, std::size_t> constraints;

  bool empty() const { return rules.empty() && constraints.empty(); }
  std::size_t total_rule_count() const;
  friend bool operator==(const GrammarModel&, const GrammarModel&) = default;
};

// Rule applied at internal node `id`.
Rule RuleAt(const ParseTree& tree, int id);
Producer ProducerAt(const ParseTree& tree, int id);
PrecedenceConstraint ConstraintAt(const ParseTree& tree, int id);

// Per-occurrence rules and constraints of a tree, one of each per internal
// node, in node order.
struct Extraction {
  std::vector<Rule> rules;
  std::vector<PrecedenceConstraint> constraints;
};

Extraction ExtractFromTree(const ParseTree& tree);

void AddTree(GrammarModel& model, const ParseTree& tree);
GrammarModel BuildModel(std::span<const ParseTree> trees);

// Drops rules seen fewer than `threshold` times, then every constraint that
// mentions a dropped rule.
GrammarModel FilterByFrequency(const GrammarModel& model, std::size_t threshold);

// Rule text in the usual notation: 'lhs' -> 'left' 'right', with the lhs of a
// start rule wrapped in hyphens: -'lhs'- -> 'left' 'right'. The labels almost
// always fix the merge kind; when they do not (e.g. 'a' -> 'a' 'a' is either
// anchored merge) the kind is appended as "@AnchoredLeft" and so on.
std::string RuleToText(const Rule& rule);
std::string ProducerToText(const Producer& producer);
// ( parent > left ^ right )
std::string ConstraintToText(const PrecedenceConstraint& constraint);

Rule RuleFromText(std::string_view text);
PrecedenceConstraint ConstraintFromText(std::string_view text);

// One item per line, "count<TAB>rule" or "count<TAB>( constraint )". Rules
// precede constraints. Throws ParseError on malformed input.
std::string ModelToText(const GrammarModel& model);
GrammarModel ModelFromText(std::string_view text);
void WriteModel(const std::string& path, const GrammarModel& model);
GrammarModel ReadModel(const std::string& path);

// Rule graph: one "node <id> <rule>" line per distinct production (start
// flags merged), then "edge <parent> <child> left|right" for each constraint
// whose producer on that side is a rule.
std::string ModelToGraph(const GrammarModel& model);

}  // namespace grex

#endif  // GREX_GRAMMAR_H_
