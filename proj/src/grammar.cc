#include "grex/grammar.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "grex/errors.h"

namespace grex {
namespace {

std::vector<ActionKind> KindsMatching(std::string_view lhs, std::string_view left,
                                      std::string_view right) {
  std::vector<ActionKind> kinds;
  for (ActionKind kind : kAllActionKinds) {
    if (MergeSemantics(kind, left, right) == lhs) kinds.push_back(kind);
  }
  return kinds;
}

void AppendQuoted(std::string& out, std::string_view text) {
  out.push_back('\'');
  for (char c : text) {
    if (c == '\'' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('\'');
}

// Reader for rule and constraint notation.
class NotationReader {
 public:
  explicit NotationReader(std::string_view text) : text_(text) {}

  Rule ReadRule() {
    SkipSpace();
    bool is_start = false;
    if (Peek() == '-' && PeekAt(1) == '\'') {
      ++pos_;
      is_start = true;
    }
    Rule rule;
    rule.lhs = ReadQuoted();
    if (is_start) Expect('-');
    SkipSpace();
    Expect('-');
    Expect('>');
    SkipSpace();
    rule.rhs_left = ReadQuoted();
    SkipSpace();
    rule.rhs_right = ReadQuoted();
    rule.is_start = is_start;

    auto kinds = KindsMatching(rule.lhs, rule.rhs_left, rule.rhs_right);
    SkipSpace();
    if (Peek() == '@') {
      ++pos_;
      std::size_t start = pos_;
      while (std::isalpha(static_cast<unsigned char>(Peek()))) ++pos_;
      auto kind = ActionKindFromName(text_.substr(start, pos_ - start));
      if (!kind) Fail("unknown merge kind tag");
      if (std::find(kinds.begin(), kinds.end(), *kind) == kinds.end()) {
        Fail("merge kind tag contradicts the labels");
      }
      rule.kind = *kind;
    } else {
      if (kinds.empty()) Fail("labels match no merge kind");
      if (kinds.size() > 1) Fail("ambiguous merge kind needs an @ tag");
      rule.kind = kinds.front();
    }
    return rule;
  }

  Producer ReadProducer() {
    SkipSpace();
    // A producer is a rule if an arrow follows its first label.
    std::size_t save = pos_;
    if (Peek() == '-' && PeekAt(1) == '\'') return ReadRule();
    std::string label = ReadQuoted();
    SkipSpace();
    if (Peek() == '-' && PeekAt(1) == '>') {
      pos_ = save;
      return ReadRule();
    }
    if (label.size() != 1) Fail("token producer must be a single symbol");
    return Token{label[0]};
  }

  PrecedenceConstraint ReadConstraint() {
    SkipSpace();
    Expect('(');
    PrecedenceConstraint c;
    c.parent = ReadRule();
    SkipSpace();
    Expect('>');
    c.left = ReadProducer();
    SkipSpace();
    Expect('^');
    c.right = ReadProducer();
    SkipSpace();
    Expect(')');
    return c;
  }

  void ExpectEnd() {
    SkipSpace();
    if (pos_ != text_.size()) Fail("unexpected trailing text");
  }

 private:
  char Peek() const { return PeekAt(0); }
  char PeekAt(std::size_t k) const {
    return pos_ + k < text_.size() ? text_[pos_ + k] : '\0';
  }

  void SkipSpace() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  void Expect(char c) {
    if (Peek() != c || pos_ >= text_.size()) {
      Fail(std::string("expected '") + c + "'");
    }
    ++pos_;
  }

  std::string ReadQuoted() {
    Expect('\'');
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) Fail("unterminated label");
      char c = text_[pos_++];
      if (c == '\'') break;
      if (c == '\\') {
        if (pos_ >= text_.size()) Fail("dangling escape");
        c = text_[pos_++];
      }
      out.push_back(c);
    }
    if (out.empty()) Fail("empty label");
    return out;
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw ParseError("'" + std::string(text_) + "' at offset " +
                     std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

bool References(const Producer& producer, const std::map<Rule, std::size_t>& rules) {
  const Rule* rule = std::get_if<Rule>(&producer);
  return rule == nullptr || rules.contains(*rule);
}

}  // namespace

std::size_t GrammarModel::total_rule_count() const {
  std::size_t total = 0;
  for (const auto& [rule, count] : rules) total += count;
  return total;
}

Rule RuleAt(const ParseTree& tree, int id) {
  const auto& node = tree.node(id);
  return Rule{node.atom, tree.node(node.left).atom, tree.node(node.right).atom,
              node.kind, id == tree.root()};
}

Producer ProducerAt(const ParseTree& tree, int id) {
  const auto& node = tree.node(id);
  if (node.is_leaf()) return Token{node.atom[0]};
  return RuleAt(tree, id);
}

PrecedenceConstraint ConstraintAt(const ParseTree& tree, int id) {
  const auto& node = tree.node(id);
  return PrecedenceConstraint{RuleAt(tree, id), ProducerAt(tree, node.left),
                              ProducerAt(tree, node.right)};
}

Extraction ExtractFromTree(const ParseTree& tree) {
  Extraction out;
  out.rules.reserve(tree.num_internal());
  out.constraints.reserve(tree.num_internal());
  for (std::size_t id = tree.num_tokens(); id < tree.size(); ++id) {
    out.rules.push_back(RuleAt(tree, static_cast<int>(id)));
    out.constraints.push_back(ConstraintAt(tree, static_cast<int>(id)));
  }
  return out;
}

void AddTree(GrammarModel& model, const ParseTree& tree) {
  auto extraction = ExtractFromTree(tree);
  for (auto& rule : extraction.rules) ++model.rules[std::move(rule)];
  for (auto& c : extraction.constraints) ++model.constraints[std::move(c)];
}

GrammarModel BuildModel(std::span<const ParseTree> trees) {
  GrammarModel model;
  for (const auto& tree : trees) AddTree(model, tree);
  return model;
}

GrammarModel FilterByFrequency(const GrammarModel& model, std::size_t threshold) {
  GrammarModel out;
  for (const auto& [rule, count] : model.rules) {
    if (count >= threshold) out.rules.emplace(rule, count);
  }
  for (const auto& [c, count] : model.constraints) {
    if (out.rules.contains(c.parent) && References(c.left, out.rules) &&
        References(c.right, out.rules)) {
      out.constraints.emplace(c, count);
    }
  }
  return out;
}

std::string RuleToText(const Rule& rule) {
  std::string out;
  if (rule.is_start) out.push_back('-');
  AppendQuoted(out, rule.lhs);
  if (rule.is_start) out.push_back('-');
  out += " -> ";
  AppendQuoted(out, rule.rhs_left);
  out.push_back(' ');
  AppendQuoted(out, rule.rhs_right);
  if (KindsMatching(rule.lhs, rule.rhs_left, rule.rhs_right).size() != 1) {
    out += " @";
    out += ActionKindName(rule.kind);
  }
  return out;
}

std::string ProducerToText(const Producer& producer) {
  if (const Rule* rule = std::get_if<Rule>(&producer)) return RuleToText(*rule);
  std::string out;
  AppendQuoted(out, std::string_view(&std::get<Token>(producer).symbol, 1));
  return out;
}

std::string ConstraintToText(const PrecedenceConstraint& c) {
  return "( " + RuleToText(c.parent) + " > " + ProducerToText(c.left) + " ^ " +
         ProducerToText(c.right) + " )";
}

Rule RuleFromText(std::string_view text) {
  NotationReader reader(text);
  Rule rule = reader.ReadRule();
  reader.ExpectEnd();
  return rule;
}

PrecedenceConstraint ConstraintFromText(std::string_view text) {
  NotationReader reader(text);
  auto c = reader.ReadConstraint();
  reader.ExpectEnd();
  return c;
}

std::string ModelToText(const GrammarModel& model) {
  std::string out;
  for (const auto& [rule, count] : model.rules) {
    out += std::to_string(count) + '\t' + RuleToText(rule) + '\n';
  }
  for (const auto& [c, count] : model.constraints) {
    out += std::to_string(count) + '\t' + ConstraintToText(c) + '\n';
  }
  return out;
}

GrammarModel ModelFromText(std::string_view text) {
  GrammarModel model;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw ParseError("model line " + std::to_string(line_no) +
                       ": expected count<TAB>item");
    }
    std::size_t count = 0;
    for (char c : line.substr(0, tab)) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw ParseError("model line " + std::to_string(line_no) + ": bad count");
      }
      count = count * 10 + static_cast<std::size_t>(c - '0');
    }
    std::string_view item = line.substr(tab + 1);
    try {
      if (!item.empty() && item.front() == '(') {
        model.constraints[ConstraintFromText(item)] += count;
      } else {
        model.rules[RuleFromText(item)] += count;
      }
    } catch (const ParseError& e) {
      throw ParseError("model line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return model;
}

void WriteModel(const std::string& path, const GrammarModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << ModelToText(model);
  if (!out) throw IoError("write failed: " + path);
}

GrammarModel ReadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ModelFromText(buffer.str());
}

std::string ModelToGraph(const GrammarModel& model) {
  auto unstarted = [](Rule r) {
    r.is_start = false;
    return r;
  };
  std::map<Rule, std::size_t> ids;
  for (const auto& [rule, count] : model.rules) {
    ids.emplace(unstarted(rule), ids.size());
  }
  std::string out;
  for (const auto& [rule, id] : ids) {
    out += "node " + std::to_string(id) + ' ' + RuleToText(rule) + '\n';
  }
  std::set<std::tuple<std::size_t, std::size_t, int>> edges;
  for (const auto& [c, count] : model.constraints) {
    auto parent = ids.find(unstarted(c.parent));
    if (parent == ids.end()) continue;
    int side = 0;
    for (const Producer* p : {&c.left, &c.right}) {
      if (const Rule* rule = std::get_if<Rule>(p)) {
        auto it = ids.find(unstarted(*rule));
        if (it != ids.end()) edges.emplace(parent->second, it->second, side);
      }
      ++side;
    }
  }
  for (const auto& edge : edges) {
    const auto& [parent, child, side] = edge;
    out += "edge " + std::to_string(parent) + ' ' + std::to_string(child) +
           (side == 0 ? " left\n" : " right\n");
  }
  return out;
}

}  // namespace grex
