#include "grex/anomaly.h"

#include <algorithm>
#include <set>

#include "grex/errors.h"
#include "json.hpp"

namespace grex {
namespace {

void CollectLeaves(const ParseTree& tree, int id, std::set<std::size_t>& out) {
  const auto& node = tree.node(id);
  for (std::size_t i = node.begin; i < node.end; ++i) out.insert(i);
}

}  // namespace

std::string_view LabelName(Label label) {
  return label == Label::kNominal ? "nominal" : "anomalous";
}

std::vector<std::size_t> CoveredByNodes(const ParseTree& tree,
                                        std::span<const int> nodes,
                                        Coverage coverage) {
  std::set<std::size_t> flags;
  for (int id : nodes) {
    const auto& node = tree.node(id);
    if (node.is_leaf()) continue;
    if (coverage == Coverage::kDescendants) {
      CollectLeaves(tree, id, flags);
      continue;
    }
    for (int child : {node.left, node.right}) {
      const auto& c = tree.node(child);
      if (c.is_leaf()) flags.insert(c.begin);
    }
  }
  return {flags.begin(), flags.end()};
}

std::vector<std::size_t> Localize(
    const ParseTree& tree, std::span<const Rule> unexpected_rules,
    std::span<const PrecedenceConstraint> violated_constraints,
    Coverage coverage) {
  const std::set<Rule> rules(unexpected_rules.begin(), unexpected_rules.end());
  const std::set<PrecedenceConstraint> constraints(violated_constraints.begin(),
                                                   violated_constraints.end());
  std::vector<int> nodes;
  for (std::size_t id = tree.num_tokens(); id < tree.size(); ++id) {
    const int node = static_cast<int>(id);
    if (rules.contains(RuleAt(tree, node)) ||
        (!constraints.empty() && constraints.contains(ConstraintAt(tree, node)))) {
      nodes.push_back(node);
    }
  }
  return CoveredByNodes(tree, nodes, coverage);
}

Verdict DetectTree(const ParseTree& tree, const GrammarModel& model,
                   const DetectOptions& options) {
  Verdict verdict;
  verdict.token_count = tree.num_tokens();
  std::set<Rule> seen_rules;
  std::set<PrecedenceConstraint> seen_constraints;
  std::vector<int> offending;
  for (std::size_t id = tree.num_tokens(); id < tree.size(); ++id) {
    const int node = static_cast<int>(id);
    bool bad = false;
    Rule rule = RuleAt(tree, node);
    if (!model.rules.contains(rule)) {
      bad = true;
      if (seen_rules.insert(rule).second) {
        verdict.unexpected_rules.push_back(std::move(rule));
      }
    }
    if (options.use_constraints) {
      PrecedenceConstraint c = ConstraintAt(tree, node);
      if (!model.constraints.contains(c)) {
        bad = true;
        if (seen_constraints.insert(c).second) {
          verdict.violated_constraints.push_back(std::move(c));
        }
      }
    }
    if (bad) offending.push_back(node);
  }
  const bool anomalous =
      !verdict.unexpected_rules.empty() || !verdict.violated_constraints.empty();
  verdict.label = anomalous ? Label::kAnomalous : Label::kNominal;
  verdict.flagged_token_indices = CoveredByNodes(tree, offending, options.coverage);
  return verdict;
}

Verdict Detect(std::string_view s, const Policy& policy,
               const GrammarModel& model, const DetectOptions& options) {
  return DetectTree(Parse(s, policy), model, options);
}

bool IsLocalized(std::span<const std::size_t> flags, const AnomalySpec& spec,
                 std::size_t corrupted_length) {
  auto has = [&](std::size_t i) {
    return std::find(flags.begin(), flags.end(), i) != flags.end();
  };
  if (spec.kind == AnomalyKind::kInsertLetter) return has(spec.position);
  // The gap sits between corrupted indices position - 1 and position.
  if (spec.position > 0 && has(spec.position - 1)) return true;
  return spec.position < corrupted_length && has(spec.position);
}

LocalizationMetrics ComputeLocalizationMetrics(std::span<const Verdict> verdicts,
                                               std::span<const AnomalySpec> specs) {
  if (verdicts.size() != specs.size()) {
    throw LengthMismatch("localization metrics: " + std::to_string(verdicts.size()) +
                         " verdicts vs " + std::to_string(specs.size()) + " specs");
  }
  LocalizationMetrics m;
  m.total = verdicts.size();
  double ratio_sum = 0.0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    if (!IsLocalized(v.flagged_token_indices, specs[i], v.token_count)) continue;
    ++m.localized;
    ratio_sum += static_cast<double>(v.flagged_token_indices.size()) /
                 static_cast<double>(v.token_count);
  }
  if (m.total > 0) m.rate = static_cast<double>(m.localized) / static_cast<double>(m.total);
  if (m.localized > 0) m.ratio = ratio_sum / static_cast<double>(m.localized);
  return m;
}

std::string VerdictRecord(std::string_view sentence, const Verdict& verdict,
                          bool verbose) {
  nlohmann::ordered_json j;
  j["sentence"] = sentence;
  j["label"] = LabelName(verdict.label);
  j["unexpected_rule_count"] = verdict.unexpected_rules.size();
  j["violated_constraint_count"] = verdict.violated_constraints.size();
  auto reasons = nlohmann::json::array();
  const bool start = std::any_of(verdict.unexpected_rules.begin(),
                                 verdict.unexpected_rules.end(),
                                 [](const Rule& r) { return r.is_start; });
  const bool other = std::any_of(verdict.unexpected_rules.begin(),
                                 verdict.unexpected_rules.end(),
                                 [](const Rule& r) { return !r.is_start; });
  if (start) reasons.push_back("start-rule");
  if (other) reasons.push_back("rule");
  // Constraints whose own rules are all known; the rest merely echo an
  // unexpected rule.
  const bool ordering = std::any_of(
      verdict.violated_constraints.begin(), verdict.violated_constraints.end(),
      [&](const PrecedenceConstraint& c) {
        auto unexpected = [&](const Producer& p) {
          const Rule* r = std::get_if<Rule>(&p);
          return r != nullptr &&
                 std::find(verdict.unexpected_rules.begin(),
                           verdict.unexpected_rules.end(),
                           *r) != verdict.unexpected_rules.end();
        };
        return !unexpected(Producer(c.parent)) && !unexpected(c.left) &&
               !unexpected(c.right);
      });
  if (ordering) reasons.push_back("constraint");
  j["reasons"] = reasons;
  j["flagged_indices"] = verdict.flagged_token_indices;
  if (verbose) {
    auto rules = nlohmann::json::array();
    for (const auto& r : verdict.unexpected_rules) rules.push_back(RuleToText(r));
    auto constraints = nlohmann::json::array();
    for (const auto& c : verdict.violated_constraints) {
      constraints.push_back(ConstraintToText(c));
    }
    j["unexpected_rules"] = rules;
    j["violated_constraints"] = constraints;
  }
  return j.dump();
}

}  // namespace grex
