#ifndef GREX_ANOMALY_H_
#define GREX_ANOMALY_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grex/corpus.h"
#include "grex/grammar.h"
#include "grex/parse_tree.h"

namespace grex {

enum class Label { kNominal, kAnomalous };

std::string_view LabelName(Label label);

// Which tokens a flagged node covers.
enum class Coverage {
  kChildren,     // leaves that are direct children of the node
  kDescendants,  // every leaf below the node
};

struct DetectOptions {
  bool use_constraints = true;
  Coverage coverage = Coverage::kChildren;
};

struct Verdict {
  Label label = Label::kNominal;
  // Distinct offending items, in tree node order.
  std::vector<Rule> unexpected_rules;
  std::vector<PrecedenceConstraint> violated_constraints;
  // Sorted token indices covered by offending nodes.
  std::vector<std::size_t> flagged_token_indices;
  std::size_t token_count = 0;
};

// Parses `s` greedily with `policy` and compares its rules (and, optionally,
// precedence constraints) against `model`. A sentence is nominal iff nothing
// is missing from the model.
Verdict Detect(std::string_view s, const Policy& policy,
               const GrammarModel& model, const DetectOptions& options = {});
Verdict DetectTree(const ParseTree& tree, const GrammarModel& model,
                   const DetectOptions& options = {});

// Tokens covered by the nodes whose rule is in `unexpected_rules` or whose
// constraint is in `violated_constraints`.
std::vector<std::size_t> Localize(
    const ParseTree& tree, std::span<const Rule> unexpected_rules,
    std::span<const PrecedenceConstraint> violated_constraints,
    Coverage coverage = Coverage::kChildren);

// Tokens covered by the given internal nodes.
std::vector<std::size_t> CoveredByNodes(const ParseTree& tree,
                                        std::span<const int> nodes,
                                        Coverage coverage);

// True if `flags` hit the anomaly: the inserted token itself, or a token next
// to the deletion gap (both neighbors, clipped to the corrupted sentence).
bool IsLocalized(std::span<const std::size_t> flags, const AnomalySpec& spec,
                 std::size_t corrupted_length);

struct LocalizationMetrics {
  // Fraction of sentences whose anomaly was localized.
  double rate = 0.0;
  // Mean fraction of flagged tokens among localized sentences (0 if none).
  double ratio = 0.0;
  std::size_t localized = 0;
  std::size_t total = 0;
};

// Throws LengthMismatch when the lists differ in length.
LocalizationMetrics ComputeLocalizationMetrics(std::span<const Verdict> verdicts,
                                               std::span<const AnomalySpec> specs);

// JSON-lines verdict record: {sentence, label, unexpected_rule_count,
// violated_constraint_count, reasons, flagged_indices[, unexpected_rules,
// violated_constraints]}.
std::string VerdictRecord(std::string_view sentence, const Verdict& verdict,
                          bool verbose = false);

}  // namespace grex

#endif  // GREX_ANOMALY_H_
