#ifndef GREX_SIMPLIFY_H_
#define GREX_SIMPLIFY_H_

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grex/anomaly.h"
#include "grex/corpus.h"
#include "grex/grammar.h"
#include "grex/policy_training.h"

namespace grex {

enum class CoverageMode {
  // A token is covered when the node directly above it applies a retained
  // rule.
  kTopological,
  // A token is covered when its symbol is a token on the right side of any
  // retained rule, wherever it occurs.
  kSymbolic,
};

std::string_view CoverageModeName(CoverageMode mode);  // topological, symbolic
std::optional<CoverageMode> CoverageModeFromName(std::string_view name);

// Symbols appearing as single-token right-hand sides of rules in `model`.
std::set<char> CoveredSymbols(const GrammarModel& model);

// Per-token coverage of `tree` under a frequency-filtered model.
std::vector<bool> CoveredTokens(const ParseTree& tree, const GrammarModel& model,
                                CoverageMode mode);

// Original token range [begin, end) replaced by the '&' at `amp_index`.
struct AmpSpan {
  std::size_t amp_index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const AmpSpan&, const AmpSpan&) = default;
};

struct SimplifiedSentence {
  Sentence tokens;
  std::vector<AmpSpan> spans;  // ordered by amp_index
};

// Collapses every maximal run of uncovered tokens into one '&'.
SimplifiedSentence SimplifySentence(std::string_view s,
                                    const std::vector<bool>& covered);

// Inverse of SimplifySentence given the original sentence.
Sentence ExpandSimplified(const SimplifiedSentence& simplified,
                          std::string_view original);

// Maps token indices of the simplified sentence to the original indices they
// stand for ('&' expands to its whole range).
std::vector<std::size_t> ExpandIndices(const SimplifiedSentence& simplified,
                                       std::span<const std::size_t> indices);

// Span-map sidecar line: {"line_no", "amp_index", "start", "end"}.
std::string SpanRecord(std::size_t line_no, const AmpSpan& span);

// Policy plus model learned by one pass of train-then-extract.
struct PassArtifacts {
  TabularPolicy policy;
  GrammarModel model;
};

std::vector<ParseTree> ParseAll(std::span<const Sentence> sentences,
                                const Policy& policy);
PassArtifacts TrainAndExtract(std::span<const Sentence> train,
                              std::span<const Sentence> extract,
                              const TrainConfig& cfg);

// Parses with a first-pass policy and simplifies against its filtered model.
class Simplifier {
 public:
  Simplifier(const Policy& policy, GrammarModel filtered_model, CoverageMode mode);

  SimplifiedSentence Simplify(std::string_view s) const;
  std::vector<SimplifiedSentence> SimplifyAll(std::span<const Sentence> sentences) const;

  const GrammarModel& model() const { return model_; }

 private:
  const Policy* policy_;
  GrammarModel model_;
  CoverageMode mode_;
  std::set<char> symbols_;
};

struct TwoPassConfig {
  TrainConfig first_pass;
  TrainConfig second_pass;
  std::size_t frequency_threshold = 100;
  CoverageMode coverage = CoverageMode::kSymbolic;
  DetectOptions detect;
};

struct SimplifiedSplit {
  std::vector<SimplifiedSentence> train;
  std::vector<SimplifiedSentence> extract;
  std::vector<SimplifiedSentence> validate;
  std::vector<SimplifiedSentence> evaluate_nominal;
  std::vector<SimplifiedSentence> evaluate_anomalous;
};

std::vector<Sentence> TokensOf(std::span<const SimplifiedSentence> sentences);

struct TwoPassResult {
  PassArtifacts first;  // first.model is the filtered model
  SimplifiedSplit simplified;
  PassArtifacts second;
  std::vector<Verdict> validation;
  std::vector<Verdict> evaluate_nominal;
  std::vector<Verdict> evaluate_anomalous;
};

// Pass 1 trains on the raw training split, extracts and frequency-filters a
// model, and simplifies every split (plus the corrupted evaluation sentences
// `anomalous`). Pass 2 trains and extracts on the simplified sentences and
// classifies the simplified validation and evaluation sentences.
TwoPassResult RunTwoPass(const DatasetSplit& split,
                         std::span<const Sentence> anomalous,
                         const TwoPassConfig& cfg);

}  // namespace grex

#endif  // GREX_SIMPLIFY_H_
