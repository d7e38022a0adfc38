#include "grex/simplify.h"

#include <algorithm>

#include "json.hpp"

namespace grex {

std::string_view CoverageModeName(CoverageMode mode) {
  return mode == CoverageMode::kTopological ? "topological" : "symbolic";
}

std::optional<CoverageMode> CoverageModeFromName(std::string_view name) {
  if (name == "topological") return CoverageMode::kTopological;
  if (name == "symbolic") return CoverageMode::kSymbolic;
  return std::nullopt;
}

std::set<char> CoveredSymbols(const GrammarModel& model) {
  // Only leaves and anchored collapses of leaves carry one-symbol labels.
  std::set<char> symbols;
  for (const auto& [rule, count] : model.rules) {
    if (rule.rhs_left.size() == 1) symbols.insert(rule.rhs_left[0]);
    if (rule.rhs_right.size() == 1) symbols.insert(rule.rhs_right[0]);
  }
  return symbols;
}

std::vector<bool> CoveredTokens(const ParseTree& tree, const GrammarModel& model,
                                CoverageMode mode) {
  std::vector<bool> covered(tree.num_tokens(), false);
  if (mode == CoverageMode::kSymbolic) {
    const auto symbols = CoveredSymbols(model);
    for (std::size_t i = 0; i < covered.size(); ++i) {
      covered[i] = symbols.contains(tree.sentence()[i]);
    }
    return covered;
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    const int parent = tree.node(static_cast<int>(i)).parent;
    covered[i] = parent >= 0 && model.rules.contains(RuleAt(tree, parent));
  }
  return covered;
}

SimplifiedSentence SimplifySentence(std::string_view s,
                                    const std::vector<bool>& covered) {
  SimplifiedSentence out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (covered[i]) {
      out.tokens.push_back(s[i++]);
      continue;
    }
    const std::size_t begin = i;
    while (i < s.size() && !covered[i]) ++i;
    out.spans.push_back({out.tokens.size(), begin, i});
    out.tokens.push_back(kHighEntropySymbol);
  }
  return out;
}

Sentence ExpandSimplified(const SimplifiedSentence& simplified,
                          std::string_view original) {
  Sentence out;
  auto span = simplified.spans.begin();
  for (std::size_t i = 0; i < simplified.tokens.size(); ++i) {
    if (span != simplified.spans.end() && span->amp_index == i) {
      out.append(original.substr(span->begin, span->end - span->begin));
      ++span;
    } else {
      out.push_back(simplified.tokens[i]);
    }
  }
  return out;
}

std::vector<std::size_t> ExpandIndices(const SimplifiedSentence& simplified,
                                       std::span<const std::size_t> indices) {
  // Original index of each simplified token, and the span it stands for.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  ranges.reserve(simplified.tokens.size());
  std::size_t original = 0;
  auto span = simplified.spans.begin();
  for (std::size_t i = 0; i < simplified.tokens.size(); ++i) {
    if (span != simplified.spans.end() && span->amp_index == i) {
      ranges.emplace_back(span->begin, span->end);
      original = span->end;
      ++span;
    } else {
      ranges.emplace_back(original, original + 1);
      ++original;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t idx : indices) {
    if (idx >= ranges.size()) continue;
    for (std::size_t j = ranges[idx].first; j < ranges[idx].second; ++j) out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string SpanRecord(std::size_t line_no, const AmpSpan& span) {
  nlohmann::ordered_json j;
  j["line_no"] = line_no;
  j["amp_index"] = span.amp_index;
  j["start"] = span.begin;
  j["end"] = span.end;
  return j.dump();
}

std::vector<ParseTree> ParseAll(std::span<const Sentence> sentences,
                                const Policy& policy) {
  std::vector<ParseTree> trees;
  trees.reserve(sentences.size());
  for (const auto& s : sentences) trees.push_back(Parse(s, policy));
  return trees;
}

PassArtifacts TrainAndExtract(std::span<const Sentence> train,
                              std::span<const Sentence> extract,
                              const TrainConfig& cfg) {
  PassArtifacts out{Train(train, cfg), {}};
  out.model = BuildModel(ParseAll(extract, out.policy));
  return out;
}

Simplifier::Simplifier(const Policy& policy, GrammarModel filtered_model,
                       CoverageMode mode)
    : policy_(&policy),
      model_(std::move(filtered_model)),
      mode_(mode),
      symbols_(CoveredSymbols(model_)) {}

SimplifiedSentence Simplifier::Simplify(std::string_view s) const {
  if (mode_ == CoverageMode::kSymbolic) {
    std::vector<bool> covered(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) covered[i] = symbols_.contains(s[i]);
    return SimplifySentence(s, covered);
  }
  return SimplifySentence(s, CoveredTokens(Parse(s, *policy_), model_, mode_));
}

std::vector<SimplifiedSentence> Simplifier::SimplifyAll(
    std::span<const Sentence> sentences) const {
  std::vector<SimplifiedSentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(Simplify(s));
  return out;
}

std::vector<Sentence> TokensOf(std::span<const SimplifiedSentence> sentences) {
  std::vector<Sentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.tokens);
  return out;
}

TwoPassResult RunTwoPass(const DatasetSplit& split,
                         std::span<const Sentence> anomalous,
                         const TwoPassConfig& cfg) {
  TwoPassResult result;
  result.first = TrainAndExtract(split.train, split.extract, cfg.first_pass);
  result.first.model = FilterByFrequency(result.first.model, cfg.frequency_threshold);

  const Simplifier simplifier(result.first.policy, result.first.model, cfg.coverage);
  auto& simple = result.simplified;
  simple.train = simplifier.SimplifyAll(split.train);
  simple.extract = simplifier.SimplifyAll(split.extract);
  simple.validate = simplifier.SimplifyAll(split.validate);
  simple.evaluate_nominal = simplifier.SimplifyAll(split.evaluate_nominal);
  simple.evaluate_anomalous = simplifier.SimplifyAll(anomalous);

  result.second = TrainAndExtract(TokensOf(simple.train), TokensOf(simple.extract),
                                  cfg.second_pass);
  auto classify = [&](const std::vector<SimplifiedSentence>& sentences) {
    std::vector<Verdict> verdicts;
    verdicts.reserve(sentences.size());
    for (const auto& s : sentences) {
      verdicts.push_back(Detect(s.tokens, result.second.policy,
                                result.second.model, cfg.detect));
    }
    return verdicts;
  };
  result.validation = classify(simple.validate);
  result.evaluate_nominal = classify(simple.evaluate_nominal);
  result.evaluate_anomalous = classify(simple.evaluate_anomalous);
  return result;
}

}  // namespace grex
