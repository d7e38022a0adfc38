#include "grex/simplify.h"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "grex/evalkit.h"
#include "testing.h"

namespace grex {
namespace {

std::vector<bool> RandomCoverage(std::mt19937_64& rng, std::size_t n) {
  std::vector<bool> covered(n);
  for (std::size_t i = 0; i < n; ++i) covered[i] = rng() % 3 != 0;
  return covered;
}

TEST(SimplifySentence, CollapsesUncoveredRuns) {
  const auto s = SimplifySentence("xy/ab zq", {false, false, true, true, true, true, false, false});
  EXPECT_EQ(s.tokens, "&/ab &");
  EXPECT_EQ(s.spans, (std::vector<AmpSpan>{{0, 0, 2}, {5, 6, 8}}));
  EXPECT_EQ(SimplifySentence("abc", {true, true, true}).tokens, "abc");
  EXPECT_EQ(SimplifySentence("abc", {false, false, false}).tokens, "&");
  EXPECT_EQ(SimplifySentence("", {}).tokens, "");
}

TEST(SimplifySentence, RandomRoundTrip) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto s = testing::RandomSentence(rng, rng() % 40, "{}abc/ ");
    const auto covered = RandomCoverage(rng, s.size());
    const SimplifiedSentence simple = SimplifySentence(s, covered);
    ASSERT_EQ(ExpandSimplified(simple, s), s);
    std::size_t kept = 0;
    for (bool c : covered) kept += c;
    EXPECT_EQ(simple.tokens.size(), kept + simple.spans.size());
    std::size_t uncovered = 0;
    for (std::size_t k = 0; k < simple.spans.size(); ++k) {
      const auto& span = simple.spans[k];
      EXPECT_EQ(simple.tokens[span.amp_index], kHighEntropySymbol);
      EXPECT_LT(span.begin, span.end);
      if (k > 0) {
        EXPECT_LT(simple.spans[k - 1].amp_index + 1, span.amp_index + 1);
        // Runs are maximal, so consecutive spans never touch.
        EXPECT_LT(simple.spans[k - 1].end, span.begin);
      }
      for (std::size_t j = span.begin; j < span.end; ++j) EXPECT_FALSE(covered[j]);
      uncovered += span.end - span.begin;
    }
    EXPECT_EQ(uncovered, s.size() - kept);

    // Every simplified index together maps back onto every original index.
    std::vector<std::size_t> all(simple.tokens.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> expected(s.size());
    std::iota(expected.begin(), expected.end(), 0);
    EXPECT_EQ(ExpandIndices(simple, all), expected);
  }
}

TEST(ExpandIndices, MapsAmpersandToItsRange) {
  const auto simple =
      SimplifySentence("xy/ab zq", {false, false, true, true, true, true, false, false});
  // "&/ab &": & -> 0..1, '/' -> 2, 'a' -> 3, 'b' -> 4, ' ' -> 5, & -> 6..7.
  EXPECT_EQ(ExpandIndices(simple, std::vector<std::size_t>{1}), (std::vector<std::size_t>{2}));
  EXPECT_EQ(ExpandIndices(simple, std::vector<std::size_t>{5, 4, 0}),
            (std::vector<std::size_t>{0, 1, 5, 6, 7}));
  EXPECT_EQ(ExpandIndices(simple, std::vector<std::size_t>{3, 3, 99}),
            (std::vector<std::size_t>{4}));
}

TEST(SpanRecord, Format) {
  EXPECT_EQ(SpanRecord(3, AmpSpan{1, 4, 9}),
            R"({"line_no":3,"amp_index":1,"start":4,"end":9})");
}

TEST(CoverageMode, Names) {
  EXPECT_EQ(CoverageModeFromName(CoverageModeName(CoverageMode::kTopological)),
            CoverageMode::kTopological);
  EXPECT_EQ(CoverageModeFromName("symbolic"), CoverageMode::kSymbolic);
  EXPECT_FALSE(CoverageModeFromName("both"));
}

// "ab cd" parsed as ((a b) ((' ' c) d)); the model keeps only the rule over
// ' ' and 'c'.
TEST(CoveredTokens, TopologicalAndSymbolic) {
  ParseTree tree("ab cd");
  const int ab = tree.Merge(0, 1, ActionKind::kRegular);
  const int sc = tree.Merge(2, 3, ActionKind::kAnchoredLeft);
  const int scd = tree.Merge(sc, 4, ActionKind::kRegular);
  tree.Merge(ab, scd, ActionKind::kRegular);
  GrammarModel model;
  model.rules[RuleAt(tree, sc)] = 100;
  EXPECT_EQ(CoveredTokens(tree, model, CoverageMode::kTopological),
            (std::vector<bool>{false, false, true, true, false}));
  EXPECT_EQ(CoveredSymbols(model), (std::set<char>{' ', 'c'}));
  EXPECT_EQ(CoveredTokens(tree, model, CoverageMode::kSymbolic),
            (std::vector<bool>{false, false, true, true, false}));
  // Symbolic coverage is positional-blind: a second 'c' is covered anywhere.
  ParseTree other("cab");
  const int ca = other.Merge(0, 1, ActionKind::kRegular);
  other.Merge(ca, 2, ActionKind::kRegular);
  EXPECT_EQ(CoveredTokens(other, model, CoverageMode::kSymbolic),
            (std::vector<bool>{true, false, false}));
  EXPECT_EQ(CoveredTokens(other, model, CoverageMode::kTopological),
            (std::vector<bool>{false, false, false}));
}

TEST(CoveredTokens, SymbolicKeyListExamples) {
  GrammarModel model;
  model.rules[Rule{" /", " ", "/", ActionKind::kRegular, false}] = 150;
  const Simplifier simplifier(testing::HashPolicy(1), model, CoverageMode::kSymbolic);
  EXPECT_EQ(simplifier.Simplify("/cjc /i /sp").tokens, "/& /& /&");
  EXPECT_EQ(simplifier.Simplify("/cjc i /sp").tokens, "/& & /&");
  EXPECT_EQ(simplifier.Simplify("cjc").tokens, "&");

  const Simplifier nothing(testing::HashPolicy(1), GrammarModel{}, CoverageMode::kSymbolic);
  EXPECT_EQ(nothing.Simplify("/ab /c").tokens, "&");
  GrammarModel everything;
  everything.rules[Rule{"ab", "a", "b", ActionKind::kRegular, false}] = 1;
  everything.rules[Rule{"/ ", "/", " ", ActionKind::kRegular, false}] = 1;
  const Simplifier all(testing::HashPolicy(1), everything, CoverageMode::kSymbolic);
  EXPECT_EQ(all.Simplify("/ab /ba").tokens, "/ab /ba");
}

// A one-token sentence has no merges, so no model can call it anomalous.
TEST(Detect, LoneAmpersandIsNominal) {
  GrammarModel model;
  model.rules[Rule{"/&", "/", "&", ActionKind::kRegular, true}] = 10;
  EXPECT_EQ(Detect("&", testing::HashPolicy(2), model).label, Label::kNominal);
}

TEST(CoveredTokens, StartRulesAreDistinct) {
  ParseTree tree("ab");
  tree.Merge(0, 1, ActionKind::kRegular);
  GrammarModel model;
  Rule rule = RuleAt(tree, tree.root());
  rule.is_start = false;
  model.rules[rule] = 5;
  EXPECT_EQ(CoveredTokens(tree, model, CoverageMode::kTopological),
            (std::vector<bool>{false, false}));
  rule.is_start = true;
  model.rules[rule] = 5;
  EXPECT_EQ(CoveredTokens(tree, model, CoverageMode::kTopological),
            (std::vector<bool>{true, true}));
}

TEST(Simplifier, MatchesManualPipeline) {
  const testing::HashPolicy policy(3);
  const auto sentences = GenerateKeyList(3, 100);
  const GrammarModel model = FilterByFrequency(BuildModel(ParseAll(sentences, policy)), 10);
  for (CoverageMode mode : {CoverageMode::kTopological, CoverageMode::kSymbolic}) {
    const Simplifier simplifier(policy, model, mode);
    const auto all = simplifier.SimplifyAll(sentences);
    ASSERT_EQ(all.size(), sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto manual =
          SimplifySentence(sentences[i], CoveredTokens(Parse(sentences[i], policy), model, mode));
      EXPECT_EQ(all[i].tokens, manual.tokens);
      EXPECT_EQ(all[i].spans, manual.spans);
      EXPECT_EQ(ExpandSimplified(all[i], sentences[i]), sentences[i]);
    }
  }
}

TEST(TwoPass, KeyListPipeline) {
  const ExperimentConfig exp = DefaultExperiment(Format::kKeyList);
  const EvaluationSet eval = PrepareEvaluation(exp);
  TwoPassConfig cfg;
  cfg.first_pass = exp.train;
  cfg.second_pass = exp.second_pass;
  cfg.second_pass.seed = 99;
  cfg.frequency_threshold = exp.frequency_threshold;
  cfg.coverage = exp.coverage;
  std::vector<Sentence> anomalous;
  for (const auto& c : eval.corrupted[0]) anomalous.push_back(c.sentence);

  const TwoPassResult r = RunTwoPass(eval.split, anomalous, cfg);
  for (const auto& [rule, count] : r.first.model.rules) {
    EXPECT_GE(count, cfg.frequency_threshold);
  }
  EXPECT_FALSE(r.first.model.rules.empty());
  // Only separator merges survive the threshold.
  for (const auto& [rule, count] : r.first.model.rules) {
    EXPECT_TRUE(rule.rhs_left.size() == 1 && std::string("/ ").find(rule.rhs_left[0]) != std::string::npos)
        << RuleToText(rule);
    EXPECT_TRUE(rule.rhs_right.size() == 1 && std::string("/ ").find(rule.rhs_right[0]) != std::string::npos)
        << RuleToText(rule);
  }
  ASSERT_EQ(r.simplified.extract.size(), eval.split.extract.size());
  for (std::size_t i = 0; i < eval.split.extract.size(); ++i) {
    EXPECT_EQ(ExpandSimplified(r.simplified.extract[i], eval.split.extract[i]),
              eval.split.extract[i]);
    // Soundness carries over to the second pass.
    EXPECT_EQ(Detect(r.simplified.extract[i].tokens, r.second.policy, r.second.model,
                     cfg.detect)
                  .label,
              Label::kNominal);
  }
  EXPECT_EQ(r.validation.size(), eval.split.validate.size());
  EXPECT_EQ(r.evaluate_nominal.size(), eval.split.evaluate_nominal.size());
  EXPECT_EQ(r.evaluate_anomalous.size(), anomalous.size());
  // Keys simplify to "/&" pieces.
  EXPECT_EQ(r.simplified.extract[0].tokens.find_first_not_of("/ &"), std::string::npos);
}

}  // namespace
}  // namespace grex
