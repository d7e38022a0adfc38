#ifndef GREX_EVALKIT_H_
#define GREX_EVALKIT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grex/anomaly.h"
#include "grex/corpus.h"
#include "grex/grammar.h"
#include "grex/policy_training.h"
#include "grex/simplify.h"

namespace grex {

struct ExperimentConfig {
  Format format = Format::kSimpleJson;
  SplitSizes sizes;
  std::uint64_t dataset_seed = 7;
  std::uint64_t anomaly_seed = 11;
  // Empty means DefaultAnomalyKinds(format).
  std::vector<AnomalyKind> kinds;
  // train.seed is replaced by the trial seed.
  TrainConfig train;
  DetectOptions detect;
  bool two_pass = false;
  // Second-pass training; its seed is derived from the trial seed.
  TrainConfig second_pass;
  std::size_t frequency_threshold = 100;
  CoverageMode coverage = CoverageMode::kSymbolic;
};

// Tuned settings per format: Simple-JSON runs one pass; Key-List runs two
// passes with symbolic coverage, threshold 100 and alpha_anchor 0.8;
// Simple-JSON-Stream runs two passes with topological coverage and
// threshold 20.
ExperimentConfig DefaultExperiment(Format format);

// Dataset plus its corrupted evaluation sentences, fixed across trials.
struct EvaluationSet {
  DatasetSplit split;
  std::vector<AnomalyKind> kinds;
  // corrupted[k][i] is split.evaluate_anomalous[j] corrupted with kinds[k];
  // sentences without an eligible token are skipped.
  std::vector<std::vector<CorruptedSentence>> corrupted;
};

EvaluationSet PrepareEvaluation(DatasetSplit split, std::vector<AnomalyKind> kinds,
                                std::uint64_t anomaly_seed);
EvaluationSet PrepareEvaluation(const ExperimentConfig& cfg);

struct KindMetrics {
  AnomalyKind kind = AnomalyKind::kDeleteBracket;
  std::size_t total = 0;
  std::size_t detected = 0;
  double tpr = 0.0;
  LocalizationMetrics localization;
  // Two-pass only: missed sentences whose simplified form is a lone '&'.
  std::size_t collapsed_misses = 0;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::size_t validation_total = 0;
  std::size_t validation_false_positives = 0;
  double validation_fpr = 0.0;
  std::size_t nominal_total = 0;
  std::size_t nominal_false_positives = 0;
  double nominal_fpr = 0.0;
  std::vector<KindMetrics> per_kind;
  bool gated = false;  // validation_fpr == 0
};

// Everything a trial produced, for inspection.
struct TrialDetail {
  TrialResult result;
  // The policy and model the final classification used.
  PassArtifacts detector;
  std::vector<Verdict> validation;
  std::vector<Verdict> evaluate_nominal;
  std::vector<std::vector<Verdict>> anomalous;  // per kind
  // Two-pass only.
  std::optional<PassArtifacts> first_pass;
  std::vector<std::vector<SimplifiedSentence>> simplified_anomalous;
};

// Fraction of `verdicts` labeled anomalous; 0 for an empty list.
double AnomalousFraction(std::span<const Verdict> verdicts);

TrialDetail RunTrialDetailed(std::uint64_t seed, const EvaluationSet& eval,
                             const ExperimentConfig& cfg);
TrialResult RunTrial(std::uint64_t seed, const EvaluationSet& eval,
                     const ExperimentConfig& cfg);

// Runs the given seeds on up to `jobs` threads; results follow `seeds`.
std::vector<TrialResult> RunTrials(std::span<const std::uint64_t> seeds,
                                   const EvaluationSet& eval,
                                   const ExperimentConfig& cfg, int jobs = 1);

// Tries seeds first_seed, first_seed + 1, ... until a trial is gated or
// `max_trials` have run. Returns every trial run.
std::vector<TrialResult> RunUntilGated(const EvaluationSet& eval,
                                       const ExperimentConfig& cfg,
                                       std::uint64_t first_seed,
                                       std::size_t max_trials = 30);

struct KindSummary {
  AnomalyKind kind = AnomalyKind::kDeleteBracket;
  double tpr = 0.0;
  double localization_rate = 0.0;
  // Mean over trials that localized at least one sentence.
  double localization_ratio = 0.0;
};

struct Summary {
  bool gated_only = false;
  std::size_t trials = 0;        // trials averaged
  std::size_t total_trials = 0;  // trials supplied
  std::size_t gated_trials = 0;
  double validation_fpr = 0.0;
  double nominal_fpr = 0.0;
  std::vector<KindSummary> per_kind;
};

// Per-kind means over `trials` (only the gated ones if `gated_only`). Kinds
// are taken from the first trial. Throws Error on an empty list and
// NoGatedTrials when gating leaves nothing.
Summary Aggregate(std::span<const TrialResult> trials, bool gated_only);

// Plain-text table; each cell shows the all-trial mean, followed by the
// gated mean in parentheses when `gated` is given.
std::string SummaryTable(const Summary& all, const std::optional<Summary>& gated);

std::string TrialRecord(const TrialResult& trial);
TrialResult ParseTrialRecord(std::string_view line);
std::string SummaryRecord(const Summary& summary);

}  // namespace grex

#endif  // GREX_EVALKIT_H_
