#include "grex/evalkit.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>

#include "grex/errors.h"
#include "json.hpp"

namespace grex {
namespace {

std::uint64_t Mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CorruptionSeed(std::uint64_t anomaly_seed, AnomalyKind kind,
                             std::size_t index) {
  return Mix(Mix(anomaly_seed ^ (static_cast<std::uint64_t>(kind) << 56)) + index);
}

double Ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::size_t CountAnomalous(std::span<const Verdict> verdicts) {
  return static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(),
                    [](const Verdict& v) { return v.label == Label::kAnomalous; }));
}

// Sorting first makes the sum independent of trial order.
double Mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::vector<Verdict> Classify(std::span<const Sentence> sentences,
                              const PassArtifacts& detector,
                              const DetectOptions& options) {
  std::vector<Verdict> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    out.push_back(Detect(s, detector.policy, detector.model, options));
  }
  return out;
}

std::vector<Sentence> SentencesOf(std::span<const CorruptedSentence> corrupted) {
  std::vector<Sentence> out;
  out.reserve(corrupted.size());
  for (const auto& c : corrupted) out.push_back(c.sentence);
  return out;
}

KindMetrics MeasureKind(AnomalyKind kind, std::span<const CorruptedSentence> corrupted,
                        std::span<const Verdict> raw_flags) {
  KindMetrics m;
  m.kind = kind;
  m.total = corrupted.size();
  m.detected = CountAnomalous(raw_flags);
  m.tpr = Ratio(m.detected, m.total);
  // A missed sentence carries no flags and counts as unlocalized.
  std::vector<AnomalySpec> specs;
  specs.reserve(corrupted.size());
  for (const auto& c : corrupted) specs.push_back(c.spec);
  m.localization = ComputeLocalizationMetrics(raw_flags, specs);
  return m;
}

}  // namespace

ExperimentConfig DefaultExperiment(Format format) {
  ExperimentConfig cfg;
  cfg.format = format;
  switch (format) {
    case Format::kSimpleJson:
      break;
    case Format::kKeyList:
      cfg.two_pass = true;
      cfg.train.alpha_anchor = 0.8;
      cfg.frequency_threshold = 100;
      cfg.coverage = CoverageMode::kSymbolic;
      break;
    case Format::kSimpleJsonStream:
      cfg.two_pass = true;
      cfg.frequency_threshold = 20;
      cfg.coverage = CoverageMode::kTopological;
      break;
  }
  cfg.second_pass = cfg.train;
  return cfg;
}

EvaluationSet PrepareEvaluation(DatasetSplit split, std::vector<AnomalyKind> kinds,
                                std::uint64_t anomaly_seed) {
  EvaluationSet eval;
  eval.split = std::move(split);
  eval.kinds = std::move(kinds);
  for (AnomalyKind kind : eval.kinds) {
    auto& out = eval.corrupted.emplace_back();
    const auto& source = eval.split.evaluate_anomalous;
    for (std::size_t i = 0; i < source.size(); ++i) {
      try {
        out.push_back(InjectAnomaly(source[i], kind, CorruptionSeed(anomaly_seed, kind, i)));
      } catch (const NoEligibleToken&) {
      }
    }
  }
  return eval;
}

EvaluationSet PrepareEvaluation(const ExperimentConfig& cfg) {
  auto kinds = cfg.kinds.empty() ? DefaultAnomalyKinds(cfg.format) : cfg.kinds;
  return PrepareEvaluation(GenerateDataset(cfg.format, cfg.dataset_seed, cfg.sizes),
                           std::move(kinds), cfg.anomaly_seed);
}

double AnomalousFraction(std::span<const Verdict> verdicts) {
  return Ratio(CountAnomalous(verdicts), verdicts.size());
}

TrialDetail RunTrialDetailed(std::uint64_t seed, const EvaluationSet& eval,
                             const ExperimentConfig& cfg) {
  TrialDetail detail;
  TrialResult& r = detail.result;
  r.seed = seed;
  const auto& split = eval.split;

  TrainConfig train = cfg.train;
  train.seed = seed;
  if (!cfg.two_pass) {
    detail.detector = TrainAndExtract(split.train, split.extract, train);
    detail.validation = Classify(split.validate, detail.detector, cfg.detect);
    detail.evaluate_nominal = Classify(split.evaluate_nominal, detail.detector, cfg.detect);
    for (std::size_t k = 0; k < eval.kinds.size(); ++k) {
      const auto& corrupted = eval.corrupted[k];
      detail.anomalous.push_back(
          Classify(SentencesOf(corrupted), detail.detector, cfg.detect));
      r.per_kind.push_back(MeasureKind(eval.kinds[k], corrupted, detail.anomalous.back()));
    }
  } else {
    TwoPassConfig two;
    two.first_pass = train;
    two.second_pass = cfg.second_pass;
    two.second_pass.seed = Mix(seed);
    two.frequency_threshold = cfg.frequency_threshold;
    two.coverage = cfg.coverage;
    two.detect = cfg.detect;
    std::vector<Sentence> all_anomalous;
    for (const auto& corrupted : eval.corrupted) {
      for (const auto& c : corrupted) all_anomalous.push_back(c.sentence);
    }
    TwoPassResult run = RunTwoPass(split, all_anomalous, two);
    detail.first_pass = std::move(run.first);
    detail.detector = std::move(run.second);
    detail.validation = std::move(run.validation);
    detail.evaluate_nominal = std::move(run.evaluate_nominal);

    std::size_t offset = 0;
    for (std::size_t k = 0; k < eval.kinds.size(); ++k) {
      const auto& corrupted = eval.corrupted[k];
      const auto begin = static_cast<std::ptrdiff_t>(offset);
      const auto end = static_cast<std::ptrdiff_t>(offset + corrupted.size());
      std::vector<Verdict> verdicts(run.evaluate_anomalous.begin() + begin,
                                    run.evaluate_anomalous.begin() + end);
      std::vector<SimplifiedSentence> simplified(
          run.simplified.evaluate_anomalous.begin() + begin,
          run.simplified.evaluate_anomalous.begin() + end);
      offset += corrupted.size();

      // Flags refer to simplified tokens; measure them on the raw sentence.
      std::vector<Verdict> raw = verdicts;
      std::size_t collapsed = 0;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i].flagged_token_indices =
            ExpandIndices(simplified[i], verdicts[i].flagged_token_indices);
        raw[i].token_count = corrupted[i].sentence.size();
        if (verdicts[i].label == Label::kNominal &&
            simplified[i].tokens == std::string(1, kHighEntropySymbol)) {
          ++collapsed;
        }
      }
      KindMetrics m = MeasureKind(eval.kinds[k], corrupted, raw);
      m.collapsed_misses = collapsed;
      r.per_kind.push_back(m);
      detail.anomalous.push_back(std::move(verdicts));
      detail.simplified_anomalous.push_back(std::move(simplified));
    }
  }

  r.validation_total = detail.validation.size();
  r.validation_false_positives = CountAnomalous(detail.validation);
  r.validation_fpr = Ratio(r.validation_false_positives, r.validation_total);
  r.nominal_total = detail.evaluate_nominal.size();
  r.nominal_false_positives = CountAnomalous(detail.evaluate_nominal);
  r.nominal_fpr = Ratio(r.nominal_false_positives, r.nominal_total);
  r.gated = r.validation_false_positives == 0;
  return detail;
}

TrialResult RunTrial(std::uint64_t seed, const EvaluationSet& eval,
                     const ExperimentConfig& cfg) {
  return RunTrialDetailed(seed, eval, cfg).result;
}

std::vector<TrialResult> RunTrials(std::span<const std::uint64_t> seeds,
                                   const EvaluationSet& eval,
                                   const ExperimentConfig& cfg, int jobs) {
  std::vector<TrialResult> results(seeds.size());
  if (seeds.empty()) return results;
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = RunTrial(seeds[i], eval, cfg);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size() && !failed; i = next++) {
        try {
          results[i] = RunTrial(seeds[i], eval, cfg);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<TrialResult> RunUntilGated(const EvaluationSet& eval,
                                       const ExperimentConfig& cfg,
                                       std::uint64_t first_seed,
                                       std::size_t max_trials) {
  std::vector<TrialResult> trials;
  for (std::size_t i = 0; i < max_trials; ++i) {
    trials.push_back(RunTrial(first_seed + i, eval, cfg));
    if (trials.back().gated) break;
  }
  return trials;
}

Summary Aggregate(std::span<const TrialResult> trials, bool gated_only) {
  if (trials.empty()) throw Error("aggregate: no trials");
  Summary s;
  s.gated_only = gated_only;
  s.total_trials = trials.size();
  std::vector<const TrialResult*> used;
  for (const auto& t : trials) {
    if (t.gated) ++s.gated_trials;
    if (!gated_only || t.gated) used.push_back(&t);
  }
  if (used.empty()) {
    throw NoGatedTrials("aggregate: none of " + std::to_string(trials.size()) +
                        " trials passed validation gating");
  }
  s.trials = used.size();

  std::vector<double> validation, nominal;
  for (const auto* t : used) {
    validation.push_back(t->validation_fpr);
    nominal.push_back(t->nominal_fpr);
  }
  s.validation_fpr = Mean(validation);
  s.nominal_fpr = Mean(nominal);

  for (const auto& first : trials.front().per_kind) {
    std::vector<double> tpr, rate, ratio;
    for (const auto* t : used) {
      auto it = std::find_if(t->per_kind.begin(), t->per_kind.end(),
                             [&](const KindMetrics& m) { return m.kind == first.kind; });
      if (it == t->per_kind.end()) continue;
      tpr.push_back(it->tpr);
      rate.push_back(it->localization.rate);
      if (it->localization.localized > 0) ratio.push_back(it->localization.ratio);
    }
    s.per_kind.push_back({first.kind, Mean(tpr), Mean(rate), Mean(ratio)});
  }
  return s;
}

std::string SummaryTable(const Summary& all, const std::optional<Summary>& gated) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * v);
    return std::string(buf);
  };
  auto cell = [&](double a, std::optional<double> g) {
    std::string out = pct(a);
    if (g) out += " (" + pct(*g) + ")";
    return out;
  };
  auto row = [](std::string_view a, std::string_view b, std::string_view c,
                std::string_view d) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18.*s %-18.*s %-18.*s %-18.*s\n",
                  static_cast<int>(a.size()), a.data(), static_cast<int>(b.size()),
                  b.data(), static_cast<int>(c.size()), c.data(),
                  static_cast<int>(d.size()), d.data());
    return std::string(buf);
  };

  std::ostringstream out;
  out << "trials " << all.total_trials << ", gated " << all.gated_trials << "\n";
  out << row("anomaly", "detected", "localized", "flagged ratio");
  for (std::size_t k = 0; k < all.per_kind.size(); ++k) {
    const auto& a = all.per_kind[k];
    std::optional<KindSummary> g;
    if (gated && k < gated->per_kind.size()) g = gated->per_kind[k];
    out << row(AnomalyKindName(a.kind),
               cell(a.tpr, g ? std::optional(g->tpr) : std::nullopt),
               cell(a.localization_rate,
                    g ? std::optional(g->localization_rate) : std::nullopt),
               cell(a.localization_ratio,
                    g ? std::optional(g->localization_ratio) : std::nullopt));
  }
  out << row("nominal (FPR)",
             cell(all.nominal_fpr, gated ? std::optional(gated->nominal_fpr) : std::nullopt),
             "", "");
  return out.str();
}

std::string TrialRecord(const TrialResult& t) {
  nlohmann::ordered_json j;
  j["seed"] = t.seed;
  j["gated"] = t.gated;
  j["validation_total"] = t.validation_total;
  j["validation_false_positives"] = t.validation_false_positives;
  j["validation_fpr"] = t.validation_fpr;
  j["nominal_total"] = t.nominal_total;
  j["nominal_false_positives"] = t.nominal_false_positives;
  j["nominal_fpr"] = t.nominal_fpr;
  auto kinds = nlohmann::ordered_json::array();
  for (const auto& m : t.per_kind) {
    nlohmann::ordered_json k;
    k["kind"] = AnomalyKindName(m.kind);
    k["total"] = m.total;
    k["detected"] = m.detected;
    k["tpr"] = m.tpr;
    k["localized"] = m.localization.localized;
    k["localization_rate"] = m.localization.rate;
    k["localization_ratio"] = m.localization.ratio;
    k["collapsed_misses"] = m.collapsed_misses;
    kinds.push_back(k);
  }
  j["per_kind"] = kinds;
  return j.dump();
}

TrialResult ParseTrialRecord(std::string_view line) {
  TrialResult t;
  try {
    const auto j = nlohmann::json::parse(line);
    t.seed = j.at("seed").get<std::uint64_t>();
    t.gated = j.at("gated").get<bool>();
    t.validation_total = j.at("validation_total").get<std::size_t>();
    t.validation_false_positives = j.at("validation_false_positives").get<std::size_t>();
    t.validation_fpr = j.at("validation_fpr").get<double>();
    t.nominal_total = j.at("nominal_total").get<std::size_t>();
    t.nominal_false_positives = j.at("nominal_false_positives").get<std::size_t>();
    t.nominal_fpr = j.at("nominal_fpr").get<double>();
    for (const auto& k : j.at("per_kind")) {
      KindMetrics m;
      const auto kind = AnomalyKindFromName(k.at("kind").get<std::string>());
      if (!kind) throw ParseError("unknown anomaly kind in trial record");
      m.kind = *kind;
      m.total = k.at("total").get<std::size_t>();
      m.detected = k.at("detected").get<std::size_t>();
      m.tpr = k.at("tpr").get<double>();
      m.localization.total = m.total;
      m.localization.localized = k.at("localized").get<std::size_t>();
      m.localization.rate = k.at("localization_rate").get<double>();
      m.localization.ratio = k.at("localization_ratio").get<double>();
      m.collapsed_misses = k.at("collapsed_misses").get<std::size_t>();
      t.per_kind.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad trial record: ") + e.what());
  }
  return t;
}

std::string SummaryRecord(const Summary& s) {
  nlohmann::ordered_json j;
  j["gated_only"] = s.gated_only;
  j["trials"] = s.trials;
  j["total_trials"] = s.total_trials;
  j["gated_trials"] = s.gated_trials;
  j["validation_fpr"] = s.validation_fpr;
  j["nominal_fpr"] = s.nominal_fpr;
  auto kinds = nlohmann::ordered_json::array();
  for (const auto& k : s.per_kind) {
    nlohmann::ordered_json o;
    o["kind"] = AnomalyKindName(k.kind);
    o["tpr"] = k.tpr;
    o["localization_rate"] = k.localization_rate;
    o["localization_ratio"] = k.localization_ratio;
    kinds.push_back(o);
  }
  j["per_kind"] = kinds;
  return j.dump();
}

}  // namespace grex
