// Command-line driver for the grammar extraction pipeline.
//
//   grex generate --format simple-json --seed 7 --out data/
//   grex train    --in data/train.txt --out p.pol
//   grex extract  --policy p.pol --in data/extract.txt --out m.rules
//   grex detect   --model m.rules --policy p.pol --in data/eval_nominal.txt
//   grex simplify --policy p.pol --model m.rules --in data/train.txt --out s.txt
//   grex evaluate --format key-list --two-pass --threshold 100 --alpha-anchor 0.8
//
// Exit codes: 0 ok, 1 other failure, 2 bad configuration, 3 I/O error,
// 4 missing input artifact.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grex/anomaly.h"
#include "grex/corpus.h"
#include "grex/errors.h"
#include "grex/evalkit.h"
#include "grex/grammar.h"
#include "grex/policy_training.h"
#include "grex/simplify.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitMissing = 4;

struct MissingArtifact : grex::Error {
  using Error::Error;
};

struct ConfigError : grex::Error {
  using Error::Error;
};

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) throw MissingArtifact("missing input: " + path);
}

std::ofstream OpenOut(const std::string& path) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
  }
  std::ofstream out(path);
  if (!out) throw grex::IoError("cannot write " + path);
  return out;
}

template <typename T>
std::map<std::string, T> NameMap(std::initializer_list<T> values,
                                 std::string_view (*name)(T)) {
  std::map<std::string, T> out;
  for (T v : values) out.emplace(std::string(name(v)), v);
  return out;
}

const auto kFormats = NameMap<grex::Format>(
    {grex::Format::kSimpleJson, grex::Format::kKeyList, grex::Format::kSimpleJsonStream},
    grex::FormatName);
const auto kCoverageModes = NameMap<grex::CoverageMode>(
    {grex::CoverageMode::kTopological, grex::CoverageMode::kSymbolic},
    grex::CoverageModeName);
const auto kRewardBases = NameMap<grex::RewardBasis>(
    {grex::RewardBasis::kAtom, grex::RewardBasis::kRule}, grex::RewardBasisName);
const std::map<std::string, grex::Coverage> kFlagCoverage = {
    {"children", grex::Coverage::kChildren},
    {"descendants", grex::Coverage::kDescendants}};

// Training flags shared by train and evaluate.
struct TrainFlags {
  grex::TrainConfig cfg;
  CLI::Option* alpha = nullptr;

  void Attach(CLI::App* app) {
    app->add_option("--epochs", cfg.epochs, "training epochs")
        ->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--lr", cfg.learning_rate, "learning rate")->capture_default_str();
    app->add_option("--temperature", cfg.temperature, "softmax temperature")
        ->capture_default_str()->check(CLI::PositiveNumber);
    alpha = app->add_option("--alpha-anchor", cfg.alpha_anchor,
                            "reward weight of anchored merges")
                ->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--smoothing", cfg.smoothing, "added to counts before the log")
        ->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--samples", cfg.samples_per_sentence,
                    "sampled parses per sentence and epoch")
        ->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--truncation", cfg.truncation, "policy feature label length")
        ->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--reward-basis", cfg.reward_basis, "atom | rule")
        ->transform(CLI::CheckedTransformer(kRewardBases, CLI::ignore_case));
  }
};


struct GenerateFlags {
  grex::Format format = grex::Format::kSimpleJson;
  std::uint64_t seed = 7;
  std::uint64_t anomaly_seed = 11;
  grex::SplitSizes sizes;
  std::size_t count_eval = 200;
  std::string out = ".";
};

int RunGenerate(const GenerateFlags& f) {
  grex::SplitSizes sizes = f.sizes;
  sizes.evaluate_nominal = f.count_eval / 2;
  sizes.evaluate_anomalous = f.count_eval - sizes.evaluate_nominal;
  auto eval = grex::PrepareEvaluation(grex::GenerateDataset(f.format, f.seed, sizes),
                                      grex::DefaultAnomalyKinds(f.format), f.anomaly_seed);
  const auto& split = eval.split;
  const fs::path dir(f.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw grex::IoError("cannot create " + dir.string());

  const std::vector<std::pair<std::string, const std::vector<grex::Sentence>*>> files = {
      {"train", &split.train},
      {"extract", &split.extract},
      {"validate", &split.validate},
      {"eval_nominal", &split.evaluate_nominal},
      {"eval_anomalous", &split.evaluate_anomalous}};
  auto manifest = OpenOut((dir / "manifest.jsonl").string());
  for (const auto& [name, sentences] : files) {
    grex::WriteSentences((dir / (name + ".txt")).string(), *sentences);
    for (const auto& s : *sentences) {
      manifest << grex::ManifestLine({name, s, std::nullopt}) << "\n";
    }
  }
  for (std::size_t k = 0; k < eval.kinds.size(); ++k) {
    const std::string name =
        "eval_anomalous." + std::string(grex::AnomalyKindName(eval.kinds[k]));
    std::vector<grex::Sentence> corrupted;
    for (const auto& c : eval.corrupted[k]) {
      corrupted.push_back(c.sentence);
      manifest << grex::ManifestLine({name, c.sentence, c.spec}) << "\n";
    }
    grex::WriteSentences((dir / (name + ".txt")).string(), corrupted);
  }
  if (!manifest) throw grex::IoError("write failed: manifest.jsonl");
  return 0;
}


struct TrainCmdFlags {
  TrainFlags train;
  std::uint64_t seed = 1;
  std::string in;
  std::string out;
  std::string history;
};

int RunTrain(TrainCmdFlags& f) {
  RequireFile(f.in);
  f.train.cfg.seed = f.seed;
  const auto corpus = grex::ReadSentences(f.in);
  if (corpus.empty()) throw ConfigError("training corpus is empty: " + f.in);
  std::vector<grex::EpochStats> history;
  const auto policy = grex::Train(corpus, f.train.cfg, &history);
  policy.Save(f.out);
  if (!f.history.empty()) {
    auto out = OpenOut(f.history);
    for (const auto& h : history) {
      out << h.epoch << '\t' << h.mean_reward << '\t' << h.distinct_atoms << '\n';
    }
  }
  return 0;
}


struct ExtractFlags {
  std::string policy;
  std::string in;
  std::string out;
  std::size_t threshold = 0;
  std::string dump_trees;
  std::string graph;
};

int RunExtract(const ExtractFlags& f) {
  RequireFile(f.policy);
  RequireFile(f.in);
  const auto policy = grex::TabularPolicy::Load(f.policy);
  const auto sentences = grex::ReadSentences(f.in);
  const auto trees = grex::ParseAll(sentences, policy);
  auto model = grex::BuildModel(trees);
  if (f.threshold > 0) model = grex::FilterByFrequency(model, f.threshold);
  grex::WriteModel(f.out, model);
  if (!f.dump_trees.empty()) {
    auto out = OpenOut(f.dump_trees);
    for (const auto& t : trees) out << t.ToText() << '\n';
  }
  if (!f.graph.empty()) OpenOut(f.graph) << grex::ModelToGraph(model);
  return 0;
}


struct DetectFlags {
  std::string model;
  std::string policy;
  std::string in;
  std::string out;
  bool no_constraints = false;
  grex::Coverage coverage = grex::Coverage::kChildren;
  bool verbose = false;
};

int RunDetect(const DetectFlags& f) {
  RequireFile(f.model);
  RequireFile(f.policy);
  RequireFile(f.in);
  const auto model = grex::ReadModel(f.model);
  const auto policy = grex::TabularPolicy::Load(f.policy);
  const grex::DetectOptions options{!f.no_constraints, f.coverage};
  std::ofstream file;
  if (!f.out.empty()) file = OpenOut(f.out);
  std::ostream& out = f.out.empty() ? std::cout : file;
  for (const auto& s : grex::ReadSentences(f.in)) {
    out << grex::VerdictRecord(s, grex::Detect(s, policy, model, options), f.verbose)
        << '\n';
  }
  return 0;
}


struct SimplifyFlags {
  std::string policy;
  std::string model;
  std::string in;
  std::string out;
  std::string spans;
  std::size_t threshold = 100;
  grex::CoverageMode coverage = grex::CoverageMode::kSymbolic;
};

int RunSimplify(const SimplifyFlags& f) {
  RequireFile(f.policy);
  RequireFile(f.model);
  RequireFile(f.in);
  const auto policy = grex::TabularPolicy::Load(f.policy);
  const grex::Simplifier simplifier(
      policy, grex::FilterByFrequency(grex::ReadModel(f.model), f.threshold), f.coverage);
  const auto simplified = simplifier.SimplifyAll(grex::ReadSentences(f.in));
  grex::WriteSentences(f.out, grex::TokensOf(simplified));
  if (!f.spans.empty()) {
    auto out = OpenOut(f.spans);
    for (std::size_t line = 0; line < simplified.size(); ++line) {
      for (const auto& span : simplified[line].spans) {
        out << grex::SpanRecord(line, span) << '\n';
      }
    }
  }
  return 0;
}


struct EvaluateFlags {
  grex::Format format = grex::Format::kSimpleJson;
  TrainFlags train;
  bool two_pass = false;
  bool single_pass = false;
  std::size_t threshold = 100;
  CLI::Option* threshold_opt = nullptr;
  grex::CoverageMode coverage = grex::CoverageMode::kSymbolic;
  CLI::Option* coverage_opt = nullptr;
  bool no_constraints = false;
  std::size_t trials = 30;
  std::uint64_t seed = 1;
  std::uint64_t dataset_seed = 7;
  std::uint64_t anomaly_seed = 11;
  int jobs = 1;
  std::string records;
  bool gated_only = false;
};

int RunEvaluate(EvaluateFlags& f, const CLI::App& cmd) {
  grex::ExperimentConfig cfg = grex::DefaultExperiment(f.format);
  // Format presets apply unless a flag was given explicitly.
  const double alpha = cfg.train.alpha_anchor;
  auto pick = [&](const char* flag) { return cmd.count(flag) > 0; };
  cfg.train = f.train.cfg;
  if (f.train.alpha->count() == 0) cfg.train.alpha_anchor = alpha;
  cfg.second_pass = cfg.train;
  if (f.two_pass) cfg.two_pass = true;
  if (f.single_pass) cfg.two_pass = false;
  if (f.threshold_opt->count() > 0) cfg.frequency_threshold = f.threshold;
  if (f.coverage_opt->count() > 0) cfg.coverage = f.coverage;
  cfg.detect.use_constraints = !f.no_constraints;
  if (pick("--dataset-seed")) cfg.dataset_seed = f.dataset_seed;
  if (pick("--anomaly-seed")) cfg.anomaly_seed = f.anomaly_seed;

  const auto eval = grex::PrepareEvaluation(cfg);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < f.trials; ++i) seeds.push_back(f.seed + i);
  const auto trials = grex::RunTrials(seeds, eval, cfg, f.jobs);

  if (!f.records.empty()) {
    auto out = OpenOut(f.records);
    for (const auto& t : trials) out << grex::TrialRecord(t) << '\n';
  }
  const auto all = grex::Aggregate(trials, false);
  std::optional<grex::Summary> gated;
  if (all.gated_trials > 0) gated = grex::Aggregate(trials, true);
  if (f.gated_only && !gated) {
    throw grex::NoGatedTrials("none of " + std::to_string(trials.size()) +
                              " trials passed validation gating");
  }
  std::cout << "format " << grex::FormatName(cfg.format)
            << (cfg.two_pass ? ", two-pass" : "") << "\n"
            << grex::SummaryTable(all, gated);
  std::size_t collapsed = 0;
  for (const auto& t : trials) {
    for (const auto& k : t.per_kind) collapsed += k.collapsed_misses;
  }
  if (cfg.two_pass) {
    std::cout << "misses collapsed to a lone '&': " << collapsed << " over "
              << trials.size() << " trials\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grammar extraction, anomaly detection and simplification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file");
  app.set_version_flag("--version", "grex 1.0");

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "generate dataset splits");
  generate->add_option("--format", gen.format, "simple-json | key-list | simple-json-stream")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
  generate->add_option("--seed", gen.seed, "dataset seed")->capture_default_str();
  generate->add_option("--anomaly-seed", gen.anomaly_seed, "anomaly injection seed")
      ->capture_default_str();
  generate->add_option("--train", gen.sizes.train, "training sentences")->capture_default_str();
  generate->add_option("--extract", gen.sizes.extract, "extraction sentences")
      ->capture_default_str();
  generate->add_option("--validate", gen.sizes.validate, "validation sentences")
      ->capture_default_str();
  generate->add_option("--count-eval", gen.count_eval,
                       "evaluation sentences, split evenly nominal/anomalous")
      ->capture_default_str();
  generate->add_option("--out", gen.out, "output directory")->capture_default_str();

  TrainCmdFlags tr;
  auto* train = app.add_subcommand("train", "train a merge policy");
  tr.train.Attach(train);
  train->add_option("--seed", tr.seed, "training seed")->capture_default_str();
  train->add_option("--in", tr.in, "training sentences")->required();
  train->add_option("--out", tr.out, "policy file")->required();
  train->add_option("--history", tr.history, "per-epoch reward log");

  ExtractFlags ex;
  auto* extract = app.add_subcommand("extract", "extract rules and constraints");
  extract->add_option("--policy", ex.policy, "policy file")->required();
  extract->add_option("--in", ex.in, "extraction sentences")->required();
  extract->add_option("--out", ex.out, "model file")->required();
  extract->add_option("--threshold", ex.threshold, "drop rules seen fewer times")
      ->capture_default_str();
  extract->add_option("--dump-trees", ex.dump_trees, "write parse trees");
  extract->add_option("--graph", ex.graph, "write the rule graph");

  DetectFlags de;
  auto* detect = app.add_subcommand("detect", "classify sentences");
  detect->add_option("--model", de.model, "model file")->required();
  detect->add_option("--policy", de.policy, "policy file")->required();
  detect->add_option("--in", de.in, "sentences to classify")->required();
  detect->add_option("--out", de.out, "verdict records (default stdout)");
  detect->add_flag("--no-constraints", de.no_constraints, "ignore precedence constraints");
  detect->add_option("--localize", de.coverage, "children | descendants")
      ->transform(CLI::CheckedTransformer(kFlagCoverage, CLI::ignore_case));
  detect->add_flag("--verbose", de.verbose, "include offending rules and constraints");

  SimplifyFlags si;
  auto* simplify = app.add_subcommand("simplify", "collapse uncovered tokens to '&'");
  simplify->add_option("--policy", si.policy, "first-pass policy file")->required();
  simplify->add_option("--model", si.model, "first-pass model file")->required();
  simplify->add_option("--in", si.in, "sentences")->required();
  simplify->add_option("--out", si.out, "simplified sentences")->required();
  simplify->add_option("--spans", si.spans, "span map sidecar");
  simplify->add_option("--threshold", si.threshold, "rule frequency threshold")
      ->capture_default_str();
  simplify->add_option("--coverage", si.coverage, "topological | symbolic")
      ->transform(CLI::CheckedTransformer(kCoverageModes, CLI::ignore_case));

  EvaluateFlags ev;
  auto* evaluate = app.add_subcommand("evaluate", "run gated trials and summarize");
  evaluate->add_option("--format", ev.format, "simple-json | key-list | simple-json-stream")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
  ev.train.Attach(evaluate);
  auto* two = evaluate->add_flag("--two-pass", ev.two_pass, "simplify, then detect");
  evaluate->add_flag("--single-pass", ev.single_pass, "detect on raw sentences")
      ->excludes(two);
  ev.threshold_opt = evaluate->add_option("--threshold", ev.threshold,
                                          "first-pass rule frequency threshold");
  ev.coverage_opt = evaluate->add_option("--coverage", ev.coverage, "topological | symbolic")
                        ->transform(CLI::CheckedTransformer(kCoverageModes, CLI::ignore_case));
  evaluate->add_flag("--no-constraints", ev.no_constraints, "ignore precedence constraints");
  evaluate->add_option("--trials", ev.trials, "number of training seeds")
      ->capture_default_str()->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", ev.seed, "first training seed")->capture_default_str();
  evaluate->add_option("--dataset-seed", ev.dataset_seed, "dataset seed")->capture_default_str();
  evaluate->add_option("--anomaly-seed", ev.anomaly_seed, "anomaly injection seed")
      ->capture_default_str();
  evaluate->add_option("--jobs", ev.jobs, "worker threads")
      ->capture_default_str()->check(CLI::PositiveNumber);
  evaluate->add_option("--records", ev.records, "per-trial JSON-lines records");
  evaluate->add_flag("--gated-only", ev.gated_only, "fail when no trial is gated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*generate) return RunGenerate(gen);
    if (*train) return RunTrain(tr);
    if (*extract) return RunExtract(ex);
    if (*detect) return RunDetect(de);
    if (*simplify) return RunSimplify(si);
    if (*evaluate) return RunEvaluate(ev, *evaluate);
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const grex::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const grex::ParseError& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
