#ifndef GREX_CORPUS_H_
#define GREX_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grex/parse_tree.h"

namespace grex {

enum class Format { kSimpleJson, kKeyList, kSimpleJsonStream };

std::string_view FormatName(Format format);  // simple-json, key-list, ...
std::optional<Format> FormatFromName(std::string_view name);

// Simple-JSON: S -> '{' ('a' | 'b' | 'c' | S+) '}'.
struct SimpleJsonParams {
  double leaf_probability = 0.5;
  int min_children = 1;
  int max_children = 4;
  // Maximum object nesting depth; the outermost object has depth 1. Samples
  // exceeding it are discarded and redrawn.
  int max_depth = 6;
};

std::vector<Sentence> GenerateSimpleJson(std::uint64_t seed, std::size_t count,
                                         const SimpleJsonParams& params = {});

// Recursive-descent membership test for Simple-JSON.
bool IsSimpleJson(std::string_view s);

// Key-List: one to five keys separated by single spaces; each key is '/'
// followed by one to three lowercase letters.
std::vector<Sentence> GenerateKeyList(std::uint64_t seed, std::size_t count);
bool IsKeyList(std::string_view s);

// Simple-JSON body wrapped in a random prefix and suffix of 5 to 20 tokens
// drawn uniformly from the lowercase letters, '{' and '}'.
struct StreamSentence {
  Sentence text;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;  // one past the body
};

std::vector<StreamSentence> GenerateSimpleJsonStreamWithBodies(
    std::uint64_t seed, std::size_t count);
std::vector<Sentence> GenerateSimpleJsonStream(std::uint64_t seed,
                                               std::size_t count);

// Generates `count` sentences of `format` with default parameters.
std::vector<Sentence> Generate(Format format, std::uint64_t seed,
                               std::size_t count);
// Membership oracle for `format`. The stream format has no finite oracle of
// its own; its check is that some infix is Simple-JSON.
bool IsNominal(Format format, std::string_view s);

enum class AnomalyKind {
  kDeleteBracket,
  kDeleteLetter,
  kInsertLetter,
  kDeleteSeparator,
};

std::string_view AnomalyKindName(AnomalyKind kind);  // delete-bracket, ...
std::optional<AnomalyKind> AnomalyKindFromName(std::string_view name);
// Anomaly kinds evaluated for a format.
std::vector<AnomalyKind> DefaultAnomalyKinds(Format format);

// Ground truth for one injected anomaly. For deletions `position` indexes the
// original sentence and `token` is the removed token; for insertions it
// indexes the corrupted sentence and `token` is the inserted token.
struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kDeleteBracket;
  std::size_t position = 0;
  char token = 0;

  friend bool operator==(const AnomalySpec&, const AnomalySpec&) = default;
};

struct CorruptedSentence {
  Sentence sentence;
  AnomalySpec spec;
};

// Throws NoEligibleToken when `s` has no token the kind can act on.
CorruptedSentence InjectAnomaly(std::string_view s, AnomalyKind kind,
                                std::uint64_t seed);

struct SplitSizes {
  std::size_t train = 120;
  std::size_t extract = 100;
  std::size_t validate = 100;
  std::size_t evaluate_nominal = 100;
  std::size_t evaluate_anomalous = 100;

  std::size_t unique_total() const {
    return extract + validate + evaluate_nominal + evaluate_anomalous;
  }
};

struct DatasetSplit {
  std::vector<Sentence> train;
  std::vector<Sentence> extract;
  std::vector<Sentence> validate;
  std::vector<Sentence> evaluate_nominal;
  // Nominal sentences that anomalies are later injected into.
  std::vector<Sentence> evaluate_anomalous;
};

// The first `sizes.train` sentences become the training set, duplicates
// included. The remaining input is deduplicated in order, the first
// `sizes.unique_total()` distinct sentences are shuffled with `seed`, and
// then cut into extract / validate / evaluate sets. Throws
// InsufficientUniqueSentences when the input runs out.
DatasetSplit MakeSplits(std::span<const Sentence> sentences,
                        const SplitSizes& sizes, std::uint64_t seed);

// Generates as many sentences as MakeSplits needs and splits them.
DatasetSplit GenerateDataset(Format format, std::uint64_t seed,
                             const SplitSizes& sizes = {});

// One sentence per line, newline-terminated.
std::vector<Sentence> ReadSentences(const std::string& path);
void WriteSentences(const std::string& path, std::span<const Sentence> sentences);

// Dataset manifest: one JSON record per line,
// {"split": ..., "sentence": ..., "anomaly": {...}?}.
struct ManifestRecord {
  std::string split;
  Sentence sentence;
  std::optional<AnomalySpec> anomaly;
};

std::string ManifestLine(const ManifestRecord& record);
ManifestRecord ParseManifestLine(std::string_view line);

}  // namespace grex

#endif  // GREX_CORPUS_H_
