#include "grex/corpus.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_set>

#include "grex/errors.h"
#include "json.hpp"

namespace grex {
namespace {

constexpr std::string_view kSimpleJsonLetters = "abc";
constexpr std::string_view kLowercase = "abcdefghijklmnopqrstuvwxyz";

char Pick(std::mt19937_64& rng, std::string_view alphabet) {
  std::uniform_int_distribution<std::size_t> dist(0, alphabet.size() - 1);
  return alphabet[dist(rng)];
}

int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Appends one object at `depth` to `out`; false if the depth cap is exceeded.
bool AppendObject(std::mt19937_64& rng, const SimpleJsonParams& params,
                  int depth, std::string& out) {
  if (depth > params.max_depth) return false;
  out.push_back('{');
  if (std::bernoulli_distribution(params.leaf_probability)(rng)) {
    out.push_back(Pick(rng, kSimpleJsonLetters));
  } else {
    const int children =
        UniformInt(rng, params.min_children, params.max_children);
    for (int i = 0; i < children; ++i) {
      if (!AppendObject(rng, params, depth + 1, out)) return false;
    }
  }
  out.push_back('}');
  return true;
}

Sentence DrawSimpleJson(std::mt19937_64& rng, const SimpleJsonParams& params) {
  while (true) {
    Sentence s;
    if (AppendObject(rng, params, 1, s)) return s;
  }
}

// S -> '{' ('a' | 'b' | 'c' | S+) '}' ; advances `pos` past one object.
bool MatchObject(std::string_view s, std::size_t& pos) {
  if (pos >= s.size() || s[pos] != '{') return false;
  ++pos;
  if (pos < s.size() && kSimpleJsonLetters.find(s[pos]) != std::string_view::npos) {
    ++pos;
  } else {
    if (pos >= s.size() || s[pos] != '{') return false;
    while (pos < s.size() && s[pos] == '{') {
      if (!MatchObject(s, pos)) return false;
    }
  }
  if (pos >= s.size() || s[pos] != '}') return false;
  ++pos;
  return true;
}

bool IsStreamNoise(char c) {
  return c == '{' || c == '}' || (c >= 'a' && c <= 'z');
}

constexpr std::size_t kStreamMinPad = 5;
constexpr std::size_t kStreamMaxPad = 20;

bool IsSimpleJsonStream(std::string_view s) {
  if (!std::all_of(s.begin(), s.end(), IsStreamNoise)) return false;
  for (std::size_t pre = kStreamMinPad; pre <= kStreamMaxPad; ++pre) {
    for (std::size_t suf = kStreamMinPad; suf <= kStreamMaxPad; ++suf) {
      if (pre + suf >= s.size()) continue;
      if (IsSimpleJson(s.substr(pre, s.size() - pre - suf))) return true;
    }
  }
  return false;
}

bool IsBracket(char c) { return c == '{' || c == '}'; }
bool IsSimpleJsonLetter(char c) { return c == 'a' || c == 'b' || c == 'c'; }
bool IsSeparator(char c) { return c == '/' || c == ' '; }

constexpr std::array<std::string_view, 4> kAnomalyNames = {
    "delete-bracket", "delete-letter", "insert-letter", "delete-separator"};

}  // namespace

std::string_view FormatName(Format format) {
  switch (format) {
    case Format::kSimpleJson:
      return "simple-json";
    case Format::kKeyList:
      return "key-list";
    case Format::kSimpleJsonStream:
      return "simple-json-stream";
  }
  return {};
}

std::optional<Format> FormatFromName(std::string_view name) {
  for (Format f : {Format::kSimpleJson, Format::kKeyList,
                   Format::kSimpleJsonStream}) {
    if (FormatName(f) == name) return f;
  }
  return std::nullopt;
}

std::vector<Sentence> GenerateSimpleJson(std::uint64_t seed, std::size_t count,
                                         const SimpleJsonParams& params) {
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(DrawSimpleJson(rng, params));
  return out;
}

bool IsSimpleJson(std::string_view s) {
  std::size_t pos = 0;
  return MatchObject(s, pos) && pos == s.size();
}

std::vector<Sentence> GenerateKeyList(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sentence s;
    const int keys = UniformInt(rng, 1, 5);
    for (int k = 0; k < keys; ++k) {
      if (k > 0) s.push_back(' ');
      s.push_back('/');
      const int letters = UniformInt(rng, 1, 3);
      for (int j = 0; j < letters; ++j) s.push_back(Pick(rng, kLowercase));
    }
    out.push_back(std::move(s));
  }
  return out;
}

bool IsKeyList(std::string_view s) {
  std::size_t pos = 0;
  int keys = 0;
  while (true) {
    if (pos >= s.size() || s[pos] != '/') return false;
    ++pos;
    std::size_t letters = 0;
    while (pos < s.size() && s[pos] >= 'a' && s[pos] <= 'z') {
      ++pos;
      ++letters;
    }
    if (letters < 1 || letters > 3) return false;
    ++keys;
    if (pos == s.size()) break;
    if (s[pos] != ' ') return false;
    ++pos;
  }
  return keys >= 1 && keys <= 5;
}

std::vector<StreamSentence> GenerateSimpleJsonStreamWithBodies(
    std::uint64_t seed, std::size_t count) {
  static constexpr std::string_view kNoise = "abcdefghijklmnopqrstuvwxyz{}";
  std::mt19937_64 rng(seed);
  const SimpleJsonParams params;
  std::vector<StreamSentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    StreamSentence s;
    const int prefix = UniformInt(rng, kStreamMinPad, kStreamMaxPad);
    for (int j = 0; j < prefix; ++j) s.text.push_back(Pick(rng, kNoise));
    s.body_begin = s.text.size();
    s.text += DrawSimpleJson(rng, params);
    s.body_end = s.text.size();
    const int suffix = UniformInt(rng, kStreamMinPad, kStreamMaxPad);
    for (int j = 0; j < suffix; ++j) s.text.push_back(Pick(rng, kNoise));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> GenerateSimpleJsonStream(std::uint64_t seed,
                                               std::size_t count) {
  std::vector<Sentence> out;
  out.reserve(count);
  for (auto& s : GenerateSimpleJsonStreamWithBodies(seed, count)) {
    out.push_back(std::move(s.text));
  }
  return out;
}

std::vector<Sentence> Generate(Format format, std::uint64_t seed,
                               std::size_t count) {
  switch (format) {
    case Format::kSimpleJson:
      return GenerateSimpleJson(seed, count);
    case Format::kKeyList:
      return GenerateKeyList(seed, count);
    case Format::kSimpleJsonStream:
      return GenerateSimpleJsonStream(seed, count);
  }
  return {};
}

bool IsNominal(Format format, std::string_view s) {
  switch (format) {
    case Format::kSimpleJson:
      return IsSimpleJson(s);
    case Format::kKeyList:
      return IsKeyList(s);
    case Format::kSimpleJsonStream:
      return IsSimpleJsonStream(s);
  }
  return false;
}

std::string_view AnomalyKindName(AnomalyKind kind) {
  return kAnomalyNames[static_cast<std::size_t>(kind)];
}

std::optional<AnomalyKind> AnomalyKindFromName(std::string_view name) {
  for (std::size_t i = 0; i < kAnomalyNames.size(); ++i) {
    if (kAnomalyNames[i] == name) return static_cast<AnomalyKind>(i);
  }
  return std::nullopt;
}

std::vector<AnomalyKind> DefaultAnomalyKinds(Format format) {
  if (format == Format::kKeyList) return {AnomalyKind::kDeleteSeparator};
  return {AnomalyKind::kDeleteBracket, AnomalyKind::kDeleteLetter,
          AnomalyKind::kInsertLetter};
}

CorruptedSentence InjectAnomaly(std::string_view s, AnomalyKind kind,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CorruptedSentence out;
  out.spec.kind = kind;
  if (kind == AnomalyKind::kInsertLetter) {
    const std::size_t pos =
        std::uniform_int_distribution<std::size_t>(0, s.size())(rng);
    const char letter = Pick(rng, kSimpleJsonLetters);
    out.sentence = std::string(s.substr(0, pos)) + letter +
                   std::string(s.substr(pos));
    out.spec.position = pos;
    out.spec.token = letter;
    return out;
  }

  bool (*eligible)(char) = nullptr;
  switch (kind) {
    case AnomalyKind::kDeleteBracket:
      eligible = IsBracket;
      break;
    case AnomalyKind::kDeleteLetter:
      eligible = IsSimpleJsonLetter;
      break;
    case AnomalyKind::kDeleteSeparator:
      eligible = IsSeparator;
      break;
    case AnomalyKind::kInsertLetter:
      break;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (eligible(s[i])) candidates.push_back(i);
  }
  if (candidates.empty() || s.size() < 2) {
    throw NoEligibleToken("no token eligible for " +
                          std::string(AnomalyKindName(kind)) + " in '" +
                          std::string(s) + "'");
  }
  const std::size_t pos = candidates[std::uniform_int_distribution<std::size_t>(
      0, candidates.size() - 1)(rng)];
  out.sentence = std::string(s.substr(0, pos)) + std::string(s.substr(pos + 1));
  out.spec.position = pos;
  out.spec.token = s[pos];
  return out;
}

DatasetSplit MakeSplits(std::span<const Sentence> sentences,
                        const SplitSizes& sizes, std::uint64_t seed) {
  if (sentences.size() < sizes.train) {
    throw InsufficientUniqueSentences("need " + std::to_string(sizes.train) +
                                      " training sentences, got " +
                                      std::to_string(sentences.size()));
  }
  DatasetSplit split;
  split.train.assign(sentences.begin(),
                     sentences.begin() + static_cast<std::ptrdiff_t>(sizes.train));

  const std::size_t needed = sizes.unique_total();
  std::vector<Sentence> unique;
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = sizes.train; i < sentences.size() && unique.size() < needed; ++i) {
    if (seen.insert(sentences[i]).second) unique.push_back(sentences[i]);
  }
  if (unique.size() < needed) {
    throw InsufficientUniqueSentences(
        "need " + std::to_string(needed) + " distinct sentences, got " +
        std::to_string(unique.size()));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(unique.begin(), unique.end(), rng);

  auto take = [&, next = std::size_t{0}](std::size_t n) mutable {
    std::vector<Sentence> part(
        std::make_move_iterator(unique.begin() + static_cast<std::ptrdiff_t>(next)),
        std::make_move_iterator(unique.begin() + static_cast<std::ptrdiff_t>(next + n)));
    next += n;
    return part;
  };
  split.extract = take(sizes.extract);
  split.validate = take(sizes.validate);
  split.evaluate_nominal = take(sizes.evaluate_nominal);
  split.evaluate_anomalous = take(sizes.evaluate_anomalous);
  return split;
}

DatasetSplit GenerateDataset(Format format, std::uint64_t seed,
                             const SplitSizes& sizes) {
  // Generators are prefix-stable per seed, so growing the pool only appends.
  std::size_t pool = sizes.train + 2 * sizes.unique_total() + 16;
  for (int attempt = 0;; ++attempt) {
    auto sentences = Generate(format, seed, pool);
    try {
      return MakeSplits(sentences, sizes, seed ^ 0x9e3779b97f4a7c15ULL);
    } catch (const InsufficientUniqueSentences&) {
      if (attempt >= 6) throw;
      pool *= 4;
    }
  }
}

std::vector<Sentence> ReadSentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Sentence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void WriteSentences(const std::string& path, std::span<const Sentence> sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& s : sentences) out << s << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::string ManifestLine(const ManifestRecord& record) {
  nlohmann::ordered_json j;
  j["split"] = record.split;
  j["sentence"] = record.sentence;
  if (record.anomaly) {
    j["anomaly"] = {{"kind", AnomalyKindName(record.anomaly->kind)},
                    {"position", record.anomaly->position},
                    {"token", std::string(1, record.anomaly->token)}};
  }
  return j.dump();
}

ManifestRecord ParseManifestLine(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestRecord record;
    record.split = j.at("split").get<std::string>();
    record.sentence = j.at("sentence").get<std::string>();
    if (j.contains("anomaly")) {
      const auto& a = j.at("anomaly");
      auto kind = AnomalyKindFromName(a.at("kind").get<std::string>());
      const auto token = a.at("token").get<std::string>();
      if (!kind || token.size() != 1) throw ParseError("bad anomaly record");
      record.anomaly = AnomalySpec{*kind, a.at("position").get<std::size_t>(), token[0]};
    }
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest record: ") + e.what());
  }
}

}  // namespace grex
