#include "grex/policy_training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "grex/errors.h"
#include "json.hpp"

namespace grex {
namespace {

// Parse driver shared by sampling and gradient replay. Keeps the interned
// pair id of every adjacent atom pair.
class Episode {
 public:
  Episode(std::string_view sentence, TabularPolicy& policy)
      : policy_(policy), tree_(sentence) {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      frontier_.push_back(static_cast<int>(i));
    }
    for (std::size_t i = 0; i + 1 < frontier_.size(); ++i) {
      pairs_.push_back(Intern(i));
    }
  }

  bool done() const { return frontier_.size() <= 1; }

  // Softmax over all candidates, laid out [index * kNumActionKinds + kind].
  const std::vector<double>& Probabilities(double temperature) {
    const auto weights = policy_.weights();
    logits_.resize(pairs_.size() * kNumActionKinds);
    double top = -INFINITY;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      for (std::size_t k = 0; k < kNumActionKinds; ++k) {
        const double z = weights[pairs_[i] * kNumActionKinds + k] / temperature;
        logits_[i * kNumActionKinds + k] = z;
        top = std::max(top, z);
      }
    }
    double total = 0.0;
    for (double& z : logits_) {
      z = std::exp(z - top);
      total += z;
    }
    for (double& z : logits_) z /= total;
    return logits_;
  }

  std::size_t pair_at(std::size_t index) const { return pairs_[index]; }

  void Apply(std::size_t slot) {
    const std::size_t i = slot / kNumActionKinds;
    const auto kind = static_cast<ActionKind>(slot % kNumActionKinds);
    frontier_[i] = tree_.Merge(frontier_[i], frontier_[i + 1], kind);
    frontier_.erase(frontier_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    pairs_.erase(pairs_.begin() + static_cast<std::ptrdiff_t>(i));
    if (i > 0) pairs_[i - 1] = Intern(i - 1);
    if (i + 1 < frontier_.size()) pairs_[i] = Intern(i);
  }

  ParseTree Release() && { return std::move(tree_); }

 private:
  std::size_t Intern(std::size_t index) {
    return policy_.InternPair(tree_.node(frontier_[index]).atom,
                              tree_.node(frontier_[index + 1]).atom);
  }

  TabularPolicy& policy_;
  ParseTree tree_;
  std::vector<int> frontier_;
  std::vector<std::size_t> pairs_;
  std::vector<double> logits_;
};

std::size_t SampleSlot(const std::vector<double>& probs, std::mt19937_64& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  // Rounding left u just above the total; take the last candidate with mass.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return 0;
}

struct SampledEpisode {
  std::size_t sentence = 0;
  ParseTree tree;
  std::vector<std::size_t> slots;
};

}  // namespace

TabularPolicy::TabularPolicy(std::size_t truncation, double temperature,
                             double default_score)
    : truncation_(truncation),
      temperature_(temperature),
      default_score_(default_score) {}

std::string TabularPolicy::Key(std::string_view left,
                               std::string_view right) const {
  std::string key(left.substr(0, truncation_));
  key.push_back('\0');
  key.append(right.substr(0, truncation_));
  return key;
}

double TabularPolicy::Score(std::string_view left, std::string_view right,
                            ActionKind kind) const {
  const std::ptrdiff_t pair = FindPair(left, right);
  if (pair < 0) return default_score_;
  return weight(static_cast<std::size_t>(pair), kind);
}

std::size_t TabularPolicy::InternPair(std::string_view left,
                                      std::string_view right) {
  auto [it, inserted] = pair_ids_.try_emplace(Key(left, right), pair_labels_.size());
  if (inserted) {
    pair_labels_.emplace_back(left.substr(0, truncation_),
                              right.substr(0, truncation_));
    weights_.resize(weights_.size() + kNumActionKinds, default_score_);
  }
  return it->second;
}

std::ptrdiff_t TabularPolicy::FindPair(std::string_view left,
                                       std::string_view right) const {
  auto it = pair_ids_.find(Key(left, right));
  return it == pair_ids_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

void TabularPolicy::set_weight(std::string_view left, std::string_view right,
                               ActionKind kind, double value) {
  const std::size_t pair = InternPair(left, right);
  weights_[pair * kNumActionKinds + static_cast<std::size_t>(kind)] = value;
}

std::string TabularPolicy::ToText() const {
  std::string out;
  nlohmann::ordered_json header;
  header["version"] = kFormatVersion;
  header["truncation"] = truncation_;
  header["temperature"] = temperature_;
  header["default_score"] = default_score_;
  out += header.dump() + '\n';
  // Sorted by label so the file does not depend on interning order.
  std::vector<std::size_t> order(pair_labels_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pair_labels_[a] < pair_labels_[b];
  });
  for (std::size_t pair : order) {
    for (ActionKind kind : kAllActionKinds) {
      const double w = weight(pair, kind);
      if (w == default_score_) continue;
      nlohmann::ordered_json rec;
      rec["left"] = pair_labels_[pair].first;
      rec["right"] = pair_labels_[pair].second;
      rec["kind"] = ActionKindName(kind);
      rec["weight"] = w;
      out += rec.dump() + '\n';
    }
  }
  return out;
}

TabularPolicy TabularPolicy::FromText(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  try {
    if (!std::getline(in, line)) throw ParseError("policy: missing header");
    const auto header = nlohmann::json::parse(line);
    if (header.at("version").get<int>() != kFormatVersion) {
      throw ParseError("policy: unsupported version");
    }
    TabularPolicy policy(header.at("truncation").get<std::size_t>(),
                         header.at("temperature").get<double>(),
                         header.value("default_score", 0.0));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      auto kind = ActionKindFromName(rec.at("kind").get<std::string>());
      if (!kind) throw ParseError("policy: unknown kind");
      policy.set_weight(rec.at("left").get<std::string>(),
                        rec.at("right").get<std::string>(), *kind,
                        rec.at("weight").get<double>());
    }
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy: ") + e.what());
  }
}

void TabularPolicy::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << ToText();
  if (!out) throw IoError("write failed: " + path);
}

TabularPolicy TabularPolicy::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromText(buffer.str());
}

bool operator==(const TabularPolicy& a, const TabularPolicy& b) {
  if (a.truncation_ != b.truncation_ || a.temperature_ != b.temperature_ ||
      a.default_score_ != b.default_score_) {
    return false;
  }
  auto nondefault = [](const TabularPolicy& p) {
    std::map<std::tuple<std::string, std::string, std::size_t>, double> out;
    for (std::size_t pair = 0; pair < p.pair_labels_.size(); ++pair) {
      for (std::size_t k = 0; k < kNumActionKinds; ++k) {
        const double w = p.weights_[pair * kNumActionKinds + k];
        if (w != p.default_score_) {
          out[{p.pair_labels_[pair].first, p.pair_labels_[pair].second, k}] = w;
        }
      }
    }
    return out;
  };
  return nondefault(a) == nondefault(b);
}

std::string_view RewardBasisName(RewardBasis basis) {
  return basis == RewardBasis::kAtom ? "atom" : "rule";
}

std::optional<RewardBasis> RewardBasisFromName(std::string_view name) {
  if (name == "atom") return RewardBasis::kAtom;
  if (name == "rule") return RewardBasis::kRule;
  return std::nullopt;
}

void AddAtomCounts(FrequencyTable& table, const ParseTree& tree) {
  for (std::size_t id = tree.num_tokens(); id < tree.size(); ++id) {
    ++table[tree.node(static_cast<int>(id)).atom];
  }
}

std::string FrequencyKey(const ParseTree& tree, int id, RewardBasis basis) {
  const auto& node = tree.node(id);
  if (basis == RewardBasis::kAtom) return node.atom;
  std::string key = node.atom;
  key += '\x1f';
  key += tree.node(node.left).atom;
  key += '\x1f';
  key += tree.node(node.right).atom;
  key += '\x1f';
  key += static_cast<char>('0' + static_cast<int>(node.kind));
  return key;
}

void AddCounts(FrequencyTable& table, const ParseTree& tree, RewardBasis basis) {
  if (basis == RewardBasis::kAtom) {
    AddAtomCounts(table, tree);
    return;
  }
  for (std::size_t id = tree.num_tokens(); id < tree.size(); ++id) {
    ++table[FrequencyKey(tree, static_cast<int>(id), basis)];
  }
}

FrequencyTable AtomFrequencyTable(std::span<const ParseTree> trees) {
  FrequencyTable table;
  for (const auto& tree : trees) AddAtomCounts(table, tree);
  return table;
}

double EpisodeReward(const ParseTree& tree, const FrequencyTable& freq,
                     const TrainConfig& cfg) {
  double reward = 0.0;
  for (std::size_t id = tree.num_tokens(); id < tree.size(); ++id) {
    const auto& node = tree.node(static_cast<int>(id));
    auto it = cfg.reward_basis == RewardBasis::kAtom
                  ? freq.find(node.atom)
                  : freq.find(FrequencyKey(tree, static_cast<int>(id), cfg.reward_basis));
    const double count = it == freq.end() ? 0.0 : static_cast<double>(it->second);
    const double term = std::log(count + cfg.smoothing);
    reward += IsAnchored(node.kind) ? cfg.alpha_anchor * term : term;
  }
  return reward;
}

TabularPolicy Train(std::span<const Sentence> corpus, const TrainConfig& cfg,
                    std::vector<EpochStats>* history) {
  TabularPolicy policy(cfg.truncation, cfg.temperature);
  std::mt19937_64 rng(cfg.seed);
  const int samples = std::max(1, cfg.samples_per_sentence);
  const double temperature = cfg.temperature;

  std::vector<SampledEpisode> episodes;
  std::vector<double> gradient;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    episodes.clear();
    FrequencyTable freq;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      for (int j = 0; j < samples; ++j) {
        Episode episode(corpus[s], policy);
        SampledEpisode sampled;
        sampled.sentence = s;
        while (!episode.done()) {
          const std::size_t slot = SampleSlot(episode.Probabilities(temperature), rng);
          sampled.slots.push_back(slot);
          episode.Apply(slot);
        }
        sampled.tree = std::move(episode).Release();
        AddCounts(freq, sampled.tree, cfg.reward_basis);
        episodes.push_back(std::move(sampled));
      }
    }

    std::vector<double> rewards(episodes.size());
    double reward_sum = 0.0;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
      rewards[e] = EpisodeReward(episodes[e].tree, freq, cfg);
      reward_sum += rewards[e];
    }
    if (history != nullptr) {
      history->push_back({epoch, reward_sum / static_cast<double>(episodes.size()),
                          freq.size()});
    }

    gradient.assign(policy.weights().size(), 0.0);
    const double scale = 1.0 / (static_cast<double>(corpus.size()) * samples);
    for (std::size_t first = 0; first < episodes.size(); first += static_cast<std::size_t>(samples)) {
      double baseline = 0.0;
      for (int j = 0; j < samples; ++j) baseline += rewards[first + static_cast<std::size_t>(j)];
      baseline /= samples;
      const std::size_t steps = episodes[first].slots.size();
      if (steps == 0) continue;
      for (int j = 0; j < samples; ++j) {
        const auto& ep = episodes[first + static_cast<std::size_t>(j)];
        const double advantage =
            (rewards[first + static_cast<std::size_t>(j)] - baseline) /
            static_cast<double>(steps);
        if (advantage == 0.0) continue;
        const double coeff = advantage * scale / temperature;
        Episode replay(corpus[ep.sentence], policy);
        for (std::size_t slot : ep.slots) {
          const auto& probs = replay.Probabilities(temperature);
          for (std::size_t c = 0; c < probs.size(); ++c) {
            const std::size_t w = replay.pair_at(c / kNumActionKinds) * kNumActionKinds +
                                  c % kNumActionKinds;
            gradient[w] -= coeff * probs[c];
          }
          const std::size_t chosen = replay.pair_at(slot / kNumActionKinds) * kNumActionKinds +
                                     slot % kNumActionKinds;
          gradient[chosen] += coeff;
          replay.Apply(slot);
        }
      }
    }
    auto weights = policy.mutable_weights();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] += cfg.learning_rate * gradient[i];
    }
  }
  return policy;
}

}  // namespace grex
