#ifndef GREX_POLICY_TRAINING_H_
#define GREX_POLICY_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grex/parse_tree.h"

namespace grex {

// Softmax merge policy with one weight per (left label, right label, kind).
// Labels are truncated to their first `truncation` characters before lookup;
// unseen pairs score `default_score`.
class TabularPolicy : public Policy {
 public:
  static constexpr int kFormatVersion = 1;

  explicit TabularPolicy(std::size_t truncation = 8, double temperature = 1.0,
                         double default_score = 0.0);

  double Score(std::string_view left, std::string_view right,
               ActionKind kind) const override;

  // Id of the truncated label pair, interning it at the default score if new.
  std::size_t InternPair(std::string_view left, std::string_view right);
  // -1 when the pair has never been interned.
  std::ptrdiff_t FindPair(std::string_view left, std::string_view right) const;

  double weight(std::size_t pair, ActionKind kind) const {
    return weights_[pair * kNumActionKinds + static_cast<std::size_t>(kind)];
  }
  void set_weight(std::string_view left, std::string_view right,
                  ActionKind kind, double value);
  std::span<double> mutable_weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }

  std::size_t num_pairs() const { return pair_labels_.size(); }
  std::size_t truncation() const { return truncation_; }
  double temperature() const { return temperature_; }
  double default_score() const { return default_score_; }

  // Versioned JSON-lines form: a header record {version, truncation,
  // temperature, default_score}, then one {left, right, kind, weight} record
  // per nonzero weight.
  std::string ToText() const;
  static TabularPolicy FromText(std::string_view text);
  void Save(const std::string& path) const;
  static TabularPolicy Load(const std::string& path);

  friend bool operator==(const TabularPolicy& a, const TabularPolicy& b);

 private:
  std::string Key(std::string_view left, std::string_view right) const;

  std::size_t truncation_;
  double temperature_;
  double default_score_;
  std::unordered_map<std::string, std::size_t> pair_ids_;
  std::vector<std::pair<std::string, std::string>> pair_labels_;
  std::vector<double> weights_;
};

// What the reward counts: atoms, or whole merges (atom plus the two child
// atoms and the merge kind).
enum class RewardBasis { kAtom, kRule };

std::string_view RewardBasisName(RewardBasis basis);  // atom, rule
std::optional<RewardBasis> RewardBasisFromName(std::string_view name);

struct TrainConfig {
  int epochs = 150;
  std::uint64_t seed = 1;
  double learning_rate = 6.0;
  double temperature = 1.0;
  // Multiplies the reward of anchored merges.
  double alpha_anchor = 0.4;
  // Added to atom counts before taking the log.
  double smoothing = 1.0;
  // Sampled parses per sentence and epoch; their mean reward is the baseline.
  int samples_per_sentence = 4;
  std::size_t truncation = 8;
  RewardBasis reward_basis = RewardBasis::kRule;
};

// Count of every internal-node atom over `trees`.
using FrequencyTable = std::unordered_map<std::string, std::size_t>;
FrequencyTable AtomFrequencyTable(std::span<const ParseTree> trees);
void AddAtomCounts(FrequencyTable& table, const ParseTree& tree);

// Table key of internal node `id` under `basis`.
std::string FrequencyKey(const ParseTree& tree, int id, RewardBasis basis);
void AddCounts(FrequencyTable& table, const ParseTree& tree, RewardBasis basis);

// Sum over internal nodes of log(count(key) + smoothing), with anchored
// nodes weighted by alpha_anchor. The key is the node's atom unless
// cfg.reward_basis says otherwise.
double EpisodeReward(const ParseTree& tree, const FrequencyTable& freq,
                     const TrainConfig& cfg);

// Per-epoch summary for diagnostics.
struct EpochStats {
  int epoch = 0;
  double mean_reward = 0.0;
  std::size_t distinct_atoms = 0;
};

// Reward-driven training of a TabularPolicy: each epoch samples parses,
// rebuilds the atom frequency table from them, scores every episode, and
// takes a REINFORCE step on the softmax weights with the per-sentence mean
// reward as baseline. Deterministic for a given corpus and config.
TabularPolicy Train(std::span<const Sentence> corpus, const TrainConfig& cfg,
                    std::vector<EpochStats>* history = nullptr);

}  // namespace grex

#endif  // GREX_POLICY_TRAINING_H_
