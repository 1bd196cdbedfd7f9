#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavesel/context_tree.hpp"
#include "wavesel/exploration.hpp"
#include "wavesel/policy.hpp"
#include "wavesel/rng.hpp"

namespace wavesel {

// Where the next phrase starts once the current one ends.
enum class PhraseRestart {
  kSlide,  // drop the oldest symbol of the ended phrase and keep going
  kReset,  // start over from the newest observation alone
};

struct CtwConfig {
  Alphabet alphabet{};
  int depth = 4;
  double gamma = 0.95;
  double g_max = 1.0;
  ExplorationSchedule exploration{};
  bool limited = false;  // keep only the most recent waveform in contexts
  PhraseRestart restart = PhraseRestart::kSlide;
  std::uint64_t seed = 1;
};

// Context-tree-weighting waveform selector with phrase-based value backups.
class CtwLearner final : public WaveformPolicy {
 public:
  explicit CtwLearner(const CtwConfig& cfg);

  std::string_view name() const override { return cfg_.limited ? "ctw_limited" : "ctw"; }
  int select_waveform(int obs) override;
  void observe_transition(int obs, int wav, double cost, int next_obs) override;
  std::size_t model_size() const override { return tree_.size(); }

  const ContextTree& tree() const { return tree_; }
  const CtwConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return k_; }
  std::uint64_t phrase_start() const { return phrase_start_; }
  std::uint64_t phrase_index() const { return phrase_index_; }
  double cumulative_cost() const { return cumulative_cost_; }

  // Context the next decision will use (valid after select_waveform).
  Context phrase_context() const;
  // Full-depth window ending at time t (0-based), waveform masking applied.
  Context window(std::uint64_t t, int depth) const;

  // Backed-up action value of ctx under each waveform, computed from current estimates.
  std::vector<double> action_values(std::span<const JointSymbol> ctx) const;

  nlohmann::json checkpoint() const;
  static CtwLearner restore(const nlohmann::json& j);

 private:
  struct Pending {
    std::uint64_t t;
    int wav;
    double cost;
    int next_obs;
  };

  int obs_at(std::uint64_t t) const { return obs_[t - base_]; }
  int wav_at(std::uint64_t t) const { return wav_[t - base_]; }
  Context context_between(std::uint64_t first, std::uint64_t last) const;
  Context next_context(std::span<const JointSymbol> ctx, int wav, int obs_next) const;
  double cost_estimate(ContextTree::NodeId id, int wav, int obs_next) const;
  double value_of(std::span<const JointSymbol> ctx) const;
  void backup(std::span<const JointSymbol> ctx);
  void end_phrase();

  CtwConfig cfg_;
  ContextTree tree_;
  Rng rng_;
  double j_bound_;

  std::uint64_t base_ = 0;    // time index of obs_[0]
  std::vector<int> obs_;      // y_t
  std::vector<int> wav_;      // w_t (one shorter than obs_ between select and observe)
  std::uint64_t k_ = 0;       // decisions taken
  std::uint64_t phrase_start_ = 0;
  std::uint64_t phrase_index_ = 0;  // phrases completed so far
  double cumulative_cost_ = 0.0;
  bool awaiting_observe_ = false;
  bool phrase_ends_ = false;
  std::vector<Pending> pending_;
};

}  // namespace wavesel
