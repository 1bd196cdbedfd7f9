#pragma once

#include <cstdint>
#include <vector>

#include "wavesel/context_tree.hpp"
#include "wavesel/exploration.hpp"
#include "wavesel/oracle_dp.hpp"
#include "wavesel/policy.hpp"
#include "wavesel/rng.hpp"

namespace wavesel {

struct BaselineConfig {
  Alphabet alphabet{};
  double gamma = 0.95;
  double g_max = 1.0;
  ExplorationSchedule exploration{};
  int refresh = 100;  // first-order re-solve cadence
  std::uint64_t seed = 1;
};

// Active Lempel-Ziv learner: an LZ78 phrase tree whose nodes carry their own KT
// estimates and value backups. Nothing is shared across depths.
class ActiveLz final : public WaveformPolicy {
 public:
  struct Node {
    std::uint32_t parent = 0;
    JointSymbol key{};
    std::vector<std::uint32_t> children;
    std::vector<std::uint32_t> counts;  // [wav * n_obs + obs]
    std::vector<double> cost_mean;
    std::vector<double> q;
    double value = 0;
  };

  explicit ActiveLz(const BaselineConfig& cfg);
  std::string_view name() const override { return "active_lz"; }
  int select_waveform(int obs) override;
  void observe_transition(int obs, int wav, double cost, int next_obs) override;
  std::size_t model_size() const override { return nodes_.size(); }

  // Lengths of the completed phrases in order.
  const std::vector<int>& phrase_lengths() const { return phrase_lengths_; }
  const Node& node(std::uint32_t id) const { return nodes_.at(id); }
  std::vector<double> action_values(std::uint32_t id) const;

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;
  std::uint32_t find_child(std::uint32_t id, JointSymbol key) const;
  double kt(const Node& n, int wav, int obs) const;

  BaselineConfig cfg_;
  Rng rng_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> phrase_;  // nodes visited in the current phrase
  int prev_wav_ = kNoWaveform;
  bool phrase_ends_ = false;
  bool awaiting_observe_ = false;
  std::uint64_t k_ = 0;
  std::vector<int> phrase_lengths_;
};

// Certainty-equivalent learner that models the observation stream as first-order and
// periodically solves the estimated MDP.
class FirstOrderLearner final : public WaveformPolicy {
 public:
  explicit FirstOrderLearner(const BaselineConfig& cfg);
  std::string_view name() const override { return "first_order"; }
  int select_waveform(int obs) override;
  void observe_transition(int obs, int wav, double cost, int next_obs) override;
  std::size_t model_size() const override { return counts_.size(); }

  // Rebuilds the estimated MDP and its action values now.
  void refresh();
  const std::vector<double>& q_values() const { return q_; }  // [y * n_wav + w]
  ExpandedMdp estimated_mdp() const;

 private:
  std::size_t cell(int y, int w, int y2) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(cfg_.alphabet.n_wav) +
            static_cast<std::size_t>(w)) * static_cast<std::size_t>(cfg_.alphabet.n_obs) +
           static_cast<std::size_t>(y2);
  }

  BaselineConfig cfg_;
  Rng rng_;
  std::vector<std::uint32_t> counts_;
  std::vector<double> cost_mean_;
  std::vector<double> q_;
  std::uint64_t k_ = 0;
  std::uint64_t transitions_ = 0;
  bool awaiting_observe_ = false;
};

class RandomPolicy final : public WaveformPolicy {
 public:
  RandomPolicy(int n_wav, std::uint64_t seed);
  std::string_view name() const override { return "random"; }
  int select_waveform(int obs) override;
  void observe_transition(int, int, double, int) override {}

 private:
  int n_wav_;
  Rng rng_;
};

// Acts with a solved expanded-state policy once U observations are available.
class OraclePolicy final : public WaveformPolicy {
 public:
  OraclePolicy(ExpandedMdp shape, DpSolution solution, std::uint64_t seed);
  std::string_view name() const override { return "oracle"; }
  int select_waveform(int obs) override;
  void observe_transition(int obs, int wav, double cost, int next_obs) override;

 private:
  ExpandedMdp shape_;
  DpSolution solution_;
  Rng rng_;
  std::vector<int> obs_;
  std::vector<int> wav_;
};

}  // namespace wavesel
