#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "wavesel/kernel.hpp"
#include "wavesel/parallel.hpp"
#include "wavesel/rng.hpp"

namespace wavesel {

// MDP over expanded states (y_{k-U+1..k}, w_{k-U+1..k-1}). States are encoded with the
// observation digits (oldest first) as the high part and waveform digits as the low part.
struct ExpandedMdp {
  int order = 1;
  int n_obs = 1;
  int n_wav = 1;
  std::vector<double> trans;  // [(s * n_wav + w) * n_obs + y']
  std::vector<double> cost;   // same layout

  std::size_t n_states() const;
  std::size_t n_pairs() const { return n_states() * static_cast<std::size_t>(n_wav); }
  std::size_t next_state(std::size_t s, int w, int y_next) const;
  std::size_t encode(std::span<const int> obs_hist, std::span<const int> wav_hist) const;
  std::vector<int> obs_history(std::size_t s) const;
  std::vector<int> wav_history(std::size_t s) const;
  double p(std::size_t s, int w, int y) const { return trans[idx(s, w, y)]; }
  double g(std::size_t s, int w, int y) const { return cost[idx(s, w, y)]; }
  void validate(double tol = 1e-12) const;

 private:
  std::size_t idx(std::size_t s, int w, int y) const {
    return (s * static_cast<std::size_t>(n_wav) + static_cast<std::size_t>(w)) *
               static_cast<std::size_t>(n_obs) +
           static_cast<std::size_t>(y);
  }
};

enum class HiddenStateMode {
  kDirect,     // the channel part of each observation is the channel state
  kFiltered,   // posterior over the channel window from prior and observation likelihoods
};

struct ExpandOptions {
  HiddenStateMode mode = HiddenStateMode::kDirect;
  std::size_t max_pairs = 1'000'000;
};

// Builds the expanded MDP of order U from a channel kernel and an observation model.
ExpandedMdp expand_kernel(const ChannelKernel& kernel, const ObservationModel& obs, int order,
                          const ExpandOptions& opts = {});

struct AverageCost {
  double lambda = 0;
  std::vector<double> per_state;  // long-run average cost from each initial state
  bool communicating = true;      // per_state values agree within 1e-6
  bool converged = true;
};

struct DpSolution {
  int order = 1;
  int n_obs = 1;
  int n_wav = 1;
  double gamma = 0;
  std::vector<double> value;          // J*
  std::vector<double> q;              // [s * n_wav + w]
  std::vector<int> policy;            // lowest-index minimizer
  std::vector<std::uint64_t> optimal; // bitmask of waveforms within tolerance
  AverageCost average;
  int iterations = 0;
  std::vector<double> sup_changes;    // ||J_{n+1} - J_n|| per sweep

  std::vector<int> optimal_action_set(std::size_t state) const;
  bool is_optimal(std::size_t state, int w) const;
  nlohmann::json to_json(const ExpandedMdp& mdp) const;
};

inline constexpr double kTieTolerance = 1e-9;

// One Bellman sweep: writes T(J) into out and the per-pair backups into q.
void bellman_sweep(const ExpandedMdp& mdp, double gamma, std::span<const double> value,
                   std::span<double> out, std::span<double> q, Execution exec);

DpSolution value_iterate(const ExpandedMdp& mdp, double gamma, double tol = 1e-10,
                         Execution exec = Execution::kParallel, int max_iterations = 10'000'000);

// Stage cost and transition matrix of the chain induced by a stationary policy.
AverageCost long_run_average_cost(const ExpandedMdp& mdp, std::span<const int> policy,
                                   std::uint64_t horizon = 100'000, std::uint64_t seed = 1);

// Plain simulation estimate of the average cost starting from `start`.
double trajectory_average_cost(const ExpandedMdp& mdp, std::span<const int> policy,
                               std::size_t start, std::uint64_t horizon, Rng& rng);

}  // namespace wavesel
