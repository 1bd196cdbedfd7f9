#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "wavesel/kernel.hpp"
#include "wavesel/rng.hpp"

namespace wavesel {

// Probability that a CPI yields a detection at the given SINR.
double detection_probability(double sinr_db, double midpoint_db = 5.0, double width_db = 2.0);

// SINR as a table of (channel state, waveform band).
struct SinrTable {
  double clean_db = 20.0;
  double partial_db = 8.0;
  double jammed_db = -3.0;
  bool partial_adjacent = false;  // neighbouring bands are partially jammed

  double lookup(int channel, int band) const;
};

enum class SceneKind { kAdversarial, kMtd, kTabular };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& s);

struct SceneSpec {
  SceneKind kind = SceneKind::kAdversarial;
  int n_channel = 2;
  int n_wav = 2;
  int n_quality = 1;

  // adversarial: emitter moves toward the band most occupied by recent waveforms
  double p_adapt = 0.9;
  double weight_older = 1.0;  // w_{k-1}
  double weight_newer = 0.5;  // w_k
  double weight_stay = 0.25;  // current channel state

  // mtd: P(c' | history) = sum_j lag_weights[j] * base[c_{k-j}][c']
  std::vector<double> lag_weights{0.5, 0.3, 0.2};
  std::vector<double> base;  // n_channel x n_channel, row-major

  // tabular
  ChannelKernel table;

  // observation of the channel: misread probability, spread uniformly over other states
  double misread = 0.0;
  // quality bin 0 means a detection passing the innovation gate
  double gate_pass = 0.99;
  SinrTable sinr{};

  // target hypothesis grid (delay x Doppler cells, plus a no-target hypothesis)
  int grid_delay = 8;
  int grid_doppler = 8;
  double p_move = 0.5;
  double p_vanish = 0.0;
  double p_appear = 1.0;

  int order() const;
  void validate() const;
};

struct SceneStep {
  int channel = 0;
  int target_cell = 0;
  double sinr_db = 0;
  int channel_observed = 0;
  int obs = 0;  // channel_observed * n_quality + quality bin drawn from the model
};

// Stateful scene: channel and target histories plus the waveform history.
class Scene {
 public:
  explicit Scene(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  int order() const { return kernel_.order; }
  int n_obs() const { return spec_.n_channel * spec_.n_quality; }
  int band(int wav) const { return wav % spec_.n_channel; }
  double sinr_db(int channel, int wav) const;
  int n_cells() const { return spec_.grid_delay * spec_.grid_doppler + 1; }
  int no_target() const { return n_cells() - 1; }

  // Exact channel transition table. Throws UnsupportedOperation when too large to tabulate.
  const ChannelKernel& true_kernel() const;
  // Target hypothesis kernel, n_cells x n_cells.
  std::vector<double> target_kernel() const;
  // Observation model with a caller-supplied expected cost per (channel, wav, quality).
  ObservationModel observation_model(std::vector<double> cost) const;

  // Uniform padding of the histories; must precede step().
  void reset(Rng& rng);
  // Overwrite histories directly (oldest first); w_hist has order-1 entries.
  void set_history(std::vector<int> c_hist, std::vector<int> w_hist, int target_cell);
  bool ready() const { return ready_; }

  SceneStep step(int wav, Rng& rng);

  std::vector<double> next_channel_dist(int wav) const;
  std::vector<double> next_obs_dist(int wav) const;
  double p_quality(int channel, int wav, int q) const;

  const std::deque<int>& channel_history() const { return c_hist_; }
  const std::deque<int>& wav_history() const { return w_hist_; }
  int target_cell() const { return target_; }

 private:
  ChannelKernel build_kernel() const;

  SceneSpec spec_;
  ChannelKernel kernel_;
  std::vector<double> target_table_;
  std::deque<int> c_hist_;
  std::deque<int> w_hist_;
  int target_ = 0;
  bool ready_ = false;
};

}  // namespace wavesel
