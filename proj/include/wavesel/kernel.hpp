#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace wavesel {

// Mixed-radix helpers; digit 0 is the oldest entry.
std::size_t encode_digits(std::span<const int> digits, int radix);
std::vector<int> decode_digits(std::size_t index, int radix, int count);
std::size_t int_pow(std::size_t base, int exp);

// Order-U channel kernel P(c' | c_{k-U+1..k}, w_{k-U+1..k}) as a dense table.
struct ChannelKernel {
  int order = 1;
  int n_channel = 1;
  int n_wav = 1;
  std::vector<double> table;  // [(c_hist * n_wav^order + w_hist) * n_channel + c']

  std::size_t n_rows() const;
  std::size_t row_index(std::span<const int> c_hist, std::span<const int> w_hist) const;
  std::span<const double> row(std::size_t r) const;
  std::span<const double> row(std::span<const int> c_hist, std::span<const int> w_hist) const;
  void validate(double tol = 1e-12) const;

  nlohmann::json to_json() const;
  static ChannelKernel from_json(const nlohmann::json& j);
};

// How a next channel state turns into an observation symbol and what it costs.
// Observation symbol y = observed_channel * n_quality + quality_bin.
struct ObservationModel {
  int n_channel = 1;
  int n_wav = 1;
  int n_quality = 1;
  std::vector<double> confusion;  // [c * n_channel + c_observed]
  std::vector<double> quality;    // [(c * n_wav + w) * n_quality + q]
  std::vector<double> cost;       // [(c * n_wav + w) * n_quality + q], expected stage cost

  int n_obs() const { return n_channel * n_quality; }
  double p_confusion(int c, int c_obs) const;
  double p_quality(int c, int w, int q) const;
  double expected_cost(int c, int w, int q) const;
  // P(y | c, w) marginalized over quality bins and channel confusion.
  double p_obs(int c, int w, int y) const;
  void validate(double tol = 1e-12) const;

  // Noise-free channel reading with a single quality bin.
  static ObservationModel direct(int n_channel, int n_wav, std::vector<double> cost_by_channel_wav);
};

}  // namespace wavesel
