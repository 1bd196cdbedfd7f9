#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include <Eigen/Core>

namespace wavesel {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Radial constant-velocity motion, state = (range m, range rate m/s).
struct MotionModel {
  Mat2 transition = Mat2::Identity();
  Vec2 noise_input = Vec2::Zero();  // maps scalar acceleration noise into the state
  Mat2 process_noise = Mat2::Zero();
  double dt = 0;

  // accel_std is the standard deviation of the per-CPI acceleration in m/s^2
  static MotionModel constant_velocity(double dt, double accel_std);
  void validate() const;
};

struct TrackState {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  std::uint64_t step = 0;
};

struct TrackUpdate {
  TrackState state;
  Vec2 innovation = Vec2::Zero();
  Mat2 innovation_cov = Mat2::Zero();
};

bool is_psd(const Mat2& m, double tol = 1e-12);

TrackState predict(const TrackState& s, const MotionModel& model);
// Predict then correct with measurement z = H x + v, v ~ N(0, R). Joseph-form covariance.
TrackUpdate track_update(const TrackState& s, const Vec2& z, const Mat2& r, const MotionModel& model,
                         const Mat2& h = Mat2::Identity());

enum class Objective { kTrack, kEntropy };

struct CostConfig {
  Objective objective = Objective::kTrack;
  Mat2 lambda = Mat2::Identity();  // weights on (range, range-rate) innovation
  double nu_ref = 1.0;             // quadratic form that saturates the cost
  double g_max = 1.0;
  double detection_threshold = 5.0;  // entropy grid, energy units
  double softness = 1.0;
  int entropy_sign = -1;  // -1: cost grows with positional entropy

  void validate() const;
};

// clip(nu' L nu / nu_ref, 0, 1) * g_max
double innovation_cost(const Vec2& nu, const Mat2& lambda, double nu_ref, double g_max);

// Presence probabilities from logistic scores of cell energies, normalized over the grid.
std::vector<double> presence_distribution(std::span<const double> energies, double threshold, double softness);
// sign * sum p log p, scaled by log(#cells) into [-g_max, g_max].
double entropy_cost(std::span<const double> energies, double threshold, double softness, int sign, double g_max);

// Observation symbol = channel_symbol * n_quality + quality bin. `bins` holds n_quality - 1
// ascending innovation thresholds; a missed detection is always the last bin.
int quantize_observation(int channel_symbol, double innovation, bool detected, std::span<const double> bins,
                         int n_quality);

double nees(const Vec2& error, const Mat2& cov);
// Two-sided chi-square band for the mean NEES of n independent tracks of dimension dof.
std::pair<double, double> nees_band(int n_tracks, int dof, double confidence = 0.95);

// Innovation covariance of the steady-state filter for this motion model and noise.
Mat2 steady_state_innovation_cov(const MotionModel& model, const Mat2& r, const Mat2& h = Mat2::Identity());
// E[innovation_cost(nu)] for nu ~ N(0, s), by Gauss-Hermite quadrature.
double expected_innovation_cost(const Mat2& s, const Mat2& lambda, double nu_ref, double g_max);

}  // namespace wavesel
