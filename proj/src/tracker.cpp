#include "wavesel/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "wavesel/errors.hpp"

namespace wavesel {

MotionModel MotionModel::constant_velocity(double dt, double accel_std) {
  if (!(dt > 0)) throw ValidationError("CPI duration must be positive");
  if (!(accel_std >= 0)) throw ValidationError("acceleration noise must be non-negative");
  MotionModel m;
  m.dt = dt;
  m.transition << 1, dt, 0, 1;
  m.noise_input << 0.5 * dt * dt, dt;
  m.process_noise = accel_std * accel_std * m.noise_input * m.noise_input.transpose();
  return m;
}

void MotionModel::validate() const {
  if (!(dt > 0)) throw ValidationError("CPI duration must be positive");
  if (!is_psd(process_noise)) throw ValidationError("process noise is not positive semidefinite");
}

bool is_psd(const Mat2& m, double tol) {
  if (!m.allFinite()) return false;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;
  const Eigen::SelfAdjointEigenSolver<Mat2> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol * scale;
}

TrackState predict(const TrackState& s, const MotionModel& model) {
  TrackState out;
  out.mean = model.transition * s.mean;
  const Mat2 p = model.transition * s.cov * model.transition.transpose() + model.process_noise;
  out.cov = 0.5 * (p + p.transpose());
  out.step = s.step + 1;
  return out;
}

TrackUpdate track_update(const TrackState& s, const Vec2& z, const Mat2& r, const MotionModel& model,
                         const Mat2& h) {
  if (!is_psd(r)) throw ValidationError("measurement covariance is not positive semidefinite");
  const TrackState pred = predict(s, model);
  TrackUpdate out;
  out.innovation = z - h * pred.mean;
  out.innovation_cov = h * pred.cov * h.transpose() + r;
  out.innovation_cov = 0.5 * (out.innovation_cov + out.innovation_cov.transpose());
  const Eigen::LDLT<Mat2> solve(out.innovation_cov);
  if (solve.info() != Eigen::Success) throw SingularityError("innovation covariance is singular");
  const Mat2 gain = solve.solve(h * pred.cov).transpose();
  out.state.mean = pred.mean + gain * out.innovation;
  const Mat2 a = Mat2::Identity() - gain * h;
  const Mat2 p = a * pred.cov * a.transpose() + gain * r * gain.transpose();
  out.state.cov = 0.5 * (p + p.transpose());
  out.state.step = pred.step;
  return out;
}

void CostConfig::validate() const {
  if (!(g_max > 0)) throw ConfigError("g_max must be positive");
  if (!(nu_ref > 0)) throw ConfigError("innovation normalizer must be positive");
  if (!is_psd(lambda)) throw ConfigError("innovation weight matrix must be positive semidefinite");
  if (!(softness > 0)) throw ConfigError("presence softness must be positive");
  if (entropy_sign != 1 && entropy_sign != -1) throw ConfigError("entropy sign must be +1 or -1");
}

double innovation_cost(const Vec2& nu, const Mat2& lambda, double nu_ref, double g_max) {
  const double q = nu.dot(lambda * nu) / nu_ref;
  return std::clamp(q, 0.0, 1.0) * g_max;
}

std::vector<double> presence_distribution(std::span<const double> energies, double threshold, double softness) {
  if (energies.empty()) throw ValidationError("energy grid is empty");
  std::vector<double> p;
  p.reserve(energies.size());
  double total = 0;
  for (double e : energies) {
    if (!(e >= 0)) throw ValidationError("cell energies must be non-negative");
    p.push_back(1.0 / (1.0 + std::exp(-(e - threshold) / softness)));
    total += p.back();
  }
  // every score underflowed: nothing to prefer, so spread evenly
  if (!(total > 0)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

double entropy_cost(std::span<const double> energies, double threshold, double softness, int sign, double g_max) {
  const auto p = presence_distribution(energies, threshold, softness);
  if (p.size() == 1) return 0.0;
  double plogp = 0;
  for (double v : p)
    if (v > 0) plogp += v * std::log(v);
  const double cost = sign * plogp / std::log(static_cast<double>(p.size())) * g_max;
  return std::clamp(cost, -g_max, g_max);
}

int quantize_observation(int channel_symbol, double innovation, bool detected, std::span<const double> bins,
                         int n_quality) {
  if (n_quality < 1) throw ValidationError("need at least one quality bin");
  if (static_cast<int>(bins.size()) != n_quality - 1)
    throw ValidationError("quality thresholds must number n_quality - 1");
  if (!std::is_sorted(bins.begin(), bins.end())) throw ValidationError("quality thresholds must be ascending");
  int q = n_quality - 1;
  if (detected) q = static_cast<int>(std::upper_bound(bins.begin(), bins.end(), innovation) - bins.begin());
  return channel_symbol * n_quality + q;
}

double nees(const Vec2& error, const Mat2& cov) { return error.dot(cov.ldlt().solve(error)); }

std::pair<double, double> nees_band(int n_tracks, int dof, double confidence) {
  const boost::math::chi_squared dist(static_cast<double>(n_tracks) * dof);
  const double tail = 0.5 * (1.0 - confidence);
  return {boost::math::quantile(dist, tail) / n_tracks, boost::math::quantile(boost::math::complement(dist, tail)) / n_tracks};
}

Mat2 steady_state_innovation_cov(const MotionModel& model, const Mat2& r, const Mat2& h) {
  Mat2 p = r;
  Mat2 s = Mat2::Zero();
  for (int i = 0; i < 100'000; ++i) {
    const Mat2 pred = model.transition * p * model.transition.transpose() + model.process_noise;
    s = h * pred * h.transpose() + r;
    const Mat2 gain = pred * h.transpose() * s.inverse();
    const Mat2 a = Mat2::Identity() - gain * h;
    Mat2 next = a * pred * a.transpose() + gain * r * gain.transpose();
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change <= 1e-13 * (1.0 + p.cwiseAbs().maxCoeff())) break;
  }
  return s;
}

double expected_innovation_cost(const Mat2& s, const Mat2& lambda, double nu_ref, double g_max) {
  // Gauss-Hermite rule from the eigen-decomposition of the Jacobi matrix
  constexpr int n = 24;
  static const auto rule = [] {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) jac(i, i - 1) = jac(i - 1, i) = std::sqrt(0.5 * i);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e(jac);
    std::vector<std::pair<double, double>> r;
    for (int i = 0; i < n; ++i) {
      const double v = e.eigenvectors()(0, i);
      r.emplace_back(e.eigenvalues()(i), v * v);  // weights sum to one
    }
    return r;
  }();
  const Eigen::SelfAdjointEigenSolver<Mat2> eig(0.5 * (s + s.transpose()));
  const Mat2 root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  double acc = 0;
  for (const auto& [xi, wi] : rule)
    for (const auto& [xj, wj] : rule) {
      const Vec2 z(std::sqrt(2.0) * xi, std::sqrt(2.0) * xj);
      acc += wi * wj * innovation_cost(root * z, lambda, nu_ref, g_max);
    }
  return acc;
}

}  // namespace wavesel
