#pragma once

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace wavesel::detail {

// Owns one FFTW plan pair for a fixed length. Planning goes through a global lock since
// FFTW's planner is not thread-safe; executing with new-array calls is.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    std::vector<std::complex<double>> a(n), b(n);
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), raw(a.data()), raw(b.data()), FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_1d(static_cast<int>(n), raw(a.data()), raw(b.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const { return n_; }

  // Unnormalized forward transform.
  std::vector<std::complex<double>> forward(const std::vector<std::complex<double>>& in) const {
    std::vector<std::complex<double>> in_copy(in), out(n_);
    fftw_execute_dft(fwd_, raw(in_copy.data()), raw(out.data()));
    return out;
  }
  // Inverse transform including the 1/n factor.
  std::vector<std::complex<double>> inverse(const std::vector<std::complex<double>>& in) const {
    std::vector<std::complex<double>> in_copy(in), out(n_);
    fftw_execute_dft(inv_, raw(in_copy.data()), raw(out.data()));
    const double s = 1.0 / static_cast<double>(n_);
    for (auto& v : out) v *= s;
    return out;
  }

 private:
  static fftw_complex* raw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n_;
  fftw_plan fwd_{};
  fftw_plan inv_{};
};

// DFT bin frequencies in Hz, negative half last.
inline std::vector<double> fft_frequencies(std::size_t n, double sample_rate) {
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = k <= (n - 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    f[k] = kk * sample_rate / static_cast<double>(n);
  }
  return f;
}

}  // namespace wavesel::detail
