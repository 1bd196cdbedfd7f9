#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wavesel/parallel.hpp"
#include "wavesel/rng.hpp"

namespace wavesel {

using cplx = std::complex<double>;

enum class WaveformFamily { kLfm, kZadoffChu, kNlfm };

// Phase law of the generalized NLFM chirp, phase = 2*pi*b*xi(t/t_r).
enum class NlfmLaw {
  kQuadratic,   // xi(x) = x^2
  kHyperbolic,  // xi(x) = -ln(1 - x), needs t_r beyond the pulse support
  kExponential, // xi(x) = e^x - 1
};

struct WaveformSpec {
  WaveformFamily family = WaveformFamily::kLfm;
  double duration = 10e-6;    // T
  double bandwidth = 1e6;     // B (LFM sweep; chip rate M/T is used for Zadoff-Chu)
  int chirp_sign = +1;
  int code_length = 7;        // M
  int root = 1;               // q
  double fm_rate = 4.0;       // b
  double rise_time = 1e-6;    // t_f
  double reference = 10e-6;   // t_r
  NlfmLaw law = NlfmLaw::kQuadratic;
  int pulses = 1;             // N_p
  double pri = 40e-6;         // T_r

  void validate() const;
  // Support of one pulse in seconds (includes NLFM ramps).
  double pulse_support() const;
  // Frequency extent used by the oversampling guard.
  double occupied_bandwidth() const;

  // "lfm T=1e-5 B=1e6 sign=+1 Np=128 Tr=4e-4", "zc T=1e-5 M=7 q=1", "nlfm T=1e-5 b=4 tf=1e-6 tr=1e-5 xi=exp"
  static WaveformSpec parse(std::string_view text);
  std::string to_string() const;
};

std::string_view family_name(WaveformFamily f);

struct SampledEnvelope {
  std::vector<cplx> samples;
  double sample_rate = 0;
  WaveformSpec spec;

  double dt() const { return 1.0 / sample_rate; }
  std::size_t size() const { return samples.size(); }
  // Sample times are centred on the middle of the window.
  double time(std::size_t n) const;
  double energy() const;
};

SampledEnvelope synthesize(const WaveformSpec& spec, double sample_rate);

// Magnitudes of the periodic ambiguity function on a delay x Doppler grid.
struct AmbiguitySurface {
  std::vector<double> delays;
  std::vector<double> dopplers;
  std::vector<double> magnitude;  // [i_delay * n_doppler + i_doppler]

  double at(std::size_t i_delay, std::size_t i_doppler) const {
    return magnitude[i_delay * dopplers.size() + i_doppler];
  }
  void write_csv(std::ostream& os) const;
};

// Complex AF value at one point. Fractional delays use an exact Fourier shift.
cplx ambiguity(const SampledEnvelope& env, double delay, double doppler);
AmbiguitySurface ambiguity_surface(const SampledEnvelope& env, std::span<const double> delays,
                                   std::span<const double> dopplers,
                                   Execution exec = Execution::kParallel);

struct Moments {
  double mean_time = 0, mean_time_sq = 0;
  double mean_freq = 0, mean_freq_sq = 0;
  double mean_time_freq = 0;

  double time_spread() const { return mean_time_sq - mean_time * mean_time; }
  double freq_spread() const { return mean_freq_sq - mean_freq * mean_freq; }
  double coupling() const { return mean_time_freq - mean_freq * mean_time; }
};

Moments envelope_moments(const SampledEnvelope& env);

struct Fim {
  Eigen::Matrix2d matrix;  // parameters (delay s, Doppler Hz)
  double snr = 0;
  Moments moments;
};

// FIM for delay and Doppler at linear SNR eta.
Fim fisher_information(const Moments& m, double snr);
Fim fisher_information(const SampledEnvelope& env, double snr);

// Delay/Doppler to range/radial-velocity scaling.
Eigen::Matrix2d range_velocity_map(double carrier_hz);

struct MeasurementCovariance {
  Fim fim;
  Eigen::Matrix2d covariance;  // T I^-1 T'
};

MeasurementCovariance measurement_covariance(const Moments& m, double snr, const Eigen::Matrix2d& t_map);
MeasurementCovariance measurement_covariance(const SampledEnvelope& env, double snr,
                                             const Eigen::Matrix2d& t_map);

struct Effectiveness {
  double mean = 0;
  double std_error = 0;
  std::vector<double> samples;
};

using CovarianceSampler = std::function<Eigen::Matrix2d(Rng&)>;

// Monte-Carlo estimate of E_P[max_w log det(I + R_w^-1 P)]. Sample i draws from its own
// stream derived from (seed, i), so the result does not depend on thread count.
Effectiveness library_effectiveness(std::span<const Eigen::Matrix2d> crlb, const CovarianceSampler& sampler,
                                    int n_mc, std::uint64_t seed, Execution exec = Execution::kParallel);

// Cyclic autocorrelation of a code sequence, normalized to 1 at lag 0.
std::vector<double> cyclic_autocorrelation(std::span<const cplx> code);
std::vector<cplx> zadoff_chu(int length, int root);

}  // namespace wavesel
