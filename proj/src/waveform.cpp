#include "wavesel/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "fft.hpp"
#include "wavesel/errors.hpp"

namespace wavesel {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLight = 299'792'458.0;

double xi(NlfmLaw law, double x) {
  switch (law) {
    case NlfmLaw::kQuadratic: return x * x;
    case NlfmLaw::kHyperbolic: return -std::log1p(-x);
    case NlfmLaw::kExponential: return std::expm1(x);
  }
  return 0;
}

double xi_slope(NlfmLaw law, double x) {
  switch (law) {
    case NlfmLaw::kQuadratic: return 2 * x;
    case NlfmLaw::kHyperbolic: return 1.0 / (1.0 - x);
    case NlfmLaw::kExponential: return std::exp(x);
  }
  return 0;
}

std::string_view law_name(NlfmLaw law) {
  switch (law) {
    case NlfmLaw::kQuadratic: return "quad";
    case NlfmLaw::kHyperbolic: return "hyp";
    case NlfmLaw::kExponential: return "exp";
  }
  return "?";
}

// Samples of a single pulse centred on its own middle sample.
std::vector<cplx> pulse_samples(const WaveformSpec& w, double fs) {
  std::vector<cplx> out;
  switch (w.family) {
    case WaveformFamily::kLfm: {
      const auto n = static_cast<std::size_t>(std::llround(w.duration * fs));
      const double k = w.chirp_sign * w.bandwidth / w.duration;
      for (std::size_t j = 0; j < n; ++j) {
        const double t = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) / fs;
        out.push_back(std::polar(1.0, kPi * k * t * t));
      }
      break;
    }
    case WaveformFamily::kZadoffChu: {
      const auto spc = static_cast<std::size_t>(std::llround(w.duration * fs / w.code_length));
      const auto code = zadoff_chu(w.code_length, w.root);
      for (const auto& c : code) out.insert(out.end(), spc, c);
      break;
    }
    case WaveformFamily::kNlfm: {
      const double half = 0.5 * w.duration;
      const auto n = static_cast<std::size_t>(std::llround(w.pulse_support() * fs));
      for (std::size_t j = 0; j < n; ++j) {
        const double t = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) / fs;
        const double over = std::abs(t) - half;
        double a = 1.0;
        if (over > 0) a = w.rise_time > 0 ? std::max(0.0, 1.0 - over / w.rise_time) : 0.0;
        out.push_back(std::polar(a, 2 * kPi * w.fm_rate * xi(w.law, t / w.reference)));
      }
      break;
    }
  }
  return out;
}

void check_grid(const SampledEnvelope& env, double delay, double doppler) {
  const double span = env.spec.pulses * env.spec.pri;
  if (std::abs(delay) > span * (1 + 1e-12))
    throw ValidationError("delay outside the unambiguous range of the pulse train");
  if (std::abs(doppler) > 0.5 * env.sample_rate * (1 + 1e-12))
    throw ValidationError("Doppler outside the sampled band");
}

// Envelope advanced by `delay`, i.e. s(t + delay), treating the window as one period.
std::vector<cplx> advanced(const SampledEnvelope& env, const std::vector<cplx>& spectrum,
                           const detail::FftPlan& plan, double delay) {
  const std::size_t n = env.size();
  const double m = delay * env.sample_rate;
  const double r = std::round(m);
  if (std::abs(m - r) < 1e-9) {
    const auto shift = static_cast<long long>(r);
    std::vector<cplx> out(n);
    const auto nn = static_cast<long long>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = env.samples[static_cast<std::size_t>(((static_cast<long long>(i) + shift) % nn + nn) % nn)];
    return out;
  }
  const auto f = detail::fft_frequencies(n, env.sample_rate);
  std::vector<cplx> rot(n);
  for (std::size_t k = 0; k < n; ++k) rot[k] = spectrum[k] * std::polar(1.0, 2 * kPi * f[k] * delay);
  return plan.inverse(rot);
}

cplx doppler_sum(const SampledEnvelope& env, const std::vector<cplx>& product,
                 const std::vector<std::size_t>& support, double doppler) {
  cplx acc{0, 0};
  for (auto i : support) acc += product[i] * std::polar(1.0, 2 * kPi * doppler * env.time(i));
  return acc * env.dt();
}

}  // namespace

std::string_view family_name(WaveformFamily f) {
  switch (f) {
    case WaveformFamily::kLfm: return "lfm";
    case WaveformFamily::kZadoffChu: return "zc";
    case WaveformFamily::kNlfm: return "nlfm";
  }
  return "?";
}

double WaveformSpec::pulse_support() const {
  return family == WaveformFamily::kNlfm ? duration + 2 * rise_time : duration;
}

double WaveformSpec::occupied_bandwidth() const {
  switch (family) {
    case WaveformFamily::kLfm: return std::max(bandwidth, 1.0 / duration);
    case WaveformFamily::kZadoffChu: return code_length / duration;
    case WaveformFamily::kNlfm: {
      const double half = 0.5 * pulse_support();
      double lo = 1e300, hi = -1e300;
      for (int i = 0; i <= 1000; ++i) {
        const double t = -half + 2 * half * i / 1000.0;
        const double f = fm_rate / reference * xi_slope(law, t / reference);
        lo = std::min(lo, f);
        hi = std::max(hi, f);
      }
      return std::max(hi - lo, 1.0 / duration);
    }
  }
  return bandwidth;
}

void WaveformSpec::validate() const {
  if (!(duration > 0) || !(pri > 0)) throw ValidationError("waveform duration and PRI must be positive");
  if (pulses < 1) throw ValidationError("pulse count must be at least 1");
  if (!(bandwidth >= 0)) throw ValidationError("bandwidth must be non-negative");
  if (chirp_sign != 1 && chirp_sign != -1) throw ValidationError("chirp sign must be +1 or -1");
  if (pulse_support() > pri * (1 + 1e-12)) throw ValidationError("pulse does not fit in its PRI");
  if (family == WaveformFamily::kZadoffChu) {
    if (code_length < 1) throw ValidationError("code length must be positive");
    if (std::gcd(root, code_length) != 1) throw ValidationError("Zadoff-Chu root must be coprime with the length");
  }
  if (family == WaveformFamily::kNlfm) {
    if (!(rise_time >= 0) || rise_time > duration / 10 * (1 + 1e-12))
      throw ValidationError("NLFM rise time must lie in [0, T/10]");
    if (!(reference > 0)) throw ValidationError("NLFM reference time must be positive");
    if (law == NlfmLaw::kHyperbolic && 0.5 * pulse_support() >= reference)
      throw ValidationError("hyperbolic NLFM needs a reference time beyond the pulse support");
  }
}

WaveformSpec WaveformSpec::parse(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  std::string tok;
  WaveformSpec w;
  if (!(is >> tok)) throw ConfigError("empty waveform spec");
  if (tok == "lfm") w.family = WaveformFamily::kLfm;
  else if (tok == "zc" || tok == "zadoff_chu") w.family = WaveformFamily::kZadoffChu;
  else if (tok == "nlfm") w.family = WaveformFamily::kNlfm;
  else throw ConfigError("unknown waveform family: " + tok);
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("waveform parameter without '=': " + tok);
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    auto num = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument("");
        return v;
      } catch (...) {
        throw ConfigError("bad value for waveform parameter " + key + ": " + val);
      }
    };
    if (key == "T") w.duration = num();
    else if (key == "B") w.bandwidth = num();
    else if (key == "sign") w.chirp_sign = static_cast<int>(num());
    else if (key == "M") w.code_length = static_cast<int>(num());
    else if (key == "q") w.root = static_cast<int>(num());
    else if (key == "b") w.fm_rate = num();
    else if (key == "tf") w.rise_time = num();
    else if (key == "tr") w.reference = num();
    else if (key == "Np") w.pulses = static_cast<int>(num());
    else if (key == "Tr") w.pri = num();
    else if (key == "xi") {
      if (val == "quad" || val == "0") w.law = NlfmLaw::kQuadratic;
      else if (val == "hyp" || val == "1") w.law = NlfmLaw::kHyperbolic;
      else if (val == "exp" || val == "2") w.law = NlfmLaw::kExponential;
      else throw ConfigError("unknown NLFM phase law: " + val);
    } else {
      throw ConfigError("unknown waveform parameter: " + key);
    }
  }
  w.validate();
  return w;
}

std::string WaveformSpec::to_string() const {
  std::string out = fmt::format("{} T={:.17g}", family_name(family), duration);
  switch (family) {
    case WaveformFamily::kLfm: out += fmt::format(" B={:.17g} sign={:+d}", bandwidth, chirp_sign); break;
    case WaveformFamily::kZadoffChu: out += fmt::format(" M={} q={}", code_length, root); break;
    case WaveformFamily::kNlfm:
      out += fmt::format(" b={:.17g} tf={:.17g} tr={:.17g} xi={}", fm_rate, rise_time, reference, law_name(law));
      break;
  }
  out += fmt::format(" Np={} Tr={:.17g}", pulses, pri);
  return out;
}

double SampledEnvelope::time(std::size_t n) const {
  return (static_cast<double>(n) - 0.5 * static_cast<double>(samples.size() - 1)) / sample_rate;
}

double SampledEnvelope::energy() const {
  double e = 0;
  for (const auto& v : samples) e += std::norm(v);
  return e * dt();
}

std::vector<cplx> zadoff_chu(int length, int root) {
  if (length < 1 || std::gcd(root, length) != 1) throw ValidationError("invalid Zadoff-Chu parameters");
  std::vector<cplx> code;
  for (int m = 0; m < length; ++m) {
    const double mm = m;
    const double phase = length % 2 ? -kPi * root * mm * (mm + 1) / length : -kPi * root * mm * mm / length;
    code.push_back(std::polar(1.0, phase));
  }
  return code;
}

std::vector<double> cyclic_autocorrelation(std::span<const cplx> code) {
  const std::size_t m = code.size();
  double e = 0;
  for (const auto& c : code) e += std::norm(c);
  std::vector<double> r(m);
  for (std::size_t lag = 0; lag < m; ++lag) {
    cplx acc{0, 0};
    for (std::size_t i = 0; i < m; ++i) acc += code[i] * std::conj(code[(i + lag) % m]);
    r[lag] = std::abs(acc) / e;
  }
  return r;
}

SampledEnvelope synthesize(const WaveformSpec& spec, double sample_rate) {
  spec.validate();
  if (!(sample_rate >= 4 * spec.occupied_bandwidth() * (1 - 1e-12)))
    throw ValidationError("sample rate below four times the occupied bandwidth");
  if (spec.family == WaveformFamily::kZadoffChu && std::llround(spec.duration * sample_rate / spec.code_length) < 1)
    throw ValidationError("sample rate gives less than one sample per chip");

  const auto pulse = pulse_samples(spec, sample_rate);
  if (pulse.empty()) throw ValidationError("pulse has no samples at this rate");
  const double slot = spec.pri * sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.pulses * slot));
  SampledEnvelope env;
  env.sample_rate = sample_rate;
  env.spec = spec;
  env.samples.assign(n, cplx{0, 0});
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.pulses));
  for (int p = 0; p < spec.pulses; ++p) {
    const auto start = static_cast<long long>(std::llround(p * slot + 0.5 * (slot - static_cast<double>(pulse.size()))));
    for (std::size_t j = 0; j < pulse.size(); ++j) {
      const auto idx = static_cast<std::size_t>(start) + j;
      if (start < 0 || idx >= n) throw ValidationError("pulse falls outside the sampling window");
      env.samples[idx] = pulse[j] * scale;
    }
  }
  const double e = env.energy();
  if (!(e > 0)) throw ValidationError("synthesized envelope has zero energy");
  const double norm = 1.0 / std::sqrt(e);
  for (auto& v : env.samples) v *= norm;
  return env;
}

cplx ambiguity(const SampledEnvelope& env, double delay, double doppler) {
  check_grid(env, delay, doppler);
  const detail::FftPlan plan(env.size());
  const auto spectrum = plan.forward(env.samples);
  const auto moved = advanced(env, spectrum, plan, delay);
  std::vector<cplx> product(env.size());
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < env.size(); ++i) {
    product[i] = env.samples[i] * std::conj(moved[i]);
    if (product[i] != cplx{0, 0}) support.push_back(i);
  }
  return doppler_sum(env, product, support, doppler);
}

AmbiguitySurface ambiguity_surface(const SampledEnvelope& env, std::span<const double> delays,
                                   std::span<const double> dopplers, Execution exec) {
  for (double d : delays) check_grid(env, d, 0);
  for (double v : dopplers) check_grid(env, 0, v);
  AmbiguitySurface surf;
  surf.delays.assign(delays.begin(), delays.end());
  surf.dopplers.assign(dopplers.begin(), dopplers.end());
  const std::size_t nd = delays.size(), nv = dopplers.size();
  surf.magnitude.assign(nd * nv, 0.0);
  const detail::FftPlan plan(env.size());
  const auto spectrum = plan.forward(env.samples);

  auto row = [&](std::ptrdiff_t id) {
    const auto i = static_cast<std::size_t>(id);
    const auto moved = advanced(env, spectrum, plan, delays[i]);
    std::vector<cplx> product(env.size());
    std::vector<std::size_t> support;
    for (std::size_t n = 0; n < env.size(); ++n) {
      product[n] = env.samples[n] * std::conj(moved[n]);
      if (std::norm(product[n]) > 0) support.push_back(n);
    }
    for (std::size_t j = 0; j < nv; ++j)
      surf.magnitude[i * nv + j] = std::min(std::abs(doppler_sum(env, product, support, dopplers[j])), 1.0 + 1e-6);
  };
  const auto count = static_cast<std::ptrdiff_t>(nd);
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) row(i);
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i) row(i);
  }
  return surf;
}

void AmbiguitySurface::write_csv(std::ostream& os) const {
  os << "# wavesel-ambiguity v1\n";
  os << "delay_s";
  for (double v : dopplers) os << fmt::format(",{:.17g}", v);
  os << '\n';
  for (std::size_t i = 0; i < delays.size(); ++i) {
    os << fmt::format("{:.17g}", delays[i]);
    for (std::size_t j = 0; j < dopplers.size(); ++j) os << fmt::format(",{:.17g}", at(i, j));
    os << '\n';
  }
}

Moments envelope_moments(const SampledEnvelope& env) {
  const std::size_t n = env.size();
  const double dt = env.dt();
  Moments m;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::norm(env.samples[i]) * dt;
    const double t = env.time(i);
    m.mean_time += t * p;
    m.mean_time_sq += t * t * p;
  }
  const detail::FftPlan plan(n);
  const auto spec = plan.forward(env.samples);
  const auto f = detail::fft_frequencies(n, env.sample_rate);
  const double df = env.sample_rate / static_cast<double>(n);
  std::vector<cplx> deriv_spec(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = std::norm(spec[k]) * dt * dt * df;
    m.mean_freq += f[k] * p;
    m.mean_freq_sq += f[k] * f[k] * p;
    deriv_spec[k] = spec[k] * cplx{0, 2 * kPi * f[k]};
  }
  // Instantaneous-frequency moment from Im(s* s') = |s|^2 d(phase)/dt.
  const auto deriv = plan.inverse(deriv_spec);
  for (std::size_t i = 0; i < n; ++i)
    m.mean_time_freq += env.time(i) * std::imag(std::conj(env.samples[i]) * deriv[i]) * dt / (2 * kPi);
  return m;
}

Fim fisher_information(const Moments& m, double snr) {
  if (!(snr > 0)) throw ValidationError("SNR must be positive");
  const double s = snr * 4 * kPi * kPi;
  Fim out;
  out.snr = snr;
  out.moments = m;
  out.matrix << s * m.freq_spread(), s * m.coupling(), s * m.coupling(), s * m.time_spread();
  return out;
}

Fim fisher_information(const SampledEnvelope& env, double snr) {
  return fisher_information(envelope_moments(env), snr);
}

Eigen::Matrix2d range_velocity_map(double carrier_hz) {
  if (!(carrier_hz > 0)) throw ValidationError("carrier frequency must be positive");
  Eigen::Matrix2d t = Eigen::Matrix2d::Zero();
  t(0, 0) = kLight / 2;
  t(1, 1) = kLight / (2 * carrier_hz);
  return t;
}

MeasurementCovariance measurement_covariance(const Moments& m, double snr, const Eigen::Matrix2d& t_map) {
  MeasurementCovariance out;
  out.fim = fisher_information(m, snr);
  const auto& i = out.fim.matrix;
  const double scale = std::abs(i(0, 0) * i(1, 1));
  const double det = i.determinant();
  if (!(i(0, 0) > 0) || !(i(1, 1) > 0) || !(det > 1e-12 * scale))
    throw SingularityError(fmt::format(
        "Fisher information is singular (freq spread {:.3g} Hz^2, time spread {:.3g} s^2, coupling {:.3g})",
        m.freq_spread(), m.time_spread(), m.coupling()));
  Eigen::Matrix2d cov = t_map * i.inverse() * t_map.transpose();
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

MeasurementCovariance measurement_covariance(const SampledEnvelope& env, double snr,
                                             const Eigen::Matrix2d& t_map) {
  return measurement_covariance(envelope_moments(env), snr, t_map);
}

Effectiveness library_effectiveness(std::span<const Eigen::Matrix2d> crlb, const CovarianceSampler& sampler,
                                    int n_mc, std::uint64_t seed, Execution exec) {
  if (n_mc < 1) throw ValidationError("need at least one Monte-Carlo sample");
  if (crlb.empty()) throw ValidationError("waveform library is empty");
  std::vector<Eigen::Matrix2d> inv;
  for (const auto& r : crlb) inv.push_back(r.inverse());
  Effectiveness out;
  out.samples.assign(static_cast<std::size_t>(n_mc), 0.0);
  bool bad = false;
  auto one = [&](int i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const Eigen::Matrix2d p = sampler(rng);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(0.5 * (p + p.transpose()));
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1 + p.cwiseAbs().maxCoeff()) ||
        eig.eigenvalues().minCoeff() < -1e-12 * (1 + p.cwiseAbs().maxCoeff())) {
      bad = true;
      return;
    }
    double best = -1e300;
    for (const auto& ri : inv)
      best = std::max(best, std::log((Eigen::Matrix2d::Identity() + ri * p).determinant()));
    out.samples[static_cast<std::size_t>(i)] = best;
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_mc; ++i) one(i);
  } else {
    for (int i = 0; i < n_mc; ++i) one(i);
  }
  if (bad) throw ValidationError("covariance sampler produced a matrix that is not positive semidefinite");
  const double mean = std::accumulate(out.samples.begin(), out.samples.end(), 0.0) / n_mc;
  double var = 0;
  for (double v : out.samples) var += (v - mean) * (v - mean);
  out.mean = mean;
  out.std_error = n_mc > 1 ? std::sqrt(var / (n_mc - 1) / n_mc) : 0.0;
  return out;
}

}  // namespace wavesel
