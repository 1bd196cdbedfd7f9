#include "wavesel/oracle_dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "wavesel/errors.hpp"

namespace wavesel {

std::size_t ExpandedMdp::n_states() const {
  return int_pow(static_cast<std::size_t>(n_obs), order) *
         int_pow(static_cast<std::size_t>(n_wav), order - 1);
}

std::size_t ExpandedMdp::encode(std::span<const int> obs_hist, std::span<const int> wav_hist) const {
  if (static_cast<int>(obs_hist.size()) != order || static_cast<int>(wav_hist.size()) != order - 1)
    throw ValidationError("expanded state needs U observations and U-1 waveforms");
  return encode_digits(obs_hist, n_obs) * int_pow(static_cast<std::size_t>(n_wav), order - 1) +
         encode_digits(wav_hist, n_wav);
}

std::vector<int> ExpandedMdp::obs_history(std::size_t s) const {
  return decode_digits(s / int_pow(static_cast<std::size_t>(n_wav), order - 1), n_obs, order);
}

std::vector<int> ExpandedMdp::wav_history(std::size_t s) const {
  return decode_digits(s % int_pow(static_cast<std::size_t>(n_wav), order - 1), n_wav, order - 1);
}

std::size_t ExpandedMdp::next_state(std::size_t s, int w, int y_next) const {
  const auto nw = static_cast<std::size_t>(n_wav);
  const auto no = static_cast<std::size_t>(n_obs);
  const std::size_t wav_span = int_pow(nw, order - 1);
  const std::size_t obs_part = s / wav_span;
  const std::size_t wav_part = s % wav_span;
  const std::size_t new_obs = (obs_part % int_pow(no, order - 1)) * no + static_cast<std::size_t>(y_next);
  std::size_t new_wav = 0;
  if (order >= 2) new_wav = (wav_part % int_pow(nw, order - 2)) * nw + static_cast<std::size_t>(w);
  return new_obs * wav_span + new_wav;
}

void ExpandedMdp::validate(double tol) const {
  if (order < 1 || n_obs < 1 || n_wav < 1) throw ValidationError("expanded MDP sizes must be positive");
  const std::size_t cells = n_pairs() * static_cast<std::size_t>(n_obs);
  if (trans.size() != cells || cost.size() != cells)
    throw ValidationError("expanded MDP tables have the wrong size");
  for (std::size_t sa = 0; sa < n_pairs(); ++sa) {
    double sum = 0;
    for (int y = 0; y < n_obs; ++y) {
      const double v = trans[sa * static_cast<std::size_t>(n_obs) + static_cast<std::size_t>(y)];
      if (!(v >= 0.0)) throw ValidationError("transition probability is negative or NaN");
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw ValidationError("transition row does not sum to one");
  }
}

namespace {

// Stationary distribution over channel windows of length `len` when waveforms are
// drawn uniformly. Used as the prior for the filtered hidden-state mode.
std::vector<double> window_prior(const ChannelKernel& k, int len) {
  const auto nc = static_cast<std::size_t>(k.n_channel);
  const std::size_t n = int_pow(nc, len);
  const std::size_t w_rows = int_pow(static_cast<std::size_t>(k.n_wav), k.order);
  // transition[window] -> averaged next-channel distribution
  std::vector<double> next(n * nc, 0.0);
  for (std::size_t win = 0; win < n; ++win) {
    auto digits = decode_digits(win, k.n_channel, len);
    std::span<const int> hist(digits.data() + (len - k.order), static_cast<std::size_t>(k.order));
    const std::size_t base = encode_digits(hist, k.n_channel) * w_rows;
    for (std::size_t wr = 0; wr < w_rows; ++wr) {
      auto row = k.row(base + wr);
      for (std::size_t c = 0; c < nc; ++c) next[win * nc + c] += row[c] / static_cast<double>(w_rows);
    }
  }
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), nxt(n);
  for (int it = 0; it < 1'000'000; ++it) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    for (std::size_t win = 0; win < n; ++win) {
      const std::size_t shifted = (win % int_pow(nc, len - 1)) * nc;
      for (std::size_t c = 0; c < nc; ++c) nxt[shifted + c] += pi[win] * next[win * nc + c];
    }
    double diff = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double lazy = 0.5 * (pi[i] + nxt[i]);
      diff = std::max(diff, std::abs(lazy - pi[i]));
      pi[i] = lazy;
    }
    if (diff < 1e-15) break;
  }
  return pi;
}

}  // namespace

ExpandedMdp expand_kernel(const ChannelKernel& kernel, const ObservationModel& om, int order,
                          const ExpandOptions& opts) {
  kernel.validate(1e-9);
  om.validate(1e-9);
  if (order < 1) throw ValidationError("expanded order must be at least 1");
  if (order < kernel.order) throw ValidationError("expanded order is below the kernel order");
  if (om.n_channel != kernel.n_channel || om.n_wav != kernel.n_wav)
    throw ValidationError("observation model does not match the kernel alphabets");

  ExpandedMdp mdp;
  mdp.order = order;
  mdp.n_obs = om.n_obs();
  mdp.n_wav = kernel.n_wav;
  const double pairs = std::pow(static_cast<double>(mdp.n_obs), order) *
                       std::pow(static_cast<double>(mdp.n_wav), order);
  if (pairs > static_cast<double>(opts.max_pairs))
    throw SizeError("expanded state space exceeds the state-action cap");

  const std::size_t ns = mdp.n_states();
  const auto nw = static_cast<std::size_t>(mdp.n_wav);
  const auto no = static_cast<std::size_t>(mdp.n_obs);
  const auto nc = static_cast<std::size_t>(kernel.n_channel);
  const int nq = om.n_quality;
  mdp.trans.assign(ns * nw * no, 0.0);
  mdp.cost.assign(ns * nw * no, 0.0);

  std::vector<double> prior;
  if (opts.mode == HiddenStateMode::kFiltered) prior = window_prior(kernel, order);

  std::vector<int> khist_w(static_cast<std::size_t>(kernel.order));
  for (std::size_t s = 0; s < ns; ++s) {
    const auto ys = mdp.obs_history(s);
    const auto ws = mdp.wav_history(s);

    // Posterior over the channel window given the observable history.
    std::vector<std::pair<std::size_t, double>> support;
    std::vector<int> observed(static_cast<std::size_t>(order));
    for (int j = 0; j < order; ++j) observed[static_cast<std::size_t>(j)] = ys[static_cast<std::size_t>(j)] / nq;
    if (opts.mode == HiddenStateMode::kDirect) {
      support.emplace_back(encode_digits(observed, kernel.n_channel), 1.0);
    } else {
      double total = 0;
      const std::size_t nwin = int_pow(nc, order);
      for (std::size_t win = 0; win < nwin; ++win) {
        if (prior[win] <= 0) continue;
        const auto cs = decode_digits(win, kernel.n_channel, order);
        double like = prior[win];
        for (int j = 0; j < order && like > 0; ++j) {
          const auto uj = static_cast<std::size_t>(j);
          like *= om.p_confusion(cs[uj], observed[uj]);
          if (j >= 1) like *= om.p_quality(cs[uj], ws[uj - 1], ys[uj] % nq);
        }
        if (like > 0) {
          support.emplace_back(win, like);
          total += like;
        }
      }
      if (total <= 0) {
        support.assign(1, {encode_digits(observed, kernel.n_channel), 1.0});
      } else {
        for (auto& [win, p] : support) p /= total;
      }
    }

    for (std::size_t w = 0; w < nw; ++w) {
      for (int j = 0; j < kernel.order - 1; ++j)
        khist_w[static_cast<std::size_t>(j)] =
            ws[static_cast<std::size_t>(order - kernel.order + j)];
      khist_w.back() = static_cast<int>(w);
      const std::size_t wrow = encode_digits(khist_w, kernel.n_wav);
      double* pt = &mdp.trans[(s * nw + w) * no];
      double* pc = &mdp.cost[(s * nw + w) * no];
      for (const auto& [win, pw] : support) {
        const std::size_t chist = win % int_pow(nc, kernel.order);
        const auto row = kernel.row(chist * int_pow(static_cast<std::size_t>(kernel.n_wav), kernel.order) + wrow);
        for (std::size_t c = 0; c < nc; ++c) {
          if (row[c] <= 0) continue;
          for (std::size_t y = 0; y < no; ++y) {
            const int ci = static_cast<int>(c), wi = static_cast<int>(w), yi = static_cast<int>(y);
            const double p = pw * row[c] * om.p_obs(ci, wi, yi);
            pt[y] += p;
            pc[y] += p * om.expected_cost(ci, wi, yi % nq);
          }
        }
      }
      double sum = 0;
      for (std::size_t y = 0; y < no; ++y) sum += pt[y];
      for (std::size_t y = 0; y < no; ++y) {
        pc[y] = pt[y] > 0 ? pc[y] / pt[y] : 0.0;
        pt[y] /= sum;
      }
    }
  }
  return mdp;
}

void bellman_sweep(const ExpandedMdp& mdp, double gamma, std::span<const double> value,
                   std::span<double> out, std::span<double> q, Execution exec) {
  const auto ns = static_cast<std::ptrdiff_t>(mdp.n_states());
  const int nw = mdp.n_wav;
  const int no = mdp.n_obs;
  auto state = [&](std::ptrdiff_t si) {
    const auto s = static_cast<std::size_t>(si);
    double best = std::numeric_limits<double>::infinity();
    for (int w = 0; w < nw; ++w) {
      double acc = 0;
      for (int y = 0; y < no; ++y) {
        const double p = mdp.p(s, w, y);
        if (p != 0.0) acc += p * (mdp.g(s, w, y) + gamma * value[mdp.next_state(s, w, y)]);
      }
      q[s * static_cast<std::size_t>(nw) + static_cast<std::size_t>(w)] = acc;
      best = std::min(best, acc);
    }
    out[s] = best;
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < ns; ++s) state(s);
  } else {
    for (std::ptrdiff_t s = 0; s < ns; ++s) state(s);
  }
}

DpSolution value_iterate(const ExpandedMdp& mdp, double gamma, double tol, Execution exec,
                         int max_iterations) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("discount must lie in (0, 1)");
  mdp.validate(1e-9);
  const std::size_t ns = mdp.n_states();
  const auto nw = static_cast<std::size_t>(mdp.n_wav);

  DpSolution sol;
  sol.order = mdp.order;
  sol.n_obs = mdp.n_obs;
  sol.n_wav = mdp.n_wav;
  sol.gamma = gamma;
  std::vector<double> j(ns, 0.0), next(ns, 0.0);
  sol.q.assign(ns * nw, 0.0);
  const double threshold = tol * (1.0 - gamma) / (2.0 * gamma);
  for (int it = 0; it < max_iterations; ++it) {
    bellman_sweep(mdp, gamma, j, next, sol.q, exec);
    double diff = 0, scale = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      diff = std::max(diff, std::abs(next[s] - j[s]));
      scale = std::max(scale, std::abs(next[s]));
    }
    j.swap(next);
    sol.sup_changes.push_back(diff);
    sol.iterations = it + 1;
    // Rounding puts a floor under the reachable change; stop there as well.
    if (diff < threshold || diff <= 8.0 * std::numeric_limits<double>::epsilon() * scale) break;
  }
  bellman_sweep(mdp, gamma, j, next, sol.q, exec);
  sol.value = j;

  sol.policy.assign(ns, 0);
  sol.optimal.assign(ns, 0);
  for (std::size_t s = 0; s < ns; ++s) {
    const double* qs = &sol.q[s * nw];
    const double best = *std::min_element(qs, qs + nw);
    bool first = true;
    for (std::size_t w = 0; w < nw; ++w) {
      if (qs[w] <= best + kTieTolerance) {
        sol.optimal[s] |= std::uint64_t{1} << w;
        if (first) sol.policy[s] = static_cast<int>(w);
        first = false;
      }
    }
  }
  sol.average = long_run_average_cost(mdp, sol.policy);
  return sol;
}

std::vector<int> DpSolution::optimal_action_set(std::size_t state) const {
  if (state >= optimal.size()) throw std::out_of_range("unknown expanded state");
  std::vector<int> out;
  for (int w = 0; w < n_wav; ++w)
    if (optimal[state] >> w & 1u) out.push_back(w);
  return out;
}

bool DpSolution::is_optimal(std::size_t state, int w) const {
  if (state >= optimal.size()) throw std::out_of_range("unknown expanded state");
  return (optimal[state] >> w & 1u) != 0;
}

AverageCost long_run_average_cost(const ExpandedMdp& mdp, std::span<const int> policy,
                                  std::uint64_t horizon, std::uint64_t seed) {
  const std::size_t ns = mdp.n_states();
  if (policy.size() != ns) throw ValidationError("policy must cover every state");
  const auto n = static_cast<Eigen::Index>(ns);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < ns; ++s) {
    const int w = policy[s];
    if (w < 0 || w >= mdp.n_wav) throw ValidationError("policy action out of range");
    for (int y = 0; y < mdp.n_obs; ++y) {
      const double p = mdp.p(s, w, y);
      P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(mdp.next_state(s, w, y))) += p;
      c(static_cast<Eigen::Index>(s)) += p * mdp.g(s, w, y);
    }
  }
  // Limit of the lazy chain by repeated squaring; the lazy chain is aperiodic and shares
  // the stationary behaviour of P, so its limit gives the Cesaro averages.
  Eigen::MatrixXd M = 0.5 * (Eigen::MatrixXd::Identity(n, n) + P);
  AverageCost out;
  out.converged = false;
  for (int i = 0; i < 80; ++i) {
    Eigen::MatrixXd M2 = M * M;
    const double diff = (M2 - M).cwiseAbs().maxCoeff();
    M = std::move(M2);
    if (diff < 1e-12) {
      out.converged = true;
      break;
    }
  }
  out.per_state.resize(ns);
  if (out.converged) {
    Eigen::VectorXd lam = M * c;
    for (std::size_t s = 0; s < ns; ++s) out.per_state[s] = lam(static_cast<Eigen::Index>(s));
  } else {
    Rng rng(seed);
    for (std::size_t s = 0; s < ns; ++s)
      out.per_state[s] = trajectory_average_cost(mdp, policy, s, horizon, rng);
  }
  const auto [lo, hi] = std::minmax_element(out.per_state.begin(), out.per_state.end());
  out.communicating = (*hi - *lo) <= 1e-6;
  double sum = 0;
  for (double v : out.per_state) sum += v;
  out.lambda = sum / static_cast<double>(ns);
  return out;
}

double trajectory_average_cost(const ExpandedMdp& mdp, std::span<const int> policy,
                               std::size_t start, std::uint64_t horizon, Rng& rng) {
  std::size_t s = start;
  double total = 0;
  std::vector<double> row(static_cast<std::size_t>(mdp.n_obs));
  for (std::uint64_t t = 0; t < horizon; ++t) {
    const int w = policy[s];
    for (int y = 0; y < mdp.n_obs; ++y) row[static_cast<std::size_t>(y)] = mdp.p(s, w, y);
    const int y = sample_index(row, uniform01(rng));
    total += mdp.g(s, w, y);
    s = mdp.next_state(s, w, y);
  }
  return horizon ? total / static_cast<double>(horizon) : 0.0;
}

nlohmann::json DpSolution::to_json(const ExpandedMdp& mdp) const {
  nlohmann::json states = nlohmann::json::array();
  const auto nw = static_cast<std::size_t>(n_wav);
  for (std::size_t s = 0; s < value.size(); ++s) {
    states.push_back({{"index", s},
                      {"obs", mdp.obs_history(s)},
                      {"wav", mdp.wav_history(s)},
                      {"value", value[s]},
                      {"q", std::vector<double>(q.begin() + static_cast<std::ptrdiff_t>(s * nw),
                                                q.begin() + static_cast<std::ptrdiff_t>((s + 1) * nw))},
                      {"policy", policy[s]},
                      {"optimal", optimal_action_set(s)}});
  }
  return {{"format", "wavesel-dp-solution"},
          {"version", 1},
          {"order", order},
          {"n_obs", n_obs},
          {"n_wav", n_wav},
          {"gamma", gamma},
          {"encoding", "state = obs digits (oldest first) * n_wav^(U-1) + wav digits (oldest first)"},
          {"lambda", average.lambda},
          {"per_state_average", average.per_state},
          {"communicating", average.communicating},
          {"iterations", iterations},
          {"states", std::move(states)}};
}

}  // namespace wavesel
