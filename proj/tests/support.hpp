#pragma once

// Small helpers shared by the test binaries.

#include <functional>
#include <vector>

#include "wavesel/oracle_dp.hpp"
#include "wavesel/policy.hpp"
#include "wavesel/rng.hpp"

namespace wavesel::testing {

// First-order environment: next observation drawn from trans[(y * nw + w) * ny + y'].
struct OrderOneEnv {
  int ny = 2;
  int nw = 2;
  std::vector<double> trans;
  std::function<double(int, int, int)> cost;

  double p(int y, int w, int y2) const {
    return trans[static_cast<std::size_t>((y * nw + w) * ny + y2)];
  }
  int next(int y, int w, Rng& rng) const {
    std::vector<double> row(static_cast<std::size_t>(ny));
    for (int y2 = 0; y2 < ny; ++y2) row[static_cast<std::size_t>(y2)] = p(y, w, y2);
    return sample_index(row, uniform01(rng));
  }
  ExpandedMdp as_mdp() const {
    ExpandedMdp m;
    m.order = 1;
    m.n_obs = ny;
    m.n_wav = nw;
    m.trans = trans;
    for (int y = 0; y < ny; ++y)
      for (int w = 0; w < nw; ++w)
        for (int y2 = 0; y2 < ny; ++y2) m.cost.push_back(cost(y, w, y2));
    return m;
  }
};

// y=0 is cheap. Waveform 0 keeps the current observation, waveform 1 flips it, and
// waveform 1 carries a surcharge. Optimal: waveform 0 in y=0, waveform 1 in y=1.
inline OrderOneEnv stay_or_flip_env() {
  OrderOneEnv e;
  e.trans = {0.9, 0.1, 0.1, 0.9,   // y=0: w=0 stays, w=1 flips
             0.1, 0.9, 0.9, 0.1};  // y=1
  e.cost = [](int, int w, int y2) { return 0.7 * y2 + 0.3 * w; };
  return e;
}

struct Trace {
  std::vector<TraceRow> rows;
  std::vector<int> obs;
  double total_cost = 0;
  int last_obs = 0;  // observation the next decision must start from
};

// Runs a policy against an environment for `steps` decisions.
template <class Env>
Trace drive(WaveformPolicy& policy, const Env& env, int y0, int steps, Rng& rng) {
  Trace tr;
  int y = y0;
  for (int k = 0; k < steps; ++k) {
    const int w = policy.select_waveform(y);
    const int y2 = env.next(y, w, rng);
    const double g = env.cost(y, w, y2);
    const auto& d = policy.last_decision();
    tr.rows.push_back({static_cast<std::uint64_t>(k), d.context_hash, w, d.explored, g});
    tr.obs.push_back(y);
    tr.total_cost += g;
    policy.observe_transition(y, w, g, y2);
    y = y2;
  }
  tr.last_obs = y;
  return tr;
}

}  // namespace wavesel::testing
