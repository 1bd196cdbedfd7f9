#include "wavesel/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "wavesel/errors.hpp"

namespace wavesel {
namespace {

int argmin_lowest(const std::vector<double>& v) {
  return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

void check_cost(double cost, double g_max) {
  if (!(std::abs(cost) <= g_max)) throw ContractViolation("cost outside [-g_max, g_max]");
}

}  // namespace

// ---- active LZ ------------------------------------------------------------

ActiveLz::ActiveLz(const BaselineConfig& cfg) : cfg_(cfg), rng_(derive_seed(cfg.seed, {0x6c7a})) {
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  Node root;
  root.parent = kNone;
  const auto cells = static_cast<std::size_t>(cfg.alphabet.n_obs * cfg.alphabet.n_wav);
  root.counts.assign(cells, 0);
  root.cost_mean.assign(cells, 0.0);
  root.q.assign(static_cast<std::size_t>(cfg.alphabet.n_wav), 0.0);
  nodes_.push_back(std::move(root));
}

std::uint32_t ActiveLz::find_child(std::uint32_t id, JointSymbol key) const {
  for (auto c : nodes_[id].children)
    if (nodes_[c].key == key) return c;
  return kNone;
}

double ActiveLz::kt(const Node& n, int wav, int obs) const {
  const int ny = cfg_.alphabet.n_obs;
  double total = 0;
  for (int y = 0; y < ny; ++y) total += n.counts[static_cast<std::size_t>(wav * ny + y)];
  return (n.counts[static_cast<std::size_t>(wav * ny + obs)] + 0.5) / (total + 0.5 * ny);
}

std::vector<double> ActiveLz::action_values(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  const int ny = cfg_.alphabet.n_obs;
  std::vector<double> q(static_cast<std::size_t>(cfg_.alphabet.n_wav), 0.0);
  for (int w = 0; w < cfg_.alphabet.n_wav; ++w) {
    double acc = 0;
    for (int y = 0; y < ny; ++y) {
      const auto c = find_child(id, {y, w});
      const double next = c == kNone ? 0.0 : nodes_[c].value;
      acc += kt(n, w, y) * (n.cost_mean[static_cast<std::size_t>(w * ny + y)] + cfg_.gamma * next);
    }
    q[static_cast<std::size_t>(w)] = acc;
  }
  return q;
}

int ActiveLz::select_waveform(int obs) {
  if (awaiting_observe_) throw ContractViolation("select_waveform called twice without observe");
  if (obs < 0 || obs >= cfg_.alphabet.n_obs) throw ValidationError("observation out of range");
  ++k_;
  const std::uint32_t parent = phrase_.empty() ? 0 : phrase_.back();
  // The first symbol of a phrase is keyed by the observation alone; later ones also
  // carry the waveform that led to them.
  const JointSymbol key{obs, phrase_.empty() ? kNoWaveform : prev_wav_};
  auto id = find_child(parent, key);
  const bool known = id != kNone;
  if (!known) {
    Node n;
    n.parent = parent;
    n.key = key;
    n.counts.assign(nodes_[0].counts.size(), 0);
    n.cost_mean.assign(nodes_[0].counts.size(), 0.0);
    n.q.assign(static_cast<std::size_t>(cfg_.alphabet.n_wav), 0.0);
    id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(std::move(n));
    nodes_[parent].children.push_back(id);
  }
  phrase_.push_back(id);
  phrase_ends_ = !known;

  Decision d;
  d.known_context = known;
  d.context_depth = static_cast<int>(phrase_.size());
  d.context_hash = id;
  if (!known || uniform01(rng_) < cfg_.exploration(k_)) {
    d.wav = uniform_int(rng_, cfg_.alphabet.n_wav);
    d.explored = true;
  } else {
    d.wav = argmin_lowest(action_values(id));
  }
  for (int y = 0; y < cfg_.alphabet.n_obs; ++y) d.predicted.push_back(kt(nodes_[id], d.wav, y));
  last_ = std::move(d);
  awaiting_observe_ = true;
  return last_.wav;
}

void ActiveLz::observe_transition(int obs, int wav, double cost, int next_obs) {
  if (!awaiting_observe_) throw ContractViolation("observe_transition without a pending decision");
  if (wav != last_.wav || nodes_[phrase_.back()].key.obs != obs)
    throw ContractViolation("transition does not match the last decision");
  if (next_obs < 0 || next_obs >= cfg_.alphabet.n_obs) throw ValidationError("observation out of range");
  check_cost(cost, cfg_.g_max);
  awaiting_observe_ = false;
  Node& n = nodes_[phrase_.back()];
  const auto cell = static_cast<std::size_t>(wav * cfg_.alphabet.n_obs + next_obs);
  ++n.counts[cell];
  n.cost_mean[cell] += (cost - n.cost_mean[cell]) / n.counts[cell];
  prev_wav_ = wav;
  if (!phrase_ends_) return;

  const double bound = cfg_.g_max / (1.0 - cfg_.gamma);
  for (auto it = phrase_.rbegin(); it != phrase_.rend(); ++it) {
    auto q = action_values(*it);
    nodes_[*it].value = std::clamp(*std::min_element(q.begin(), q.end()), -bound, bound);
    nodes_[*it].q = std::move(q);
  }
  phrase_lengths_.push_back(static_cast<int>(phrase_.size()));
  phrase_.clear();
}

// ---- first-order certainty equivalence ----------------------------------------

FirstOrderLearner::FirstOrderLearner(const BaselineConfig& cfg)
    : cfg_(cfg), rng_(derive_seed(cfg.seed, {0x666f})) {
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  if (cfg.refresh < 1) throw ConfigError("refresh cadence must be positive");
  const auto ny = static_cast<std::size_t>(cfg.alphabet.n_obs);
  const auto nw = static_cast<std::size_t>(cfg.alphabet.n_wav);
  counts_.assign(ny * nw * ny, 0);
  cost_mean_.assign(ny * nw * ny, 0.0);
  q_.assign(ny * nw, 0.0);
}

ExpandedMdp FirstOrderLearner::estimated_mdp() const {
  ExpandedMdp mdp;
  mdp.order = 1;
  mdp.n_obs = cfg_.alphabet.n_obs;
  mdp.n_wav = cfg_.alphabet.n_wav;
  mdp.trans.resize(counts_.size());
  mdp.cost = cost_mean_;
  const int ny = mdp.n_obs;
  for (int y = 0; y < ny; ++y)
    for (int w = 0; w < mdp.n_wav; ++w) {
      double total = 0;
      for (int y2 = 0; y2 < ny; ++y2) total += counts_[cell(y, w, y2)];
      for (int y2 = 0; y2 < ny; ++y2)
        mdp.trans[cell(y, w, y2)] = (counts_[cell(y, w, y2)] + 0.5) / (total + 0.5 * ny);
    }
  return mdp;
}

void FirstOrderLearner::refresh() {
  const auto mdp = estimated_mdp();
  if (cfg_.gamma == 0.0) {
    for (int y = 0; y < mdp.n_obs; ++y)
      for (int w = 0; w < mdp.n_wav; ++w) {
        double acc = 0;
        for (int y2 = 0; y2 < mdp.n_obs; ++y2) acc += mdp.p(static_cast<std::size_t>(y), w, y2) * mdp.g(static_cast<std::size_t>(y), w, y2);
        q_[static_cast<std::size_t>(y * mdp.n_wav + w)] = acc;
      }
    return;
  }
  q_ = value_iterate(mdp, cfg_.gamma, 1e-8, Execution::kSerial).q;
}

int FirstOrderLearner::select_waveform(int obs) {
  if (awaiting_observe_) throw ContractViolation("select_waveform called twice without observe");
  if (obs < 0 || obs >= cfg_.alphabet.n_obs) throw ValidationError("observation out of range");
  ++k_;
  const int nw = cfg_.alphabet.n_wav;
  std::uint64_t seen = 0;
  for (int w = 0; w < nw; ++w)
    for (int y2 = 0; y2 < cfg_.alphabet.n_obs; ++y2) seen += counts_[cell(obs, w, y2)];

  Decision d;
  d.known_context = seen > 0;
  d.context_depth = 1;
  d.context_hash = static_cast<std::uint64_t>(obs);
  if (seen == 0 || uniform01(rng_) < cfg_.exploration(k_)) {
    d.wav = uniform_int(rng_, nw);
    d.explored = true;
  } else {
    std::vector<double> row(q_.begin() + obs * nw, q_.begin() + (obs + 1) * nw);
    d.wav = argmin_lowest(row);
  }
  double total = 0;
  for (int y2 = 0; y2 < cfg_.alphabet.n_obs; ++y2) total += counts_[cell(obs, d.wav, y2)];
  for (int y2 = 0; y2 < cfg_.alphabet.n_obs; ++y2)
    d.predicted.push_back((counts_[cell(obs, d.wav, y2)] + 0.5) / (total + 0.5 * cfg_.alphabet.n_obs));
  last_ = std::move(d);
  awaiting_observe_ = true;
  return last_.wav;
}

void FirstOrderLearner::observe_transition(int obs, int wav, double cost, int next_obs) {
  if (!awaiting_observe_) throw ContractViolation("observe_transition without a pending decision");
  if (wav != last_.wav) throw ContractViolation("transition does not match the last decision");
  if (next_obs < 0 || next_obs >= cfg_.alphabet.n_obs) throw ValidationError("observation out of range");
  check_cost(cost, cfg_.g_max);
  awaiting_observe_ = false;
  const auto c = cell(obs, wav, next_obs);
  ++counts_[c];
  cost_mean_[c] += (cost - cost_mean_[c]) / counts_[c];
  if (++transitions_ % static_cast<std::uint64_t>(cfg_.refresh) == 0) refresh();
}

// ---- uniform random ----------------------------------------------------------

RandomPolicy::RandomPolicy(int n_wav, std::uint64_t seed)
    : n_wav_(n_wav), rng_(derive_seed(seed, {0x726e64})) {
  if (n_wav < 1) throw ConfigError("need at least one waveform");
}

int RandomPolicy::select_waveform(int) {
  last_ = Decision{};
  last_.wav = n_wav_ == 1 ? 0 : uniform_int(rng_, n_wav_);
  last_.explored = true;
  return last_.wav;
}

// ---- oracle ------------------------------------------------------------------

OraclePolicy::OraclePolicy(ExpandedMdp shape, DpSolution solution, std::uint64_t seed)
    : shape_(std::move(shape)), solution_(std::move(solution)), rng_(derive_seed(seed, {0x6f72})) {
  shape_.trans.clear();
  shape_.cost.clear();
}

int OraclePolicy::select_waveform(int obs) {
  obs_.push_back(obs);
  const auto u = static_cast<std::size_t>(shape_.order);
  if (obs_.size() > u) obs_.erase(obs_.begin());
  last_ = Decision{};
  if (obs_.size() < u || wav_.size() + 1 < u) {
    last_.wav = uniform_int(rng_, shape_.n_wav);
    last_.explored = true;
  } else {
    std::vector<int> w(wav_.end() - static_cast<std::ptrdiff_t>(u - 1), wav_.end());
    last_.wav = solution_.policy[shape_.encode(obs_, w)];
    last_.known_context = true;
  }
  return last_.wav;
}

void OraclePolicy::observe_transition(int, int wav, double, int) {
  wav_.push_back(wav);
  if (wav_.size() > static_cast<std::size_t>(shape_.order)) wav_.erase(wav_.begin());
}

}  // namespace wavesel
