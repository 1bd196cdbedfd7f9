#include "wavesel/ctw_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wavesel/errors.hpp"

namespace wavesel {
namespace {

constexpr std::size_t kHistoryTrim = 4096;

int argmin_lowest(const std::vector<double>& v) {
  return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

CtwLearner::CtwLearner(const CtwConfig& cfg)
    : cfg_(cfg), tree_(cfg.alphabet, cfg.depth), rng_(derive_seed(cfg.seed, {0x637477})) {
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  if (!(cfg.g_max > 0.0)) throw ConfigError("cost bound must be positive");
  j_bound_ = cfg.g_max / (1.0 - cfg.gamma);
}

Context CtwLearner::context_between(std::uint64_t first, std::uint64_t last) const {
  Context ctx;
  ctx.reserve(static_cast<std::size_t>(last - first + 1));
  for (std::uint64_t s = first; s <= last; ++s) {
    int w = kNoWaveform;
    if (s < last && (!cfg_.limited || s + 1 == last)) w = wav_at(s);
    ctx.push_back({obs_at(s), w});
  }
  return ctx;
}

Context CtwLearner::window(std::uint64_t t, int depth) const {
  const auto d = static_cast<std::uint64_t>(depth);
  std::uint64_t first = t + 1 >= d ? t + 1 - d : 0;
  first = std::max(first, base_);
  return context_between(first, t);
}

Context CtwLearner::phrase_context() const {
  return context_between(phrase_start_, base_ + obs_.size() - 1);
}

Context CtwLearner::next_context(std::span<const JointSymbol> ctx, int wav, int obs_next) const {
  Context next(ctx.begin(), ctx.end());
  if (!next.empty()) next.back().wav = wav;
  next.push_back({obs_next, kNoWaveform});
  if (cfg_.limited)
    for (std::size_t i = 0; i + 2 < next.size(); ++i) next[i].wav = kNoWaveform;
  const auto d = static_cast<std::size_t>(cfg_.depth);
  if (next.size() > d) next.erase(next.begin(), next.end() - static_cast<std::ptrdiff_t>(d));
  return next;
}

double CtwLearner::cost_estimate(ContextTree::NodeId id, int wav, int obs_next) const {
  const auto cell = static_cast<std::size_t>(wav * cfg_.alphabet.n_obs + obs_next);
  for (auto cur = id; cur != ContextTree::kMissing; cur = tree_.node(cur).parent) {
    const auto& n = tree_.node(cur);
    if (n.cost_n[cell] > 0) return n.cost_mean[cell];
  }
  return 0.0;
}

double CtwLearner::value_of(std::span<const JointSymbol> ctx) const {
  const auto ids = tree_.path(ctx);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it)
    if (tree_.node(*it).has_value) return tree_.node(*it).value;
  return 0.0;
}

std::vector<double> CtwLearner::action_values(std::span<const JointSymbol> ctx) const {
  const auto ids = tree_.path(ctx);
  const auto id = ids.back();
  std::vector<double> q(static_cast<std::size_t>(cfg_.alphabet.n_wav), 0.0);
  for (int w = 0; w < cfg_.alphabet.n_wav; ++w) {
    const auto p = tree_.weighted_dist(ctx, w);
    double acc = 0.0;
    for (int y = 0; y < cfg_.alphabet.n_obs; ++y) {
      const auto next = next_context(ctx, w, y);
      acc += p[static_cast<std::size_t>(y)] * (cost_estimate(id, w, y) + cfg_.gamma * value_of(next));
    }
    q[static_cast<std::size_t>(w)] = acc;
  }
  return q;
}

void CtwLearner::backup(std::span<const JointSymbol> ctx) {
  const auto id = tree_.find(ctx);
  if (id == ContextTree::kMissing) return;
  auto q = action_values(ctx);
  auto& n = tree_.node(id);
  n.q = q;
  n.value = std::clamp(*std::min_element(q.begin(), q.end()), -j_bound_, j_bound_);
  n.has_value = true;
}

int CtwLearner::select_waveform(int obs) {
  if (awaiting_observe_) throw ContractViolation("select_waveform called twice without observe");
  if (obs < 0 || obs >= cfg_.alphabet.n_obs) throw ValidationError("observation out of range");
  if (obs_.empty())
    obs_.push_back(obs);
  else if (obs != obs_.back())
    throw ContractViolation("observation differs from the one reported by observe_transition");

  ++k_;
  const auto ctx = phrase_context();
  const auto id = tree_.find(ctx);
  const bool known = id != ContextTree::kMissing && tree_.node(id).visits() > 0;
  phrase_ends_ = !known || static_cast<int>(ctx.size()) >= cfg_.depth;

  Decision d;
  d.known_context = known;
  d.context_hash = context_hash(ctx);
  d.context_depth = static_cast<int>(ctx.size());
  if (!known) {
    d.wav = uniform_int(rng_, cfg_.alphabet.n_wav);
    d.explored = true;
  } else {
    const double alpha = cfg_.exploration(k_);
    if (uniform01(rng_) < alpha) {
      d.wav = uniform_int(rng_, cfg_.alphabet.n_wav);
      d.explored = true;
    } else {
      d.wav = argmin_lowest(action_values(ctx));
    }
  }
  d.predicted = tree_.weighted_dist(ctx, d.wav);
  last_ = std::move(d);
  awaiting_observe_ = true;
  return last_.wav;
}

void CtwLearner::observe_transition(int obs, int wav, double cost, int next_obs) {
  if (!awaiting_observe_) throw ContractViolation("observe_transition without a pending decision");
  if (obs != obs_.back() || wav != last_.wav)
    throw ContractViolation("transition does not match the last decision");
  if (next_obs < 0 || next_obs >= cfg_.alphabet.n_obs)
    throw ValidationError("observation out of range");
  if (!(std::abs(cost) <= cfg_.g_max)) throw ContractViolation("cost outside [-g_max, g_max]");
  cumulative_cost_ += cost;
  const std::uint64_t t = base_ + obs_.size() - 1;
  wav_.push_back(wav);
  obs_.push_back(next_obs);
  pending_.push_back({t, wav, cost, next_obs});
  awaiting_observe_ = false;
  if (phrase_ends_) end_phrase();
}

void CtwLearner::end_phrase() {
  const auto n_obs = cfg_.alphabet.n_obs;
  for (const auto& p : pending_) {
    const auto ctx = window(p.t, cfg_.depth);
    tree_.update(ctx, p.wav, p.next_obs);
    const auto cell = static_cast<std::size_t>(p.wav * n_obs + p.next_obs);
    for (auto id : tree_.path(ctx)) {
      auto& n = tree_.node(id);
      ++n.cost_n[cell];
      n.cost_mean[cell] += (p.cost - n.cost_mean[cell]) / n.cost_n[cell];
    }
  }
  const std::uint64_t last = pending_.empty() ? phrase_start_ : pending_.back().t;
  pending_.clear();

  for (std::uint64_t u = last + 1; u-- > phrase_start_;) {
    const auto ctx = window(u, cfg_.depth);
    const std::span<const JointSymbol> full(ctx);
    for (std::size_t d = ctx.size() + 1; d-- > 0;) backup(full.subspan(ctx.size() - d));
  }
  ++phrase_index_;
  if (cfg_.restart == PhraseRestart::kSlide)
    ++phrase_start_;
  else
    phrase_start_ = last + 1;

  if (obs_.size() > kHistoryTrim) {
    const auto d = static_cast<std::uint64_t>(cfg_.depth);
    const std::uint64_t keep = phrase_start_ >= d ? phrase_start_ - d : 0;
    if (keep > base_) {
      const auto drop = static_cast<std::ptrdiff_t>(keep - base_);
      obs_.erase(obs_.begin(), obs_.begin() + drop);
      wav_.erase(wav_.begin(), wav_.begin() + drop);
      base_ = keep;
    }
  }
}

nlohmann::json CtwLearner::checkpoint() const {
  std::ostringstream rng_state;
  rng_state << rng_;
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& p : pending_) pending.push_back({p.t, p.wav, p.cost, p.next_obs});
  return {{"format", "wavesel-ctw-checkpoint"},
          {"version", 1},
          {"config",
           {{"n_obs", cfg_.alphabet.n_obs},
            {"n_wav", cfg_.alphabet.n_wav},
            {"depth", cfg_.depth},
            {"gamma", cfg_.gamma},
            {"g_max", cfg_.g_max},
            {"exploration", cfg_.exploration.to_string()},
            {"limited", cfg_.limited},
            {"restart", cfg_.restart == PhraseRestart::kSlide ? "slide" : "reset"},
            {"seed", cfg_.seed}}},
          {"tree", tree_.to_json()},
          {"base", base_},
          {"obs", obs_},
          {"wav", wav_},
          {"k", k_},
          {"phrase_start", phrase_start_},
          {"phrase_index", phrase_index_},
          {"cumulative_cost", cumulative_cost_},
          {"awaiting_observe", awaiting_observe_},
          {"phrase_ends", phrase_ends_},
          {"last_wav", last_.wav},
          {"pending", pending},
          {"rng", rng_state.str()}};
}

CtwLearner CtwLearner::restore(const nlohmann::json& j) {
  if (j.value("format", "") != "wavesel-ctw-checkpoint")
    throw ValidationError("not a learner checkpoint");
  const auto& c = j.at("config");
  CtwConfig cfg;
  cfg.alphabet = {c.at("n_obs").get<int>(), c.at("n_wav").get<int>()};
  cfg.depth = c.at("depth").get<int>();
  cfg.gamma = c.at("gamma").get<double>();
  cfg.g_max = c.at("g_max").get<double>();
  cfg.exploration = ExplorationSchedule::parse(c.at("exploration").get<std::string>());
  cfg.limited = c.at("limited").get<bool>();
  cfg.restart = c.at("restart").get<std::string>() == "slide" ? PhraseRestart::kSlide
                                                                : PhraseRestart::kReset;
  cfg.seed = c.at("seed").get<std::uint64_t>();
  CtwLearner l(cfg);
  l.tree_ = ContextTree::from_json(j.at("tree"));
  l.base_ = j.at("base").get<std::uint64_t>();
  j.at("obs").get_to(l.obs_);
  j.at("wav").get_to(l.wav_);
  l.k_ = j.at("k").get<std::uint64_t>();
  l.phrase_start_ = j.at("phrase_start").get<std::uint64_t>();
  l.phrase_index_ = j.at("phrase_index").get<std::uint64_t>();
  l.cumulative_cost_ = j.at("cumulative_cost").get<double>();
  l.awaiting_observe_ = j.at("awaiting_observe").get<bool>();
  l.phrase_ends_ = j.at("phrase_ends").get<bool>();
  l.last_.wav = j.at("last_wav").get<int>();
  for (const auto& p : j.at("pending"))
    l.pending_.push_back({p[0].get<std::uint64_t>(), p[1].get<int>(), p[2].get<double>(),
                          p[3].get<int>()});
  std::istringstream rng_state(j.at("rng").get<std::string>());
  rng_state >> l.rng_;
  return l;
}

}  // namespace wavesel
