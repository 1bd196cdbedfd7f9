#include "wavesel/context_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "wavesel/errors.hpp"

namespace wavesel {
namespace {

constexpr double kLogHalf = -0.69314718055994530942;

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

// Weight of the node's own estimate in the two-way mixture, from log(Pe) - log(prod).
double own_weight(double log_ratio) {
  if (log_ratio >= 0) return 1.0 / (1.0 + std::exp(-log_ratio));
  double e = std::exp(log_ratio);
  return e / (1.0 + e);
}

}  // namespace

std::uint64_t context_hash(std::span<const JointSymbol> ctx) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& s : ctx) {
    mix(static_cast<std::uint32_t>(s.obs));
    mix(static_cast<std::uint32_t>(s.wav + 1));
  }
  return h;
}

std::string context_hash_hex(std::span<const JointSymbol> ctx) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(context_hash(ctx)));
  return buf;
}

std::uint64_t ContextTree::Node::visits() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ContextTree::Node::visits(int wav, int n_obs) const {
  auto first = counts.begin() + static_cast<std::ptrdiff_t>(wav) * n_obs;
  return std::accumulate(first, first + n_obs, std::uint64_t{0});
}

ContextTree::ContextTree(Alphabet alphabet, int max_depth)
    : alphabet_(alphabet), max_depth_(max_depth) {
  if (alphabet.n_obs < 1 || alphabet.n_wav < 1)
    throw ValidationError("context tree alphabet sizes must be positive");
  if (max_depth < 1) throw ValidationError("context tree depth must be at least 1");
  nodes_.emplace_back();
  init_node(nodes_.back());
}

void ContextTree::init_node(Node& n) const {
  const auto cells = static_cast<std::size_t>(alphabet_.n_obs * alphabet_.n_wav);
  const auto nw = static_cast<std::size_t>(alphabet_.n_wav);
  n.counts.assign(cells, 0);
  n.term_counts.assign(cells, 0);
  n.cost_mean.assign(cells, 0.0);
  n.cost_n.assign(cells, 0);
  n.log_pe.assign(nw, 0.0);
  n.log_pe_term.assign(nw, 0.0);
  n.log_pw.assign(nw, 0.0);
  n.log_children.assign(nw, 0.0);
  n.q.assign(nw, 0.0);
}

ContextTree::NodeId ContextTree::child(NodeId id, JointSymbol key) const {
  for (NodeId c : nodes_[id].children)
    if (nodes_[c].key == key) return c;
  return kMissing;
}

ContextTree::NodeId ContextTree::add_child(NodeId parent, JointSymbol key) {
  const auto id = static_cast<NodeId>(nodes_.size());
  Node n;
  init_node(n);
  n.parent = parent;
  n.depth = nodes_[parent].depth + 1;
  n.key = key;
  nodes_.push_back(std::move(n));
  nodes_[parent].children.push_back(id);
  return id;
}

std::vector<ContextTree::NodeId> ContextTree::path(std::span<const JointSymbol> ctx) const {
  std::vector<NodeId> out{0};
  const int m = std::min<int>(static_cast<int>(ctx.size()), max_depth_);
  NodeId cur = 0;
  for (int l = 1; l <= m; ++l) {
    cur = child(cur, ctx[ctx.size() - static_cast<std::size_t>(l)]);
    if (cur == kMissing) break;
    out.push_back(cur);
  }
  return out;
}

ContextTree::NodeId ContextTree::find(std::span<const JointSymbol> ctx) const {
  if (static_cast<int>(ctx.size()) > max_depth_) return kMissing;
  auto p = path(ctx);
  return p.size() == ctx.size() + 1 ? p.back() : kMissing;
}

ContextTree::NodeId ContextTree::deepest_suffix(std::span<const JointSymbol> ctx) const {
  return path(ctx).back();
}

void ContextTree::update(std::span<const JointSymbol> ctx, int wav, int obs_next) {
  if (wav < 0 || wav >= alphabet_.n_wav) throw ValidationError("waveform index out of range");
  if (obs_next < 0 || obs_next >= alphabet_.n_obs)
    throw ValidationError("observation index out of range");
  for (const auto& s : ctx)
    if (s.obs < 0 || s.obs >= alphabet_.n_obs || s.wav < kNoWaveform || s.wav >= alphabet_.n_wav)
      throw ValidationError("context symbol out of range");

  const int m = std::min<int>(static_cast<int>(ctx.size()), max_depth_);
  std::vector<NodeId> ids{0};
  ids.reserve(static_cast<std::size_t>(m) + 1);
  for (int l = 1; l <= m; ++l) {
    const JointSymbol key = ctx[ctx.size() - static_cast<std::size_t>(l)];
    NodeId c = child(ids.back(), key);
    if (c == kMissing) c = add_child(ids.back(), key);
    ids.push_back(c);
  }

  const auto w = static_cast<std::size_t>(wav);
  const auto cell = w * static_cast<std::size_t>(alphabet_.n_obs) + static_cast<std::size_t>(obs_next);
  const double half_alpha = 0.5 * alphabet_.n_obs;
  double child_delta = 0.0;
  for (int j = m; j >= 0; --j) {
    Node& n = nodes_[ids[static_cast<std::size_t>(j)]];
    const double old_pw = n.log_pw[w];
    const double total = static_cast<double>(n.visits(wav, alphabet_.n_obs));
    n.log_pe[w] += std::log((n.counts[cell] + 0.5) / (total + half_alpha));
    ++n.counts[cell];
    if (j == m && m < max_depth_) {
      const auto first = n.term_counts.begin() + static_cast<std::ptrdiff_t>(w) * alphabet_.n_obs;
      const double term_total = std::accumulate(first, first + alphabet_.n_obs, 0.0);
      const double d = std::log((n.term_counts[cell] + 0.5) / (term_total + half_alpha));
      n.log_pe_term[w] += d;
      n.log_children[w] += d;
      ++n.term_counts[cell];
    }
    if (j < m) n.log_children[w] += child_delta;
    if (n.depth >= max_depth_)
      n.log_pw[w] = n.log_pe[w];
    else
      n.log_pw[w] = kLogHalf + log_add(n.log_pe[w], n.log_children[w]);
    child_delta = n.log_pw[w] - old_pw;
  }
}

double ContextTree::kt_prob(NodeId id, int wav, int obs_next) const {
  const Node& n = nodes_.at(id);
  const auto cell = static_cast<std::size_t>(wav * alphabet_.n_obs + obs_next);
  return (n.counts[cell] + 0.5) /
         (static_cast<double>(n.visits(wav, alphabet_.n_obs)) + 0.5 * alphabet_.n_obs);
}

std::vector<double> ContextTree::path_predictive(std::span<const JointSymbol> ctx, int wav,
                                                 int at_depth, Truncation trunc) const {
  if (wav < 0 || wav >= alphabet_.n_wav) throw ValidationError("waveform index out of range");
  const int m = std::min<int>(static_cast<int>(ctx.size()), max_depth_);
  if (at_depth < 0 || at_depth > m) throw ValidationError("at_depth beyond context path");
  const auto ids = path(ctx);
  const int have = static_cast<int>(ids.size()) - 1;
  const auto ny = static_cast<std::size_t>(alphabet_.n_obs);
  const auto w = static_cast<std::size_t>(wav);
  std::vector<double> p(ny, 1.0 / static_cast<double>(ny));
  std::vector<double> kt(ny);

  auto load_kt = [&](const std::vector<std::uint32_t>& counts) {
    double total = 0;
    for (std::size_t y = 0; y < ny; ++y) total += counts[w * ny + y];
    for (std::size_t y = 0; y < ny; ++y)
      kt[y] = (counts[w * ny + y] + 0.5) / (total + 0.5 * static_cast<double>(ny));
  };

  if (have == m) {
    const Node& n = nodes_[ids.back()];
    load_kt(n.counts);
    if (m == max_depth_ || trunc == Truncation::kLocalEstimate) {
      p = kt;
    } else {
      std::vector<double> own = kt;
      load_kt(n.term_counts);
      const double a = own_weight(n.log_pe[w] - n.log_children[w]);
      for (std::size_t y = 0; y < ny; ++y) p[y] = a * own[y] + (1.0 - a) * kt[y];
    }
  }
  for (int j = std::min(have, m - 1); j >= at_depth; --j) {
    const Node& n = nodes_[ids[static_cast<std::size_t>(j)]];
    load_kt(n.counts);
    const double a = own_weight(n.log_pe[w] - n.log_children[w]);
    for (std::size_t y = 0; y < ny; ++y) p[y] = a * kt[y] + (1.0 - a) * p[y];
  }
  return p;
}

double ContextTree::weighted_prob(std::span<const JointSymbol> ctx, int wav, int obs_next,
                                  int at_depth, Truncation trunc) const {
  if (obs_next < 0 || obs_next >= alphabet_.n_obs)
    throw ValidationError("observation index out of range");
  return path_predictive(ctx, wav, at_depth, trunc)[static_cast<std::size_t>(obs_next)];
}

std::vector<double> ContextTree::weighted_dist(std::span<const JointSymbol> ctx, int wav,
                                               Truncation trunc) const {
  return path_predictive(ctx, wav, 0, trunc);
}

Context ContextTree::context_of(NodeId id) const {
  Context ctx;
  for (NodeId cur = id; cur != 0; cur = nodes_[cur].parent) ctx.push_back(nodes_[cur].key);
  return ctx;  // walking up yields oldest first
}

nlohmann::json ContextTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nlohmann::json jn;
    jn["parent"] = n.parent == kMissing ? -1 : static_cast<long long>(n.parent);
    jn["key"] = {n.key.obs, n.key.wav};
    jn["counts"] = n.counts;
    jn["term_counts"] = n.term_counts;
    jn["log_pe"] = n.log_pe;
    jn["log_pe_term"] = n.log_pe_term;
    jn["log_pw"] = n.log_pw;
    jn["log_children"] = n.log_children;
    jn["cost_mean"] = n.cost_mean;
    jn["cost_n"] = n.cost_n;
    jn["q"] = n.q;
    jn["value"] = n.value;
    jn["has_value"] = n.has_value;
    nodes.push_back(std::move(jn));
  }
  return {{"format", "wavesel-context-tree"},
          {"version", 1},
          {"n_obs", alphabet_.n_obs},
          {"n_wav", alphabet_.n_wav},
          {"max_depth", max_depth_},
          {"nodes", std::move(nodes)}};
}

ContextTree ContextTree::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "wavesel-context-tree")
    throw ValidationError("not a context tree document");
  ContextTree t({j.at("n_obs").get<int>(), j.at("n_wav").get<int>()}, j.at("max_depth").get<int>());
  const auto& nodes = j.at("nodes");
  if (nodes.empty()) throw ValidationError("context tree document has no root");
  t.nodes_.clear();
  t.nodes_.reserve(nodes.size());
  for (const auto& jn : nodes) {
    Node n;
    const auto parent = jn.at("parent").get<long long>();
    n.parent = parent < 0 ? kMissing : static_cast<NodeId>(parent);
    n.key = {jn.at("key")[0].get<int>(), jn.at("key")[1].get<int>()};
    jn.at("counts").get_to(n.counts);
    jn.at("term_counts").get_to(n.term_counts);
    jn.at("log_pe").get_to(n.log_pe);
    jn.at("log_pe_term").get_to(n.log_pe_term);
    jn.at("log_pw").get_to(n.log_pw);
    jn.at("log_children").get_to(n.log_children);
    jn.at("cost_mean").get_to(n.cost_mean);
    jn.at("cost_n").get_to(n.cost_n);
    jn.at("q").get_to(n.q);
    n.value = jn.at("value").get<double>();
    n.has_value = jn.at("has_value").get<bool>();
    const auto id = static_cast<NodeId>(t.nodes_.size());
    if (n.parent != kMissing) {
      if (n.parent >= id) throw ValidationError("context tree node precedes its parent");
      n.depth = t.nodes_[n.parent].depth + 1;
      t.nodes_[n.parent].children.push_back(id);
    } else if (id != 0) {
      throw ValidationError("context tree has more than one root");
    }
    t.nodes_.push_back(std::move(n));
  }
  return t;
}

}  // namespace wavesel
