#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace wavesel {

inline constexpr int kNoWaveform = -1;

// One step of history: the observation and the waveform that was transmitted after it.
// The newest symbol of a context has no waveform yet.
struct JointSymbol {
  int obs = 0;
  int wav = kNoWaveform;
  auto operator<=>(const JointSymbol&) const = default;
};

// Oldest first, newest last.
using Context = std::vector<JointSymbol>;

struct Alphabet {
  int n_obs = 2;
  int n_wav = 2;
};

std::uint64_t context_hash(std::span<const JointSymbol> ctx);
std::string context_hash_hex(std::span<const JointSymbol> ctx);

// How the path predictive treats a context that stops above the maximum depth.
enum class Truncation {
  // The terminus node's own KT estimate closes the path.
  kLocalEstimate,
  // Symbols that arrived with a short history feed a virtual leaf under the terminus.
  // This is what makes sequential probabilities multiply to the root block probability.
  kVirtualLeaf,
};

// Suffix tree of joint-symbol contexts with per-waveform KT estimators and
// log-domain weighted block probabilities. Node 0 is the root (empty context).
class ContextTree {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kMissing = 0xffffffffu;

  struct Node {
    NodeId parent = kMissing;
    int depth = 0;
    JointSymbol key{};  // symbol this node adds to its parent's context (oldest end)
    std::vector<NodeId> children;

    std::vector<std::uint32_t> counts;       // [wav * n_obs + obs]
    std::vector<std::uint32_t> term_counts;  // same layout, short-history transitions
    std::vector<double> log_pe;              // per waveform
    std::vector<double> log_pe_term;
    std::vector<double> log_pw;
    std::vector<double> log_children;  // sum of children's log_pw plus log_pe_term

    // Learner state kept alongside the statistics.
    std::vector<double> cost_mean;  // [wav * n_obs + obs]
    std::vector<std::uint32_t> cost_n;
    std::vector<double> q;  // per waveform
    double value = 0.0;
    bool has_value = false;

    std::uint64_t visits() const;
    std::uint64_t visits(int wav, int n_obs) const;
  };

  ContextTree(Alphabet alphabet, int max_depth);

  const Alphabet& alphabet() const { return alphabet_; }
  int max_depth() const { return max_depth_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  Node& node(NodeId id) { return nodes_.at(id); }
  const Node& root() const { return nodes_[0]; }

  // Child of `id` keyed by the symbol one step further into the past.
  NodeId child(NodeId id, JointSymbol key) const;

  // Nodes along the suffix path of ctx, root first. Stops at the first missing node
  // or at the maximum depth.
  std::vector<NodeId> path(std::span<const JointSymbol> ctx) const;
  NodeId find(std::span<const JointSymbol> ctx) const;
  NodeId deepest_suffix(std::span<const JointSymbol> ctx) const;

  // Records that `obs_next` followed ctx under waveform `wav`, updating every suffix
  // of ctx down to min(depth(ctx), max_depth). Creates missing nodes.
  void update(std::span<const JointSymbol> ctx, int wav, int obs_next);

  // Predictive probability of obs_next given ctx and wav, obtained by mixing along the
  // suffix path and read off at node depth `at_depth` (0 = root).
  double weighted_prob(std::span<const JointSymbol> ctx, int wav, int obs_next,
                       int at_depth = 0, Truncation trunc = Truncation::kLocalEstimate) const;
  std::vector<double> weighted_dist(std::span<const JointSymbol> ctx, int wav,
                                    Truncation trunc = Truncation::kLocalEstimate) const;

  // Plain KT estimate at one node.
  double kt_prob(NodeId id, int wav, int obs_next) const;

  nlohmann::json to_json() const;
  static ContextTree from_json(const nlohmann::json& j);

  // Context of a node, oldest first.
  Context context_of(NodeId id) const;

 private:
  NodeId add_child(NodeId parent, JointSymbol key);
  void init_node(Node& n) const;
  std::vector<double> path_predictive(std::span<const JointSymbol> ctx, int wav, int at_depth,
                                      Truncation trunc) const;

  Alphabet alphabet_;
  int max_depth_;
  std::vector<Node> nodes_;
};

}  // namespace wavesel
