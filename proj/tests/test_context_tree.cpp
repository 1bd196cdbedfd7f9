#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "wavesel/context_tree.hpp"
#include "wavesel/errors.hpp"

using namespace wavesel;

namespace {

// log of the KT block probability of a count vector, straight from the gamma-function form
double log_kt_block(const std::vector<int>& counts) {
  const double a = static_cast<double>(counts.size());
  double n = 0, acc = 0;
  for (int c : counts) {
    acc += std::lgamma(c + 0.5) - std::lgamma(0.5);
    n += c;
  }
  return acc - (std::lgamma(n + a / 2) - std::lgamma(a / 2));
}

double log_mix(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(0.5 * std::exp(a - m) + 0.5 * std::exp(b - m));
}

struct Event {
  Context ctx;
  int y;
};

// Recursive block-probability evaluation over an explicit event list (single waveform).
// Events whose history ends exactly at a node's depth feed that node's virtual leaf.
double brute_log_pw(const std::vector<Event>& events, int n_obs, int depth, int max_depth) {
  std::vector<int> own(static_cast<std::size_t>(n_obs), 0), term(own);
  std::map<JointSymbol, std::vector<Event>> kids;
  for (const auto& e : events) {
    ++own[static_cast<std::size_t>(e.y)];
    const int len = static_cast<int>(e.ctx.size());
    if (depth == max_depth) continue;
    if (len == depth)
      ++term[static_cast<std::size_t>(e.y)];
    else
      kids[e.ctx[e.ctx.size() - 1 - static_cast<std::size_t>(depth)]].push_back(e);
  }
  const double pe = log_kt_block(own);
  if (depth == max_depth) return pe;
  double children = log_kt_block(term);
  for (const auto& [key, sub] : kids) children += brute_log_pw(sub, n_obs, depth + 1, max_depth);
  return log_mix(pe, children);
}

Context random_context(std::mt19937_64& rng, int max_len, Alphabet a) {
  std::uniform_int_distribution<int> len(0, max_len), y(0, a.n_obs - 1), w(0, a.n_wav - 1);
  Context ctx(static_cast<std::size_t>(len(rng)));
  for (std::size_t i = 0; i < ctx.size(); ++i)
    ctx[i] = {y(rng), i + 1 == ctx.size() ? kNoWaveform : w(rng)};
  return ctx;
}

}  // namespace

TEST_CASE("KT estimate hand values") {
  ContextTree t4({4, 1}, 2);
  for (int y = 0; y < 4; ++y) CHECK(t4.kt_prob(0, 0, y) == doctest::Approx(0.25).epsilon(1e-15));

  ContextTree t({2, 1}, 2);
  t.update({}, 0, 0);
  CHECK(t.kt_prob(0, 0, 0) == doctest::Approx(0.75).epsilon(1e-15));

  ContextTree u({2, 1}, 2);
  for (int y : {0, 0, 0, 1}) u.update({}, 0, y);
  CHECK(u.kt_prob(0, 0, 1) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("single and repeated root update") {
  ContextTree t({2, 2}, 3);
  t.update({}, 0, 1);
  CHECK(t.root().counts[1] == 1);
  CHECK(t.kt_prob(0, 0, 0) == doctest::Approx(0.25));
  CHECK(t.kt_prob(0, 0, 1) == doctest::Approx(0.75));
  // the other waveform is untouched
  CHECK(t.kt_prob(0, 1, 1) == doctest::Approx(0.5));
  t.update({}, 0, 1);
  CHECK(t.root().counts[1] == 2);
  CHECK(t.kt_prob(0, 0, 0) == doctest::Approx(0.5 / 3).epsilon(1e-15));
  CHECK(t.kt_prob(0, 0, 1) == doctest::Approx(2.5 / 3).epsilon(1e-15));
}

TEST_CASE("updates stop at the depth bound") {
  ContextTree t({2, 2}, 2);
  const Context ctx{{1, 0}, {0, 1}, {1, kNoWaveform}};
  t.update(ctx, 1, 0);
  CHECK(t.size() == 3);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.node(static_cast<ContextTree::NodeId>(i)).depth <= 2);
  CHECK(t.find(ctx) == ContextTree::kMissing);
  CHECK(t.find(std::span(ctx).subspan(1)) != ContextTree::kMissing);
}

TEST_CASE("fresh tree predicts uniform") {
  ContextTree t({3, 2}, 4);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const auto ctx = random_context(rng, 6, t.alphabet());
    for (int w = 0; w < 2; ++w)
      for (int y = 0; y < 3; ++y) CHECK(t.weighted_prob(ctx, w, y) == doctest::Approx(1.0 / 3));
  }
}

TEST_CASE("depth-1 mixture matches hand evaluation") {
  // root (2,0), its only child (2,0)
  ContextTree t({2, 1}, 1);
  const Context ctx{{0, kNoWaveform}};
  t.update(ctx, 0, 0);
  t.update(ctx, 0, 0);
  const double pe_root = 0.5 / 1.0 * 1.5 / 2.0;
  const double pe_child = pe_root;
  const double pw_before = 0.5 * pe_root + 0.5 * pe_child;
  const double pw_after = 0.5 * pe_root * (2.5 / 3.0) + 0.5 * pe_child * (2.5 / 3.0);
  CHECK(std::abs(t.weighted_prob(ctx, 0, 0) - pw_after / pw_before) < 1e-12);
  CHECK(std::abs(std::exp(t.root().log_pw[0]) - pw_before) < 1e-12);

  // uneven split: root sees (2,1) through two different children (2,0) and (0,1)
  ContextTree s({2, 1}, 1);
  const Context a{{0, kNoWaveform}}, b{{1, kNoWaveform}};
  s.update(a, 0, 0);
  s.update(a, 0, 0);
  s.update(b, 0, 1);
  const double pe_r = 0.5 / 1.0 * 1.5 / 2.0 * 0.5 / 3.0;
  const double pa = 0.5 / 1.0 * 1.5 / 2.0, pb = 0.5;
  const double before = 0.5 * pe_r + 0.5 * pa * pb;
  // next symbol 0 in context a
  const double after = 0.5 * pe_r * (2.5 / 4.0) + 0.5 * pa * (2.5 / 3.0) * pb;
  CHECK(std::abs(s.weighted_prob(a, 0, 0) - after / before) < 1e-12);
  CHECK(std::abs(std::exp(s.root().log_pw[0]) - before) < 1e-12);
}

TEST_CASE("leaf prediction equals its KT estimate bitwise") {
  const int depth = 3;
  ContextTree t({3, 2}, depth);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> y(0, 2), w(0, 1);
  for (int i = 0; i < 2000; ++i) t.update(random_context(rng, 5, t.alphabet()), w(rng), y(rng));
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const auto ctx = random_context(rng, 5, t.alphabet());
    if (static_cast<int>(ctx.size()) < depth) continue;
    const auto ids = t.path(ctx);
    if (static_cast<int>(ids.size()) != depth + 1) continue;
    for (int ww = 0; ww < 2; ++ww)
      for (int yy = 0; yy < 3; ++yy) {
        const double a = t.weighted_prob(ctx, ww, yy, depth);
        const double b = t.kt_prob(ids.back(), ww, yy);
        CHECK(a == b);
        ++checked;
      }
  }
  CHECK(checked > 100);
}

TEST_CASE("probabilities stay normalized and positive under random updates") {
  const Alphabet a{4, 3};
  ContextTree t(a, 4);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> y(0, a.n_obs - 1), w(0, a.n_wav - 1);
  for (int i = 0; i < 5000; ++i) {
    const auto before = t.size();
    const auto ctx = random_context(rng, 6, a);
    t.update(ctx, w(rng), y(rng));
    CHECK(t.size() - before <= ctx.size() + 1);
  }
  for (std::size_t id = 0; id < t.size(); ++id)
    for (int ww = 0; ww < a.n_wav; ++ww) {
      double s = 0;
      for (int yy = 0; yy < a.n_obs; ++yy) {
        const double p = t.kt_prob(static_cast<ContextTree::NodeId>(id), ww, yy);
        CHECK(p > 0);
        s += p;
      }
      CHECK(std::abs(s - 1) < 1e-9);
    }
  for (int i = 0; i < 2000; ++i) {
    const auto ctx = random_context(rng, 6, a);
    for (auto trunc : {Truncation::kLocalEstimate, Truncation::kVirtualLeaf})
      for (int ww = 0; ww < a.n_wav; ++ww) {
        const auto p = t.weighted_dist(ctx, ww, trunc);
        double s = 0;
        for (double v : p) {
          CHECK(v > 0);
          s += v;
        }
        CHECK(std::abs(s - 1) < 1e-9);
      }
  }
}

TEST_CASE("root block probability matches a brute-force recursion") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Alphabet a{3, 2};
    const int depth = 3;
    ContextTree t(a, depth);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> y(0, a.n_obs - 1);
    std::vector<Event> events;
    double seq_log = 0;
    for (int i = 0; i < 300; ++i) {
      // mixed lengths, including histories shorter than the depth
      const auto ctx = random_context(rng, 5, a);
      const int yy = y(rng);
      seq_log += std::log(t.weighted_prob(ctx, 0, yy, 0, Truncation::kVirtualLeaf));
      t.update(ctx, 0, yy);
      events.push_back({ctx, yy});
    }
    const double brute = brute_log_pw(events, a.n_obs, 0, depth);
    CHECK(t.root().log_pw[0] == doctest::Approx(brute).epsilon(1e-10));
    CHECK(seq_log == doctest::Approx(brute).epsilon(1e-10));
  }
}

TEST_CASE("sequential log loss examples") {
  SUBCASE("one uniform step costs one bit") {
    ContextTree t({2, 1}, 1);
    CHECK(-std::log2(t.kt_prob(0, 0, 1)) == doctest::Approx(1.0));
  }
  SUBCASE("constant sequence") {
    for (int T : {1, 2, 10, 100, 1000, 4096}) {
      ContextTree t({2, 1}, 1);
      double loss = 0;
      for (int i = 0; i < T; ++i) {
        loss -= std::log2(t.kt_prob(0, 0, 0));
        t.update({}, 0, 0);
      }
      CHECK(loss >= 0);
      CHECK(loss <= std::log2(T) + 1);
    }
  }
  SUBCASE("iid uniform sequence") {
    const int T = 1024;
    ContextTree t({2, 1}, 1);
    std::mt19937_64 rng(99);
    double loss = 0;
    for (int i = 0; i < T; ++i) {
      const int y = static_cast<int>(rng() & 1u);
      loss -= std::log2(t.kt_prob(0, 0, y));
      t.update({}, 0, y);
    }
    CHECK(std::abs(loss - T) <= std::log2(T) + 2);
  }
}

TEST_CASE("KT redundancy against the best constant assignment") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const int ny = 2 + trial % 3;
    const int T = 64 << (trial % 7);
    std::vector<double> p(static_cast<std::size_t>(ny));
    std::gamma_distribution<double> g(0.3, 1.0);
    for (auto& v : p) v = g(rng);
    std::discrete_distribution<int> src(p.begin(), p.end());
    ContextTree t({ny, 1}, 1);
    std::vector<int> counts(static_cast<std::size_t>(ny), 0);
    double loss = 0;
    for (int i = 0; i < T; ++i) {
      const int y = src(rng);
      loss -= std::log2(t.kt_prob(0, 0, y));
      t.update({}, 0, y);
      ++counts[static_cast<std::size_t>(y)];
    }
    // the empirical frequencies minimize the constant-assignment loss
    double best = 0;
    for (int c : counts)
      if (c > 0) best -= c * std::log2(static_cast<double>(c) / T);
    CHECK(loss - best <= 0.5 * ny * std::log2(T) + ny);
  }
}

TEST_CASE("json round trip preserves the tree") {
  const Alphabet a{3, 2};
  ContextTree t(a, 3);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> y(0, 2), w(0, 1);
  for (int i = 0; i < 400; ++i) t.update(random_context(rng, 4, a), w(rng), y(rng));
  t.node(2).value = 0.125;
  t.node(2).has_value = true;
  const auto j = t.to_json();
  const auto back = ContextTree::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.size() == t.size());
  CHECK(back.to_json() == j);
  for (int i = 0; i < 100; ++i) {
    const auto ctx = random_context(rng, 4, a);
    CHECK(back.weighted_prob(ctx, 1, 2) == t.weighted_prob(ctx, 1, 2));
  }
  CHECK_THROWS_AS(ContextTree::from_json(nlohmann::json{{"format", "other"}}), ValidationError);
}

TEST_CASE("context paths and node contexts") {
  ContextTree t({2, 2}, 3);
  const Context ctx{{1, 1}, {0, 0}, {1, kNoWaveform}};
  t.update(ctx, 0, 0);
  const auto id = t.find(ctx);
  REQUIRE(id != ContextTree::kMissing);
  CHECK(t.context_of(id) == ctx);
  CHECK(t.path(ctx).size() == 4);
  CHECK(context_hash(ctx) != context_hash(std::span(ctx).subspan(1)));
  CHECK(context_hash_hex(ctx).size() == 16);
}

TEST_CASE("invalid indices are rejected") {
  ContextTree t({2, 2}, 2);
  CHECK_THROWS_AS(t.update({}, 2, 0), ValidationError);
  CHECK_THROWS_AS(t.update({}, 0, 2), ValidationError);
  CHECK_THROWS_AS(t.weighted_prob({}, 0, 5), ValidationError);
  CHECK_THROWS_AS(ContextTree({0, 1}, 2), ValidationError);
  CHECK_THROWS_AS(ContextTree({2, 1}, 0), ValidationError);
}
