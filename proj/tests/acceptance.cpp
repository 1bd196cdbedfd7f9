// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "wavesel/context_tree.hpp"
#include "wavesel/harness.hpp"
#include "wavesel/oracle_dp.hpp"
#include "wavesel/scene.hpp"
#include "wavesel/tracker.hpp"
#include "wavesel/waveform.hpp"

using namespace wavesel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

ExperimentConfig preset(const std::string& name, std::uint64_t seed) {
  auto cfg = load_config(fs::path(WAVESEL_SOURCE_DIR) / "configs" / (name + ".cfg"));
  cfg.seed = seed;
  return cfg;
}

// Preset runs are shared between criteria; each is computed once.
const ExperimentResult& preset_run(const std::string& name, std::uint64_t seed) {
  static std::map<std::pair<std::string, std::uint64_t>, ExperimentResult> cache;
  auto it = cache.find({name, seed});
  if (it == cache.end()) it = cache.emplace(std::pair{name, seed}, run_experiment(preset(name, seed))).first;
  return it->second;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += v[i];
  return s / static_cast<double>(to - from);
}

double gauss(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec2 draw(const Mat2& cov, Rng& rng) {
  const Eigen::SelfAdjointEigenSolver<Mat2> eig(cov);
  const Mat2 root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return root * Vec2(gauss(rng), gauss(rng));
}

// ---- 1 ---------------------------------------------------------------------------

Outcome kt_redundancy() {
  const int T = 4096;
  const double bound = 0.5 * std::log2(T) + 2;
  Rng rng(101);
  double worst = -1e300;
  for (int seq = 0; seq < 100; ++seq) {
    // spread the source bias over [0, 1], endpoints included
    const double p = seq == 0 ? 0.0 : seq == 1 ? 1.0 : uniform01(rng);
    ContextTree t({2, 1}, 1);
    int ones = 0;
    double loss = 0;
    for (int i = 0; i < T; ++i) {
      const int y = uniform01(rng) < p ? 1 : 0;
      loss -= std::log2(t.kt_prob(0, 0, y));
      t.update({}, 0, y);
      ones += y;
    }
    double best = 1e300;
    for (int i = 0; i <= 1000; ++i) {
      const double q = i / 1000.0;
      double l = 0;
      if (ones > 0) l -= ones * std::log2(q);
      if (T - ones > 0) l -= (T - ones) * std::log2(1 - q);
      best = std::min(best, l);
    }
    worst = std::max(worst, loss - best);
  }
  return {worst <= bound, fmt::format("worst redundancy {:.3f} bits, bound {:.3f}", worst, bound)};
}

// ---- 2 ---------------------------------------------------------------------------

Context random_context(Rng& rng, int max_len, Alphabet a) {
  Context ctx(static_cast<std::size_t>(uniform_int(rng, max_len + 1)));
  for (std::size_t i = 0; i < ctx.size(); ++i)
    ctx[i] = {uniform_int(rng, a.n_obs), i + 1 == ctx.size() ? kNoWaveform : uniform_int(rng, a.n_wav)};
  return ctx;
}

Outcome ctw_correctness() {
  const Alphabet a{3, 2};
  const int depth = 4;
  ContextTree t(a, depth);
  Rng rng(202);
  for (int i = 0; i < 100000; ++i) t.update(random_context(rng, 6, a), uniform_int(rng, a.n_wav), uniform_int(rng, a.n_obs));
  double norm_err = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto ctx = random_context(rng, 6, a);
    for (auto trunc : {Truncation::kLocalEstimate, Truncation::kVirtualLeaf})
      for (int w = 0; w < a.n_wav; ++w) {
        const auto p = t.weighted_dist(ctx, w, trunc);
        norm_err = std::max(norm_err, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
      }
  }
  int leaves = 0, leaf_mismatch = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto ctx = random_context(rng, 6, a);
    const auto ids = t.path(ctx);
    if (static_cast<int>(ids.size()) != depth + 1) continue;
    for (int w = 0; w < a.n_wav; ++w)
      for (int y = 0; y < a.n_obs; ++y) {
        ++leaves;
        if (t.weighted_prob(ctx, w, y, depth) != t.kt_prob(ids.back(), w, y)) ++leaf_mismatch;
      }
  }
  // root (2,1) split over children (2,0) and (0,1), then the probability of a 0 in the first
  ContextTree s({2, 1}, 1);
  const Context ca{{0, kNoWaveform}}, cb{{1, kNoWaveform}};
  s.update(ca, 0, 0);
  s.update(ca, 0, 0);
  s.update(cb, 0, 1);
  const double pe_r = 0.5 / 1.0 * 1.5 / 2.0 * 0.5 / 3.0, pa = 0.5 / 1.0 * 1.5 / 2.0, pb = 0.5;
  const double before = 0.5 * pe_r + 0.5 * pa * pb;
  const double after = 0.5 * pe_r * (2.5 / 4.0) + 0.5 * pa * (2.5 / 3.0) * pb;
  const double hand_err = std::abs(s.weighted_prob(ca, 0, 0) - after / before);
  return {norm_err <= 1e-9 && leaves > 0 && leaf_mismatch == 0 && hand_err <= 1e-12,
          fmt::format("normalization error {:.2e}, {} leaf checks with {} mismatches, hand mixture error {:.2e}",
                      norm_err, leaves, leaf_mismatch, hand_err)};
}

// ---- 3 ---------------------------------------------------------------------------

double exact_average(const ExpandedMdp& m, const std::vector<int>& pol) {
  const auto n = static_cast<Eigen::Index>(m.n_states());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (int y = 0; y < m.n_obs; ++y) {
      const double p = m.p(s, pol[s], y);
      P(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(m.next_state(s, pol[s], y))) += p;
      c(static_cast<Eigen::Index>(s)) += p * m.g(s, pol[s], y);
    }
  Eigen::MatrixXd A = (P - Eigen::MatrixXd::Identity(n, n)).transpose();
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1;
  return Eigen::VectorXd(A.fullPivLu().solve(b)).dot(c);
}

Outcome oracle_equivalence() {
  Rng rng(303);
  double worst = 0;
  int exact_policy = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int ns = 2 + trial % 3;
    ExpandedMdp m;
    m.order = 1;
    m.n_obs = ns;
    m.n_wav = 2;
    for (int s = 0; s < ns; ++s)
      for (int w = 0; w < 2; ++w) {
        std::vector<double> row(static_cast<std::size_t>(ns));
        double sum = 0;
        for (auto& v : row) sum += (v = uniform01(rng) + 1e-3);
        for (double v : row) m.trans.push_back(v / sum);
        for (int y = 0; y < ns; ++y) m.cost.push_back(2 * uniform01(rng) - 1);
      }
    const auto sol = value_iterate(m, 0.999, 1e-10);
    double best = 1e300;
    std::vector<int> best_pol;
    for (int code = 0; code < (1 << ns); ++code) {
      std::vector<int> pol(static_cast<std::size_t>(ns));
      for (int s = 0; s < ns; ++s) pol[static_cast<std::size_t>(s)] = code >> s & 1;
      const double lam = exact_average(m, pol);
      if (lam < best) {
        best = lam;
        best_pol = pol;
      }
    }
    worst = std::max(worst, std::abs(sol.average.lambda - best));
    if (sol.policy == best_pol) ++exact_policy;
  }
  return {worst <= 1e-6, fmt::format("max |lambda - lambda*| = {:.2e}, identical policy on {}/50", worst, exact_policy)};
}

// ---- 4-7 -------------------------------------------------------------------------

Outcome first_order_failure() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& r = preset_run("adversarial", 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto fo = r.metrics.series("first_order", "suboptimal");
  const auto ctw = r.metrics.series("ctw", "suboptimal");
  const double f = mean_of(fo, fo.size() - 10, fo.size()), c = mean_of(ctw, ctw.size() - 10, ctw.size());
  std::string others;
  double lo_f = 1, hi_f = 0, hi_c = 0;
  for (std::uint64_t seed = 2; seed <= 10; ++seed) {
    const auto& rs = preset_run("adversarial", seed);
    const auto a = rs.metrics.series("first_order", "suboptimal");
    const auto b = rs.metrics.series("ctw", "suboptimal");
    lo_f = std::min(lo_f, mean_of(a, a.size() - 10, a.size()));
    hi_f = std::max(hi_f, mean_of(a, a.size() - 10, a.size()));
    hi_c = std::max(hi_c, mean_of(b, b.size() - 10, b.size()));
  }
  return {f >= 0.4 && f <= 0.6 && c < 0.15 && secs < 120,
          fmt::format("first_order {:.3f}, ctw {:.3f} in {:.1f} s (seeds 2-10: first_order {:.3f}-{:.3f}, ctw <= {:.3f})",
                      f, c, secs, lo_f, hi_f, hi_c)};
}

Outcome ctw_beats_lz() {
  int wins = 0;
  std::string gaps;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto& r = preset_run("adversarial", seed);
    const auto a = r.metrics.series("ctw", "mean_sinr_db");
    const auto b = r.metrics.series("active_lz", "mean_sinr_db");
    const double gap = mean_of(a, a.size() - 10, a.size()) - mean_of(b, b.size() - 10, b.size());
    if (gap >= 0) ++wins;
    gaps += fmt::format("{}{:+.2f}", seed == 1 ? "" : " ", gap);
  }
  return {wins >= 8, fmt::format("ctw >= active_lz on {}/10 seeds; final-10 SINR gap dB: {}", wins, gaps)};
}

Outcome ctw_limited_speedup() {
  int faster = 0, smaller = 0;
  std::string sizes;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto& r = preset_run("mtd", seed);
    const auto l = r.metrics.series("ctw_limited", "suboptimal");
    const auto f = r.metrics.series("ctw", "suboptimal");
    if (mean_of(l, 0, 25) <= mean_of(f, 0, 25)) ++faster;
    const auto nl = r.metrics.series("ctw_limited", "model_size").back();
    const auto nf = r.metrics.series("ctw", "model_size").back();
    if (nl < nf) ++smaller;
    sizes += fmt::format("{}{:.0f}/{:.0f}", seed == 1 ? "" : " ", nl, nf);
  }
  return {faster >= 8 && smaller == 10,
          fmt::format("limited no worse on {}/10 seeds, fewer nodes on {}/10 (limited/full: {})", faster, smaller,
                      sizes)};
}

Outcome inaccuracy_trend() {
  int ok = 0;
  std::string rhos;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto& r = preset_run("adversarial", seed);
    const auto v = r.metrics.series("ctw", "inaccuracy");
    std::vector<double> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0.0);
    const double rho = spearman(idx, v);
    if (rho < -0.5) ++ok;
    rhos += fmt::format("{}{:.3f}", seed == 1 ? "" : " ", rho);
  }
  return {ok >= 8, fmt::format("rho < -0.5 on {}/10 seeds: {}", ok, rhos)};
}

// ---- 8 ---------------------------------------------------------------------------

Outcome waveform_math() {
  double zc_side = 0;
  for (int m = 1; m <= 64; m += 2)
    for (int q = 1; q < std::max(m, 2); ++q) {
      if (std::gcd(q, m) != 1) continue;
      const auto code = zadoff_chu(m, q);
      for (int lag = 1; lag < m; ++lag) {
        cplx acc{0, 0};
        for (int i = 0; i < m; ++i) acc += code[static_cast<std::size_t>(i)] * std::conj(code[static_cast<std::size_t>((i + lag) % m)]);
        zc_side = std::max(zc_side, std::abs(acc) / m);
      }
    }

  WaveformSpec lfm;
  lfm.duration = 10e-6;
  lfm.bandwidth = 5e6;
  lfm.pri = 20e-6;
  WaveformSpec zc;
  zc.family = WaveformFamily::kZadoffChu;
  zc.code_length = 13;
  zc.root = 5;
  zc.pri = 20e-6;
  WaveformSpec nlfm;
  nlfm.family = WaveformFamily::kNlfm;
  nlfm.fm_rate = 20;
  nlfm.law = NlfmLaw::kExponential;
  nlfm.pri = 24e-6;
  const std::vector<std::pair<WaveformSpec, double>> fam{{lfm, 2e7}, {zc, 8e6}, {nlfm, 2e7}};

  double origin = 0, sym = 0;
  for (const auto& [w, fs] : fam) {
    const auto env = synthesize(w, fs);
    origin = std::max(origin, std::abs(std::abs(ambiguity(env, 0, 0)) - 1.0));
    for (int i = 1; i <= 6; ++i) {
      const double tau = std::round(0.11 * i * w.pulse_support() * fs) / fs;
      const double nu = 0.09 * i / w.pulse_support() * (i % 2 ? 1 : -1);
      sym = std::max(sym, std::abs(std::abs(ambiguity(env, tau, nu)) - std::abs(ambiguity(env, -tau, -nu))));
    }
  }

  double fim_err = 0;
  bool linear = true;
  for (const auto& [w, fs] : {fam[0], fam[2]}) {
    const auto env = synthesize(w, fs);
    const double eta = 10;
    const auto m = envelope_moments(env);
    const auto fim = fisher_information(m, eta).matrix;
    if (!(fisher_information(m, 2 * eta).matrix == 2.0 * fim)) linear = false;
    const double ht = 0.01 / w.occupied_bandwidth(), hn = 0.01 / w.pulse_support();
    auto f = [&](double a, double b) { return std::norm(ambiguity(env, a * ht, -b * hn)); };
    const double f0 = f(0, 0);
    const double jtt = -0.5 * eta * (f(1, 0) - 2 * f0 + f(-1, 0)) / (ht * ht);
    const double jnn = -0.5 * eta * (f(0, 1) - 2 * f0 + f(0, -1)) / (hn * hn);
    const double jtn = -0.5 * eta * (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * ht * hn);
    fim_err = std::max({fim_err, std::abs(fim(0, 0) / jtt - 1), std::abs(fim(1, 1) / jnn - 1),
                        std::abs(fim(0, 1) - jtn) / std::sqrt(fim(0, 0) * fim(1, 1))});
  }

  WaveformSpec rect;
  rect.duration = 10e-6;
  rect.bandwidth = 0;
  rect.pri = 20e-6;
  const auto env = synthesize(rect, 1e8);
  double tri = 0;
  for (int m = -1000; m <= 1000; m += 25) {
    const double tau = m / 1e8;
    tri = std::max(tri, std::abs(std::abs(ambiguity(env, tau, 0)) - std::max(0.0, 1 - std::abs(tau) / rect.duration)));
  }
  return {zc_side < 1e-9 && origin <= 1e-6 && sym <= 1e-6 && fim_err <= 0.02 && linear && tri <= 1e-3,
          fmt::format("ZC sidelobe {:.1e}, AF origin {:.1e}, symmetry {:.1e}, FIM vs curvature {:.2f}%, linear {}, "
                      "triangle {:.1e}",
                      zc_side, origin, sym, 100 * fim_err, linear ? "yes" : "no", tri)};
}

// ---- 9 ---------------------------------------------------------------------------

Outcome tracker_consistency() {
  const int tracks = 1000, steps = 30;
  const auto m = MotionModel::constant_velocity(0.1, 3.0);
  Mat2 r;
  r << 25, 2, 2, 4;
  Mat2 p0;
  p0 << 400, 0, 0, 100;
  Rng rng(909);
  double avg = 0;
  for (int t = 0; t < tracks; ++t) {
    Vec2 truth(10000, -50);
    TrackState s;
    s.mean = truth + draw(p0, rng);
    s.cov = p0;
    for (int k = 0; k < steps; ++k) {
      truth = m.transition * truth + m.noise_input * 3.0 * gauss(rng);
      s = track_update(s, truth + draw(r, rng), r, m).state;
    }
    avg += nees(truth - s.mean, s.cov) / tracks;
  }
  const auto [lo, hi] = nees_band(tracks, 2);

  int bad = 0;
  TrackState s;
  s.cov << 1e4, 0, 0, 1e2;
  const auto fm = MotionModel::constant_velocity(0.05, 10.0);
  for (int i = 0; i < 100000; ++i) {
    Mat2 l;
    const double s1 = std::pow(10.0, 6 * uniform01(rng) - 3), s2 = std::pow(10.0, 6 * uniform01(rng) - 3);
    l << s1, 0, (uniform01(rng) - 0.5) * std::sqrt(s1 * s2), s2;
    const Mat2 rr = l * l.transpose();
    s = track_update(s, fm.transition * s.mean + draw(rr, rng), rr, fm).state;
    if (!is_psd(s.cov) || s.cov(0, 1) != s.cov(1, 0)) ++bad;
  }
  return {avg >= lo && avg <= hi && bad == 0,
          fmt::format("mean NEES {:.3f} in [{:.3f}, {:.3f}]; {} non-PSD covariances in 1e5 updates", avg, lo, hi, bad)};
}

// ---- 10 --------------------------------------------------------------------------

Outcome mtd_fidelity() {
  const auto spec = preset("mtd", 1).scene;
  Scene scene(spec);
  const auto& k = scene.true_kernel();
  const int nc = spec.n_channel, u = spec.order();
  const auto nc_sz = static_cast<std::size_t>(nc);
  int mismatches = 0, variant = 0;
  double worst_tv = 0;
  int n_hist = 1, n_wh = 1;
  for (int i = 0; i < u; ++i) n_hist *= nc, n_wh *= spec.n_wav;
  Rng rng(1010);
  for (int h = 0; h < n_hist; ++h) {
    std::vector<int> cs(static_cast<std::size_t>(u));
    for (int i = u - 1, x = h; i >= 0; --i, x /= nc) cs[static_cast<std::size_t>(i)] = x % nc;
    std::vector<double> want(nc_sz, 0.0);
    for (std::size_t j = 0; j < spec.lag_weights.size(); ++j) {
      const auto c = static_cast<std::size_t>(cs[cs.size() - 1 - j]);
      for (std::size_t i = 0; i < nc_sz; ++i) want[i] += spec.lag_weights[j] * spec.base[c * nc_sz + i];
    }
    std::vector<double> first;
    for (int wh = 0; wh < n_wh; ++wh) {
      std::vector<int> ws(static_cast<std::size_t>(u));
      for (int i = u - 1, x = wh; i >= 0; --i, x /= spec.n_wav) ws[static_cast<std::size_t>(i)] = x % spec.n_wav;
      const auto row = k.row(cs, ws);
      std::vector<double> got(row.begin(), row.end());
      if (got != want) ++mismatches;
      if (wh == 0) first = got;
      else if (got != first) ++variant;
    }
    const int n = 100000;
    std::vector<double> freq(nc_sz, 0.0);
    std::vector<int> w_pad(static_cast<std::size_t>(u - 1), 0);
    for (int i = 0; i < n; ++i) {
      scene.set_history(cs, w_pad, 0);
      freq[static_cast<std::size_t>(scene.step(uniform_int(rng, spec.n_wav), rng).channel)] += 1.0 / n;
    }
    double tv = 0;
    for (std::size_t i = 0; i < nc_sz; ++i) tv += 0.5 * std::abs(freq[i] - want[i]);
    worst_tv = std::max(worst_tv, tv);
  }
  return {mismatches == 0 && variant == 0 && worst_tv <= 0.02,
          fmt::format("{} rows differ from the mixture, {} waveform-dependent rows, worst empirical TV {:.4f}",
                      mismatches, variant, worst_tv)};
}

// ---- 11 --------------------------------------------------------------------------

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    out[e.path().filename().string()] = os.str();
  }
  return out;
}

Outcome determinism() {
  const auto base = fs::temp_directory_path() / "wavesel_acceptance";
  fs::remove_all(base);
  int files = 0, differing = 0;
  for (const char* name : {"adversarial", "mtd"}) {
    emit_outputs(preset_run(name, 1), base / name / "a");
    emit_outputs(run_experiment(preset(name, 1)), base / name / "b");
    const auto a = dir_contents(base / name / "a"), b = dir_contents(base / name / "b");
    for (const auto& [file, bytes] : a) {
      ++files;
      const auto it = b.find(file);
      if (it == b.end() || it->second != bytes) ++differing;
    }
    if (a.size() != b.size()) ++differing;
  }
  fs::remove_all(base);
  return {files > 0 && differing == 0, fmt::format("{} output files compared, {} differ", files, differing)};
}

}  // namespace

int main() {
  const std::vector<std::tuple<int, std::string, std::function<Outcome()>, double>> criteria{
      {1, "KT redundancy", kt_redundancy, 10.0},
      {2, "CTW correctness", ctw_correctness, 0},
      {3, "oracle equivalence", oracle_equivalence, 10.0},
      {4, "first-order failure mode", first_order_failure, 0},
      {5, "CTW vs active-LZ ordering", ctw_beats_lz, 0},
      {6, "CTW-l speedup", ctw_limited_speedup, 0},
      {7, "inaccuracy trend", inaccuracy_trend, 0},
      {8, "waveform math", waveform_math, 0},
      {9, "tracker consistency", tracker_consistency, 0},
      {10, "MTD scene fidelity", mtd_fidelity, 0},
      {11, "determinism", determinism, 0},
  };
  int failed = 0;
  for (const auto& [id, name, fn, limit] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit > 0 && secs >= limit) {
      o.pass = false;
      o.detail += fmt::format(" [time limit {:.0f} s exceeded]", limit);
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d %-27s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
