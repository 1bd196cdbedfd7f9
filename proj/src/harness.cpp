#include "wavesel/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "wavesel/baselines.hpp"
#include "wavesel/errors.hpp"

namespace wavesel {
namespace {

// stream tags for derive_seed
constexpr std::uint64_t kSceneStream = 0x5ce7e;
constexpr std::uint64_t kTruthStream = 0x7247;
constexpr std::uint64_t kStepStream = 0x57e9;
constexpr std::uint64_t kPolicyStream = 0x9011;
constexpr std::uint64_t kSurrogateStream = 0x5a29;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

double parse_num(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::unique_ptr<WaveformPolicy> make_policy(const ExperimentConfig& cfg, Arm arm, Alphabet alphabet,
                                            const std::optional<Oracle>& oracle, int track) {
  const auto seed = derive_seed(cfg.seed, {kPolicyStream, static_cast<std::uint64_t>(arm),
                                           static_cast<std::uint64_t>(track)});
  switch (arm) {
    case Arm::kCtw:
    case Arm::kCtwLimited: {
      CtwConfig c;
      c.alphabet = alphabet;
      c.depth = cfg.learner.depth;
      c.gamma = cfg.learner.gamma;
      c.g_max = cfg.cost.g_max;
      c.exploration = cfg.learner.exploration;
      c.limited = arm == Arm::kCtwLimited;
      c.restart = cfg.learner.restart;
      c.seed = seed;
      return std::make_unique<CtwLearner>(c);
    }
    case Arm::kActiveLz:
    case Arm::kFirstOrder: {
      BaselineConfig c;
      c.alphabet = alphabet;
      c.gamma = cfg.learner.gamma;
      c.g_max = cfg.cost.g_max;
      c.exploration = cfg.learner.exploration;
      c.refresh = cfg.learner.refresh;
      c.seed = seed;
      if (arm == Arm::kActiveLz) return std::make_unique<ActiveLz>(c);
      return std::make_unique<FirstOrderLearner>(c);
    }
    case Arm::kRandom: return std::make_unique<RandomPolicy>(alphabet.n_wav, seed);
    case Arm::kOracle:
      if (!oracle) throw ConfigError("oracle arm requested but the scene cannot be tabulated");
      return std::make_unique<OraclePolicy>(oracle->mdp, oracle->solution, seed);
  }
  throw ConfigError("unknown arm");
}

WaveformSpec cpi_waveform(const ExperimentConfig& cfg, WaveformSpec w) {
  w.pulses = cfg.pulses;
  w.pri = cfg.pri;
  return w;
}

std::vector<double> grid_energies(const ExperimentConfig& cfg, const Scene& scene, int target_cell, double eta,
                                  Rng& rng) {
  const int cells = cfg.scene.grid_delay * cfg.scene.grid_doppler;
  std::vector<double> e(static_cast<std::size_t>(cells));
  for (auto& v : e) v = -std::log1p(-uniform01(rng));  // unit-mean noise energy
  if (target_cell != scene.no_target()) e[static_cast<std::size_t>(target_cell)] += eta;
  return e;
}

}  // namespace

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::kCtw: return "ctw";
    case Arm::kCtwLimited: return "ctw_limited";
    case Arm::kActiveLz: return "active_lz";
    case Arm::kFirstOrder: return "first_order";
    case Arm::kRandom: return "random";
    case Arm::kOracle: return "oracle";
  }
  return "?";
}

Arm arm_from_string(const std::string& s) {
  for (Arm a : {Arm::kCtw, Arm::kCtwLimited, Arm::kActiveLz, Arm::kFirstOrder, Arm::kRandom, Arm::kOracle})
    if (arm_name(a) == s) return a;
  throw ConfigError("unknown algorithm arm: " + s);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("distributions differ in size");
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("spearman needs two equal series of length >= 2");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t m = i; m <= j; ++m) r[idx[m]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

// ---- waveform library and oracle ------------------------------------------------

std::vector<Mat2> library_crlb(const ExperimentConfig& cfg) {
  double fs = cfg.sample_rate;
  if (fs == 0)
    for (const auto& w : cfg.library) fs = std::max(fs, 4.0 * w.occupied_bandwidth());
  const double eta_ref = db_to_linear(cfg.tracker.snr_ref_db);
  const auto t_map = range_velocity_map(cfg.tracker.carrier_hz);
  std::vector<Mat2> out;
  for (const auto& w : cfg.library) {
    const auto env = synthesize(cpi_waveform(cfg, w), fs);
    out.push_back(measurement_covariance(env, eta_ref, t_map).covariance);
  }
  return out;
}

std::vector<double> surrogate_costs(const ExperimentConfig& cfg, const Scene& scene, std::span<const Mat2> crlb) {
  const int nc = cfg.scene.n_channel, nw = cfg.scene.n_wav, nq = cfg.scene.n_quality;
  const double eta_ref = db_to_linear(cfg.tracker.snr_ref_db);
  const double g_max = cfg.cost.g_max;
  const auto model = MotionModel::constant_velocity(cfg.cpi_duration(), cfg.tracker.accel_std);
  std::vector<double> cost;
  for (int c = 0; c < nc; ++c)
    for (int w = 0; w < nw; ++w) {
      const double sinr = scene.sinr_db(c, w);
      const double eta = db_to_linear(sinr);
      const double pd = detection_probability(sinr);
      double good = 0, overall = 0;
      if (cfg.cost.objective == Objective::kTrack) {
        const Mat2 s = steady_state_innovation_cov(model, crlb[static_cast<std::size_t>(w)] * (eta_ref / eta));
        good = expected_innovation_cost(s, cfg.cost.lambda, cfg.cost.nu_ref, g_max);
        overall = pd * good + (1 - pd) * g_max;
      } else {
        Rng rng = make_rng(cfg.seed, {kSurrogateStream, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(w)});
        double acc = 0;
        constexpr int kDraws = 512;
        for (int i = 0; i < kDraws; ++i) {
          const auto e = grid_energies(cfg, scene, 0, eta, rng);
          acc += entropy_cost(e, cfg.cost.detection_threshold, cfg.cost.softness, cfg.cost.entropy_sign, g_max);
        }
        good = overall = acc / kDraws;
      }
      for (int q = 0; q < nq; ++q) {
        if (nq == 1 || cfg.cost.objective == Objective::kEntropy) cost.push_back(overall);
        else cost.push_back(q == nq - 1 ? g_max : good);
      }
    }
  return cost;
}

std::optional<Oracle> build_oracle(const ExperimentConfig& cfg, std::span<const Mat2> crlb) {
  const Scene scene(cfg.scene);
  const auto obs = scene.observation_model(surrogate_costs(cfg, scene, crlb));
  Oracle o;
  try {
    ExpandOptions opts;
    opts.mode = cfg.oracle_mode;
    o.mdp = expand_kernel(scene.true_kernel(), obs, scene.order(), opts);
  } catch (const SizeError&) {
    return std::nullopt;
  }
  o.solution = value_iterate(o.mdp, cfg.learner.gamma);
  return o;
}

// ---- experiment loop --------------------------------------------------------------

EpisodeLog run_arm(const ExperimentConfig& cfg, Arm arm, std::span<const Mat2> crlb,
                   const std::optional<Oracle>& oracle) {
  Scene scene(cfg.scene);
  const int nq = cfg.scene.n_quality;
  const Alphabet alphabet{scene.n_obs(), cfg.scene.n_wav};
  auto policy = make_policy(cfg, arm, alphabet, oracle, 0);

  Rng init = make_rng(cfg.seed, {kSceneStream});
  scene.reset(init);
  const auto u = static_cast<std::size_t>(scene.order());
  // Padded history stands in for observations made before the first CPI.
  std::deque<int> y_hist, w_hist;
  for (int c : scene.channel_history()) y_hist.push_back(c * nq);
  for (int w : scene.wav_history()) w_hist.push_back(w);

  const auto model = MotionModel::constant_velocity(cfg.cpi_duration(), cfg.tracker.accel_std);
  const double eta_ref = db_to_linear(cfg.tracker.snr_ref_db);
  const auto& tc = cfg.tracker;

  EpisodeLog log;
  log.arm = arm_name(arm);
  log.tracks = cfg.tracks;
  log.cpis = cfg.cpis;
  log.rows.reserve(static_cast<std::size_t>(cfg.tracks) * static_cast<std::size_t>(cfg.cpis));

  for (int t = 0; t < cfg.tracks; ++t) {
    if (t > 0 && !cfg.learner.persist) policy = make_policy(cfg, arm, alphabet, oracle, t);
    Rng truth_rng = make_rng(cfg.seed, {kTruthStream, static_cast<std::uint64_t>(t)});
    std::normal_distribution<double> gauss;
    Vec2 truth(tc.range_min + (tc.range_max - tc.range_min) * uniform01(truth_rng), tc.rate_std * gauss(truth_rng));
    TrackState est;
    est.mean = truth + Vec2(tc.init_range_std * gauss(truth_rng), tc.init_rate_std * gauss(truth_rng));
    est.cov = Vec2(tc.init_range_std * tc.init_range_std, tc.init_rate_std * tc.init_rate_std).asDiagonal();

    for (int k = 0; k < cfg.cpis; ++k) {
      EpisodeRow row;
      row.track = t;
      row.k = k;
      row.obs = y_hist.back();
      row.wav = policy->select_waveform(row.obs);
      const Decision& d = policy->last_decision();
      row.explored = d.explored;
      row.known = d.known_context;
      if (oracle) {
        const std::vector<int> ys(y_hist.begin(), y_hist.end()), ws(w_hist.begin(), w_hist.end());
        const auto s = oracle->mdp.encode(ys, ws);
        row.state = static_cast<long long>(s);
        row.optimal = oracle->solution.is_optimal(s, row.wav) ? 1 : 0;
      }
      if (!d.predicted.empty()) row.tv = total_variation(d.predicted, scene.next_obs_dist(row.wav));

      // Everything random below comes from streams that do not depend on the arm.
      Rng step_rng = make_rng(cfg.seed, {kStepStream, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k)});
      const SceneStep st = scene.step(row.wav, step_rng);
      const double u_detect = uniform01(step_rng);
      std::normal_distribution<double> noise;
      const Vec2 white(noise(step_rng), noise(step_rng));
      truth = model.transition * truth + model.noise_input * (tc.accel_std * gauss(truth_rng));

      row.channel = st.channel;
      row.sinr_db = st.sinr_db;
      const double eta = db_to_linear(st.sinr_db);
      row.detected = u_detect < detection_probability(st.sinr_db);
      double normalized = std::numeric_limits<double>::infinity();
      if (row.detected) {
        const Mat2 r = crlb[static_cast<std::size_t>(row.wav)] * (eta_ref / eta);
        const Vec2 z = truth + Eigen::LLT<Mat2>(r).matrixL() * white;
        const auto upd = track_update(est, z, r, model);
        row.innov_range = upd.innovation(0);
        row.innov_rate = upd.innovation(1);
        normalized = upd.innovation.dot(upd.innovation_cov.ldlt().solve(upd.innovation));
        row.cost = innovation_cost(upd.innovation, cfg.cost.lambda, cfg.cost.nu_ref, cfg.cost.g_max);
        est = upd.state;
      } else {
        est = predict(est, model);
        row.cost = cfg.cost.g_max;
      }
      if (cfg.cost.objective == Objective::kEntropy) {
        const auto e = grid_energies(cfg, scene, st.target_cell, eta, step_rng);
        row.cost = entropy_cost(e, cfg.cost.detection_threshold, cfg.cost.softness, cfg.cost.entropy_sign,
                                cfg.cost.g_max);
      }
      const int next_obs = nq == 1 ? st.channel_observed
                                   : quantize_observation(st.channel_observed, normalized, row.detected,
                                                          tc.quality_bins, nq);
      policy->observe_transition(row.obs, row.wav, row.cost, next_obs);

      row.true_range = truth(0);
      row.true_rate = truth(1);
      row.est_range = est.mean(0);
      row.est_rate = est.mean(1);
      row.sq_error = (est.mean(0) - truth(0)) * (est.mean(0) - truth(0));
      row.model_size = policy->model_size();
      log.rows.push_back(row);

      y_hist.push_back(next_obs);
      if (y_hist.size() > u) y_hist.pop_front();
      w_hist.push_back(row.wav);
      if (w_hist.size() + 1 > u) w_hist.pop_front();
    }
  }
  return log;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, Execution exec) {
  cfg.validate();
  const auto crlb = library_crlb(cfg);
  ExperimentResult result;
  result.oracle = build_oracle(cfg, crlb);
  const bool wants_oracle = std::find(cfg.arms.begin(), cfg.arms.end(), Arm::kOracle) != cfg.arms.end();
  if (wants_oracle && !result.oracle) throw ConfigError("oracle arm requested but the scene cannot be tabulated");

  const auto n = static_cast<std::ptrdiff_t>(cfg.arms.size());
  result.logs.resize(cfg.arms.size());
  std::vector<std::exception_ptr> errors(cfg.arms.size());
  auto one = [&](std::ptrdiff_t i) {
    try {
      result.logs[static_cast<std::size_t>(i)] = run_arm(cfg, cfg.arms[static_cast<std::size_t>(i)], crlb, result.oracle);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  result.metrics = compute_metrics(result.logs, result.oracle, cfg.inaccuracy_eps);
  return result;
}

// ---- metrics ----------------------------------------------------------------------

std::vector<double> suboptimal_fraction(const EpisodeLog& log, const DpSolution& solution) {
  std::vector<double> bad(static_cast<std::size_t>(log.tracks), 0.0), count(bad.size(), 0.0);
  for (const auto& r : log.rows) {
    if (r.state < 0) throw std::out_of_range("log row has no oracle state");
    const auto set = solution.optimal_action_set(static_cast<std::size_t>(r.state));
    const auto t = static_cast<std::size_t>(r.track);
    count.at(t) += 1;
    if (std::find(set.begin(), set.end(), r.wav) == set.end()) bad[t] += 1;
  }
  for (std::size_t t = 0; t < bad.size(); ++t)
    bad[t] = count[t] > 0 ? bad[t] / count[t] : std::numeric_limits<double>::quiet_NaN();
  return bad;
}

std::vector<double> inaccuracy_fraction(const EpisodeLog& log, double eps) {
  std::vector<double> bad(static_cast<std::size_t>(log.tracks), 0.0), count(bad.size(), 0.0);
  for (const auto& r : log.rows) {
    const auto t = static_cast<std::size_t>(r.track);
    count.at(t) += 1;
    if (!r.known || std::isnan(r.tv) || r.tv > eps) bad[t] += 1;
  }
  for (std::size_t t = 0; t < bad.size(); ++t)
    bad[t] = count[t] > 0 ? bad[t] / count[t] : std::numeric_limits<double>::quiet_NaN();
  return bad;
}

namespace {

Aggregate aggregate(const std::string& arm, const std::string& metric, const std::vector<double>& v) {
  Aggregate a;
  a.arm = arm;
  a.metric = metric;
  a.n = static_cast<int>(v.size());
  if (v.empty()) {
    a.mean = a.ci_low = a.ci_high = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  const double n = static_cast<double>(v.size());
  a.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2 || std::isnan(a.mean)) {
    a.ci_low = a.ci_high = a.mean;
    return a;
  }
  double ss = 0;
  for (double x : v) ss += (x - a.mean) * (x - a.mean);
  const boost::math::students_t dist(n - 1);
  const double half = boost::math::quantile(boost::math::complement(dist, 0.025)) * std::sqrt(ss / (n - 1) / n);
  a.ci_low = a.mean - half;
  a.ci_high = a.mean + half;
  return a;
}

double metric_of(const TrackMetrics& m, const std::string& name) {
  if (name == "rmse") return m.rmse;
  if (name == "mean_sinr_db") return m.mean_sinr_db;
  if (name == "suboptimal") return m.suboptimal;
  if (name == "inaccuracy") return m.inaccuracy;
  if (name == "mean_cost") return m.mean_cost;
  if (name == "model_size") return static_cast<double>(m.model_size);
  throw ValidationError("unknown metric: " + name);
}

const std::vector<std::string> kMetricNames{"rmse", "mean_sinr_db", "suboptimal", "inaccuracy", "mean_cost",
                                            "model_size"};

}  // namespace

MetricsTable compute_metrics(std::span<const EpisodeLog> logs, const std::optional<Oracle>& oracle, double eps,
                             int last_tracks) {
  MetricsTable table;
  for (const auto& log : logs) {
    const auto inacc = inaccuracy_fraction(log, eps);
    std::vector<double> sub(inacc.size(), std::numeric_limits<double>::quiet_NaN());
    if (oracle) sub = suboptimal_fraction(log, oracle->solution);
    std::vector<TrackMetrics> rows(static_cast<std::size_t>(log.tracks));
    std::vector<double> n(rows.size(), 0.0);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      rows[t].arm = log.arm;
      rows[t].track = static_cast<int>(t);
      rows[t].suboptimal = sub[t];
      rows[t].inaccuracy = inacc[t];
    }
    for (const auto& r : log.rows) {
      auto& m = rows.at(static_cast<std::size_t>(r.track));
      n[static_cast<std::size_t>(r.track)] += 1;
      m.rmse += r.sq_error;
      m.mean_sinr_db += r.sinr_db;
      m.mean_cost += r.cost;
      m.model_size = r.model_size;
    }
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (n[t] == 0) continue;
      rows[t].rmse = std::sqrt(rows[t].rmse / n[t]);
      rows[t].mean_sinr_db /= n[t];
      rows[t].mean_cost /= n[t];
    }
    for (const auto& name : kMetricNames) {
      std::vector<double> all, last;
      for (const auto& m : rows) {
        all.push_back(metric_of(m, name));
        if (m.track >= log.tracks - last_tracks) last.push_back(metric_of(m, name));
      }
      table.aggregates.push_back(aggregate(log.arm, name, all));
      table.aggregates.push_back(aggregate(log.arm, "final_" + name, last));
    }
    table.tracks.insert(table.tracks.end(), rows.begin(), rows.end());
  }
  return table;
}

std::vector<double> MetricsTable::series(const std::string& arm, const std::string& metric) const {
  std::vector<std::pair<int, double>> v;
  for (const auto& m : tracks)
    if (m.arm == arm) v.emplace_back(m.track, metric_of(m, metric));
  std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first < b.first; });
  std::vector<double> out;
  for (const auto& p : v) out.push_back(p.second);
  return out;
}

bool TrackMetrics::operator==(const TrackMetrics& o) const {
  return arm == o.arm && track == o.track && same(rmse, o.rmse) && same(mean_sinr_db, o.mean_sinr_db) &&
         same(suboptimal, o.suboptimal) && same(inaccuracy, o.inaccuracy) && same(mean_cost, o.mean_cost) &&
         model_size == o.model_size;
}

bool Aggregate::operator==(const Aggregate& o) const {
  return arm == o.arm && metric == o.metric && same(mean, o.mean) && same(ci_low, o.ci_low) &&
         same(ci_high, o.ci_high) && n == o.n;
}

// ---- serialization ------------------------------------------------------------------

namespace {
constexpr const char* kLogColumns =
    "track,k,obs,wav,explored,known,detected,cost,sinr_db,channel,true_range,true_rate,est_range,est_rate,"
    "innov_range,innov_rate,sq_error,state,optimal,tv,model_size";
constexpr const char* kTrackColumns = "arm,track,rmse,mean_sinr_db,suboptimal,inaccuracy,mean_cost,model_size";
constexpr const char* kAggregateColumns = "arm,metric,mean,ci_low,ci_high,n";

std::string num(double v) { return fmt::format("{:.17g}", v); }
}  // namespace

void EpisodeLog::write_csv(std::ostream& os) const {
  os << fmt::format("# wavesel-episode-log v1 arm={} tracks={} cpis={}\n", arm, tracks, cpis);
  os << kLogColumns << '\n';
  for (const auto& r : rows) {
    os << fmt::format("{},{},{},{},{:d},{:d},{:d},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.track, r.k, r.obs,
                      r.wav, r.explored, r.known, r.detected, num(r.cost), num(r.sinr_db), r.channel,
                      num(r.true_range), num(r.true_rate), num(r.est_range), num(r.est_rate), num(r.innov_range),
                      num(r.innov_rate), num(r.sq_error), r.state, r.optimal, num(r.tv), r.model_size);
  }
}

EpisodeLog EpisodeLog::read_csv(std::istream& is) {
  EpisodeLog log;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# wavesel-episode-log v1", 0) != 0)
    throw ValidationError("episode log schema header missing");
  std::istringstream hs(line.substr(std::string("# wavesel-episode-log v1").size()));
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "arm") log.arm = val;
    else if (key == "tracks") log.tracks = std::stoi(val);
    else if (key == "cpis") log.cpis = std::stoi(val);
  }
  if (!std::getline(is, line) || line != kLogColumns) throw ValidationError("episode log column header mismatch");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 21) throw ValidationError("episode log row has the wrong field count");
    try {
      EpisodeRow r;
      r.track = std::stoi(f[0]);
      r.k = std::stoi(f[1]);
      r.obs = std::stoi(f[2]);
      r.wav = std::stoi(f[3]);
      r.explored = f[4] == "1";
      r.known = f[5] == "1";
      r.detected = f[6] == "1";
      r.cost = parse_num(f[7]);
      r.sinr_db = parse_num(f[8]);
      r.channel = std::stoi(f[9]);
      r.true_range = parse_num(f[10]);
      r.true_rate = parse_num(f[11]);
      r.est_range = parse_num(f[12]);
      r.est_rate = parse_num(f[13]);
      r.innov_range = parse_num(f[14]);
      r.innov_rate = parse_num(f[15]);
      r.sq_error = parse_num(f[16]);
      r.state = std::stoll(f[17]);
      r.optimal = std::stoi(f[18]);
      r.tv = parse_num(f[19]);
      r.model_size = std::stoull(f[20]);
      log.rows.push_back(r);
    } catch (const std::invalid_argument&) {
      throw ValidationError("malformed episode log row: " + line);
    } catch (const std::out_of_range&) {
      throw ValidationError("malformed episode log row: " + line);
    }
  }
  return log;
}

void MetricsTable::write_csv(std::ostream& os) const {
  os << "# wavesel-metrics v1 section=tracks\n" << kTrackColumns << '\n';
  for (const auto& m : tracks)
    os << fmt::format("{},{},{},{},{},{},{},{}\n", m.arm, m.track, num(m.rmse), num(m.mean_sinr_db),
                      num(m.suboptimal), num(m.inaccuracy), num(m.mean_cost), m.model_size);
  os << "# wavesel-metrics v1 section=aggregates\n" << kAggregateColumns << '\n';
  for (const auto& a : aggregates)
    os << fmt::format("{},{},{},{},{},{}\n", a.arm, a.metric, num(a.mean), num(a.ci_low), num(a.ci_high), a.n);
}

MetricsTable MetricsTable::read_csv(std::istream& is) {
  MetricsTable t;
  std::string line;
  int section = 0;
  bool expect_columns = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# wavesel-metrics v1 section=", 0) == 0) {
      section = line.ends_with("tracks") ? 1 : line.ends_with("aggregates") ? 2 : 0;
      if (section == 0) throw ValidationError("unknown metrics section: " + line);
      expect_columns = true;
      continue;
    }
    if (expect_columns) {
      if (line != (section == 1 ? kTrackColumns : kAggregateColumns))
        throw ValidationError("metrics column header mismatch");
      expect_columns = false;
      continue;
    }
    const auto f = split_csv(line);
    try {
      if (section == 1 && f.size() == 8) {
        t.tracks.push_back({f[0], std::stoi(f[1]), parse_num(f[2]), parse_num(f[3]), parse_num(f[4]),
                            parse_num(f[5]), parse_num(f[6]), std::stoull(f[7])});
      } else if (section == 2 && f.size() == 6) {
        t.aggregates.push_back({f[0], f[1], parse_num(f[2]), parse_num(f[3]), parse_num(f[4]), std::stoi(f[5])});
      } else {
        throw ValidationError("malformed metrics row: " + line);
      }
    } catch (const std::invalid_argument&) {
      throw ValidationError("malformed metrics row: " + line);
    }
  }
  if (section == 0) throw ValidationError("metrics schema header missing");
  return t;
}

nlohmann::json MetricsTable::to_json() const {
  auto val = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json j;
  j["schema"] = "wavesel-metrics";
  j["version"] = 1;
  j["tracks"] = nlohmann::json::array();
  for (const auto& m : tracks)
    j["tracks"].push_back({{"arm", m.arm}, {"track", m.track}, {"rmse", val(m.rmse)},
                           {"mean_sinr_db", val(m.mean_sinr_db)}, {"suboptimal", val(m.suboptimal)},
                           {"inaccuracy", val(m.inaccuracy)}, {"mean_cost", val(m.mean_cost)},
                           {"model_size", m.model_size}});
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : aggregates)
    j["aggregates"].push_back({{"arm", a.arm}, {"metric", a.metric}, {"mean", val(a.mean)},
                               {"ci_low", val(a.ci_low)}, {"ci_high", val(a.ci_high)}, {"n", a.n}});
  return j;
}

void emit_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(out_dir / name);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
    return f;
  };
  for (const auto& log : result.logs) {
    auto f = open("log_" + log.arm + ".csv");
    log.write_csv(f);
  }
  {
    auto f = open("metrics.csv");
    result.metrics.write_csv(f);
  }
  {
    auto f = open("metrics.json");
    f << result.metrics.to_json().dump(2) << '\n';
  }
  if (result.oracle) {
    auto f = open("oracle.json");
    f << result.oracle->solution.to_json(result.oracle->mdp).dump() << '\n';
  }
  std::vector<std::string> arms;
  for (const auto& m : result.metrics.tracks)
    if (std::find(arms.begin(), arms.end(), m.arm) == arms.end()) arms.push_back(m.arm);
  for (const auto& metric : kMetricNames) {
    auto f = open("series_" + metric + ".csv");
    f << "# wavesel-series v1 metric=" << metric << '\n' << "track";
    for (const auto& a : arms) f << ',' << a;
    f << '\n';
    std::vector<std::vector<double>> cols;
    std::size_t len = 0;
    for (const auto& a : arms) {
      cols.push_back(result.metrics.series(a, metric));
      len = std::max(len, cols.back().size());
    }
    for (std::size_t t = 0; t < len; ++t) {
      f << t;
      for (const auto& c : cols) f << ',' << (t < c.size() ? num(c[t]) : "");
      f << '\n';
    }
  }
}

}  // namespace wavesel
