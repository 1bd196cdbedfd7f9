#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "wavesel/errors.hpp"
#include "wavesel/harness.hpp"

using namespace wavesel;
namespace fs = std::filesystem;

namespace {

ExperimentConfig preset(const std::string& name, int tracks, int cpis) {
  auto cfg = load_config(fs::path(WAVESEL_SOURCE_DIR) / "configs" / (name + ".cfg"));
  cfg.tracks = tracks;
  cfg.cpis = cpis;
  return cfg;
}

std::string log_text(const EpisodeLog& log) {
  std::ostringstream os;
  log.write_csv(os);
  return os.str();
}

std::string metrics_text(const MetricsTable& m) {
  std::ostringstream os;
  m.write_csv(os);
  return os.str();
}

const EpisodeLog& log_of(const ExperimentResult& r, const std::string& arm) {
  for (const auto& l : r.logs)
    if (l.arm == arm) return l;
  throw std::runtime_error("missing arm " + arm);
}

// Two observations, two waveforms. Waveform 0 is strictly better everywhere unless `tied`.
ExpandedMdp tiny_mdp(bool tied) {
  ExpandedMdp m;
  m.order = 1;
  m.n_obs = 2;
  m.n_wav = 2;
  m.trans = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  for (int y = 0; y < 2; ++y)
    for (int w = 0; w < 2; ++w)
      for (int y2 = 0; y2 < 2; ++y2) m.cost.push_back(tied ? 0.4 : 0.2 + 0.5 * w);
  return m;
}

EpisodeLog synthetic_log(int tracks, int per_track, const std::function<EpisodeRow(int, int)>& make) {
  EpisodeLog log;
  log.arm = "synthetic";
  log.tracks = tracks;
  log.cpis = per_track;
  for (int t = 0; t < tracks; ++t)
    for (int k = 0; k < per_track; ++k) log.rows.push_back(make(t, k));
  return log;
}

}  // namespace

TEST_CASE("preset configs parse and round trip through text") {
  for (const char* name : {"adversarial", "mtd"}) {
    const auto cfg = preset(name, 50, 200);
    CHECK_NOTHROW(cfg.validate());
    const auto text = config_to_text(cfg);
    std::istringstream is(text);
    CHECK(config_to_text(parse_config(is)) == text);
  }
  const auto adv = preset("adversarial", 50, 200);
  CHECK(adv.scene.kind == SceneKind::kAdversarial);
  CHECK(adv.arms.size() == 6);
  CHECK(adv.library.size() == 2);
}

TEST_CASE("config errors") {
  auto parse = [](const std::string& s) {
    std::istringstream is(s);
    return parse_config(is);
  };
  CHECK_THROWS_AS(parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("tracks\n"), ConfigError);
  CHECK_THROWS_AS(parse("tracks = many\n"), ConfigError);
  CHECK_THROWS_AS(parse("arms = ctw, sorcery\n"), ConfigError);
  CHECK_THROWS_AS(parse("learner.restart = sometimes\n"), ConfigError);
  CHECK_THROWS_AS(parse("waveform.1 = lfm T=1e-5 B=1e6\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);

  auto cfg = preset("adversarial", 2, 2);
  cfg.tracks = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("adversarial", 2, 2);
  cfg.learner.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("adversarial", 2, 2);
  cfg.library.pop_back();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("adversarial", 2, 2);
  cfg.scene.n_quality = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // needs one quality threshold
  cfg = preset("adversarial", 2, 2);
  cfg.arms.clear();
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("smallest experiment") {
  auto cfg = preset("adversarial", 1, 1);
  cfg.arms = {Arm::kRandom};
  const auto r = run_experiment(cfg);
  REQUIRE(r.logs.size() == 1);
  CHECK(r.logs[0].rows.size() == 1);
  CHECK(r.metrics.tracks.size() == 1);
  CHECK(r.oracle.has_value());
  CHECK(r.metrics.series("random", "rmse").size() == 1);
}

TEST_CASE("experiments are reproducible and independent of threading") {
  const auto cfg = preset("adversarial", 4, 60);
  const auto a = run_experiment(cfg, Execution::kParallel);
  const auto b = run_experiment(cfg, Execution::kParallel);
  const auto c = run_experiment(cfg, Execution::kSerial);
  REQUIRE(a.logs.size() == cfg.arms.size());
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    CHECK(log_text(a.logs[i]) == log_text(b.logs[i]));
    CHECK(log_text(a.logs[i]) == log_text(c.logs[i]));
  }
  CHECK(metrics_text(a.metrics) == metrics_text(c.metrics));

  auto other = cfg;
  other.seed = 2;
  CHECK(log_text(run_experiment(other).logs[0]) != log_text(a.logs[0]));
}

TEST_CASE("arms share the random streams") {
  // the mtd emitter ignores the radar, so every arm sees the same channels and targets
  const auto r = run_experiment(preset("mtd", 3, 80));
  const auto& ref = r.logs.front();
  for (const auto& log : r.logs) {
    REQUIRE(log.rows.size() == ref.rows.size());
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
      CHECK(log.rows[i].channel == ref.rows[i].channel);
      CHECK(log.rows[i].true_range == ref.rows[i].true_range);
      CHECK(log.rows[i].true_rate == ref.rows[i].true_rate);
    }
  }
}

TEST_CASE("log, metrics and trace files round trip") {
  const auto r = run_experiment(preset("adversarial", 3, 40));
  for (const auto& log : r.logs) {
    std::istringstream is(log_text(log));
    const auto back = EpisodeLog::read_csv(is);
    CHECK(back.arm == log.arm);
    CHECK(back.tracks == log.tracks);
    CHECK(back.rows.size() == log.rows.size());
    CHECK(log_text(back) == log_text(log));
  }
  {
    std::istringstream is(metrics_text(r.metrics));
    const auto back = MetricsTable::read_csv(is);
    CHECK(back.tracks == r.metrics.tracks);
    CHECK(back.aggregates == r.metrics.aggregates);
  }
  {
    const MetricsTable empty;
    const auto text = metrics_text(empty);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    std::istringstream is(text);
    const auto back = MetricsTable::read_csv(is);
    CHECK(back.tracks.empty());
    CHECK(back.aggregates.empty());
  }
  {
    std::vector<TraceRow> rows{{0, 0xdeadbeefULL, 1, true, 0.25}, {1, 42, 0, false, 1.0 / 3}};
    std::ostringstream os;
    write_trace_csv(os, rows);
    std::istringstream is(os.str());
    const auto back = read_trace_csv(is);
    REQUIRE(back.size() == 2);
    CHECK(back[0].context_hash == 0xdeadbeefULL);
    CHECK(back[1].cost == 1.0 / 3);
    CHECK(back[0].explored);
  }
  std::istringstream bad("not a log\n");
  CHECK_THROWS_AS(EpisodeLog::read_csv(bad), ValidationError);
}

TEST_CASE("metrics recomputed from the log") {
  const auto r = run_experiment(preset("adversarial", 5, 50));
  for (const auto& log : r.logs) {
    const auto rmse = r.metrics.series(log.arm, "rmse");
    const auto cost = r.metrics.series(log.arm, "mean_cost");
    REQUIRE(rmse.size() == 5);
    for (int t = 0; t < 5; ++t) {
      double se = 0, g = 0;
      int n = 0;
      for (const auto& row : log.rows)
        if (row.track == t) {
          se += (row.est_range - row.true_range) * (row.est_range - row.true_range);
          g += row.cost;
          ++n;
        }
      CHECK(rmse[static_cast<std::size_t>(t)] == doctest::Approx(std::sqrt(se / n)).epsilon(1e-9));
      CHECK(cost[static_cast<std::size_t>(t)] == doctest::Approx(g / n).epsilon(1e-12));
    }
  }
}

TEST_CASE("suboptimal fraction") {
  SUBCASE("following the optimal policy scores zero") {
    const auto mdp = tiny_mdp(false);
    const auto sol = value_iterate(mdp, 0.9, 1e-12, Execution::kSerial);
    const auto log = synthetic_log(3, 20, [&](int t, int k) {
      EpisodeRow r;
      r.track = t;
      r.k = k;
      r.state = (t + k) % 2;
      r.wav = sol.policy[static_cast<std::size_t>(r.state)];
      return r;
    });
    for (double v : suboptimal_fraction(log, sol)) CHECK(v == 0.0);
  }
  SUBCASE("all waveforms tied scores zero") {
    const auto sol = value_iterate(tiny_mdp(true), 0.9, 1e-12, Execution::kSerial);
    const auto log = synthetic_log(2, 30, [](int t, int k) {
      EpisodeRow r;
      r.track = t;
      r.state = k % 2;
      r.wav = (k / 2) % 2;
      return r;
    });
    for (double v : suboptimal_fraction(log, sol)) CHECK(v == 0.0);
  }
  SUBCASE("uniform random choice scores one half") {
    const auto sol = value_iterate(tiny_mdp(false), 0.9, 1e-12, Execution::kSerial);
    Rng rng(7);
    const auto log = synthetic_log(1, 2000, [&](int, int k) {
      EpisodeRow r;
      r.state = k % 2;
      r.wav = uniform_int(rng, 2);
      return r;
    });
    CHECK(std::abs(suboptimal_fraction(log, sol)[0] - 0.5) <= 0.05);
  }
}

TEST_CASE("inaccuracy fraction") {
  const auto log = synthetic_log(1, 4, [](int, int k) {
    EpisodeRow r;
    r.k = k;
    r.known = k != 0;
    r.tv = k == 1 ? 0.05 : k == 2 ? 0.5 : std::nan("");
    return r;
  });
  CHECK(inaccuracy_fraction(log, 0.1)[0] == doctest::Approx(0.75));
  CHECK(inaccuracy_fraction(log, 0.6)[0] == doctest::Approx(0.5));

  // the first decision of a fresh learner has no context to speak of
  auto cfg = preset("adversarial", 1, 1);
  cfg.arms = {Arm::kCtw};
  const auto r = run_experiment(cfg);
  CHECK_FALSE(r.logs[0].rows[0].known);
  CHECK(r.metrics.series("ctw", "inaccuracy")[0] == 1.0);
}

TEST_CASE("oracle arm follows the solved policy and beats random") {
  const auto cfg = preset("adversarial", 6, 100);
  const auto r = run_experiment(cfg);
  REQUIRE(r.oracle.has_value());
  const auto& oracle = log_of(r, "oracle");
  const auto u = r.oracle->mdp.order;
  for (const auto& row : oracle.rows) {
    const bool warm = row.track > 0 || row.k >= u;
    if (warm) CHECK(row.optimal == 1);
  }
  const auto sub = r.metrics.series("oracle", "suboptimal");
  for (std::size_t t = 1; t < sub.size(); ++t) CHECK(sub[t] == 0.0);

  double g_oracle = 0, g_random = 0;
  for (double v : r.metrics.series("oracle", "mean_cost")) g_oracle += v;
  for (double v : r.metrics.series("random", "mean_cost")) g_random += v;
  CHECK(g_oracle < g_random);
  const auto rnd_sub = r.metrics.series("random", "suboptimal");
  double mean_sub = 0;
  for (double v : rnd_sub) mean_sub += v / static_cast<double>(rnd_sub.size());
  CHECK(mean_sub > 0.3);
}

TEST_CASE("statistics helpers") {
  const std::vector<double> x{1, 2, 2, 3}, y{1, 3, 2, 4};
  CHECK(spearman(x, y) == doctest::Approx(4.5 / std::sqrt(22.5)).epsilon(1e-12));
  const std::vector<double> up{1, 2, 3, 4, 5}, down{9, 7, 5, 3, 1};
  CHECK(spearman(up, down) == doctest::Approx(-1.0));
  CHECK(spearman(up, up) == doctest::Approx(1.0));
  const std::vector<double> flat{2, 2, 2, 2, 2};
  CHECK(std::isnan(spearman(up, flat)));
  CHECK_THROWS_AS(spearman(up, x), ValidationError);
  const std::vector<double> p{0.2, 0.8}, q{0.5, 0.5};
  CHECK(total_variation(p, q) == doctest::Approx(0.3));
}

TEST_CASE("aggregates carry a t interval") {
  const auto r = run_experiment(preset("adversarial", 8, 30));
  for (const auto& a : r.metrics.aggregates) {
    if (a.metric != "mean_cost") continue;
    const auto v = r.metrics.series(a.arm, "mean_cost");
    CHECK(a.n == static_cast<int>(v.size()));
    double m = 0;
    for (double x : v) m += x / static_cast<double>(v.size());
    CHECK(a.mean == doctest::Approx(m).epsilon(1e-12));
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    // t_{0.975, 7} = 2.364624
    const double half = 2.364624 * std::sqrt(ss / 7.0 / 8.0);
    CHECK(a.ci_high - a.mean == doctest::Approx(half).epsilon(1e-5));
    CHECK(a.mean - a.ci_low == doctest::Approx(half).epsilon(1e-5));
  }
}

TEST_CASE("output files") {
  const auto dir = fs::temp_directory_path() / "wavesel_harness_test";
  fs::remove_all(dir);
  const auto cfg = preset("adversarial", 3, 10);
  const auto r = run_experiment(cfg);
  emit_outputs(r, dir);
  for (const auto& arm : cfg.arms) CHECK(fs::exists(dir / ("log_" + arm_name(arm) + ".csv")));
  for (const char* f : {"metrics.csv", "metrics.json", "oracle.json", "series_rmse.csv", "series_suboptimal.csv"})
    CHECK(fs::exists(dir / f));
  std::ifstream series(dir / "series_rmse.csv");
  std::string line;
  int lines = 0;
  while (std::getline(series, line)) ++lines;
  CHECK(lines == cfg.tracks + 2);
  std::ifstream log_file(dir / "log_ctw.csv");
  const auto back = EpisodeLog::read_csv(log_file);
  CHECK(log_text(back) == log_text(log_of(r, "ctw")));
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const auto dir = fs::temp_directory_path() / "wavesel_cli_test";
  fs::create_directories(dir);
  {
    std::ofstream bad(dir / "bad.cfg");
    bad << "tracks = 3\nmystery = 1\n";
  }
  const std::string cli = WAVESEL_CLI;
  const int bad_rc = std::system((cli + " validate " + (dir / "bad.cfg").string() + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(bad_rc) == 2);
  const auto good = (fs::path(WAVESEL_SOURCE_DIR) / "configs" / "mtd.cfg").string();
  const int ok_rc = std::system((cli + " validate " + good + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(ok_rc) == 0);
  fs::remove_all(dir);
}
