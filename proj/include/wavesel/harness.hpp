#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavesel/ctw_learner.hpp"
#include "wavesel/oracle_dp.hpp"
#include "wavesel/parallel.hpp"
#include "wavesel/policy.hpp"
#include "wavesel/scene.hpp"
#include "wavesel/tracker.hpp"
#include "wavesel/waveform.hpp"

namespace wavesel {

enum class Arm { kCtw, kCtwLimited, kActiveLz, kFirstOrder, kRandom, kOracle };

std::string arm_name(Arm arm);
Arm arm_from_string(const std::string& s);

struct LearnerConfig {
  int depth = 4;
  double gamma = 0.95;
  ExplorationSchedule exploration{};
  PhraseRestart restart = PhraseRestart::kSlide;
  int refresh = 100;
  bool persist = true;  // keep learner state from one track to the next
};

struct TrackerConfig {
  double carrier_hz = 3e9;
  double snr_ref_db = 20.0;  // SNR at which the waveform CRLBs are tabulated
  double accel_std = 1.0;    // m/s^2
  double range_min = 5e3, range_max = 15e3;
  double rate_std = 30.0;
  double init_range_std = 50.0, init_rate_std = 5.0;
  std::vector<double> quality_bins{};  // n_quality - 1 thresholds on the normalized innovation
};

struct ExperimentConfig {
  SceneSpec scene;
  std::vector<Arm> arms{Arm::kCtw, Arm::kFirstOrder};
  int tracks = 50;
  int cpis = 200;
  int pulses = 128;
  double pri = 0.4e-3;
  LearnerConfig learner;
  CostConfig cost;
  TrackerConfig tracker;
  std::vector<WaveformSpec> library;
  double sample_rate = 0;  // 0 picks four times the widest occupied bandwidth
  double inaccuracy_eps = 0.1;
  HiddenStateMode oracle_mode = HiddenStateMode::kDirect;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  void validate() const;
  double cpi_duration() const { return pulses * pri; }
};

// Flat "key = value" text, '#' starts a comment. Unknown keys are rejected.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const ExperimentConfig& cfg);

struct EpisodeRow {
  int track = 0;
  int k = 0;
  int obs = 0;
  int wav = 0;
  bool explored = false;
  bool known = false;
  bool detected = false;
  double cost = 0;
  double sinr_db = 0;
  int channel = 0;
  double true_range = 0, true_rate = 0;
  double est_range = 0, est_rate = 0;
  double innov_range = 0, innov_rate = 0;
  double sq_error = 0;  // squared range error after the update
  long long state = -1; // expanded oracle state, -1 when no oracle exists
  int optimal = -1;     // 1/0 when an oracle exists
  double tv = std::numeric_limits<double>::quiet_NaN();  // model vs true next-observation law
  std::size_t model_size = 0;
};

struct EpisodeLog {
  std::string arm;
  int tracks = 0;
  int cpis = 0;
  std::vector<EpisodeRow> rows;

  void write_csv(std::ostream& os) const;
  static EpisodeLog read_csv(std::istream& is);
};

struct TrackMetrics {
  std::string arm;
  int track = 0;
  double rmse = 0;
  double mean_sinr_db = 0;
  double suboptimal = 0;   // NaN without an oracle
  double inaccuracy = 0;
  double mean_cost = 0;
  std::size_t model_size = 0;

  // NaN fields compare equal to NaN
  bool operator==(const TrackMetrics& o) const;
};

struct Aggregate {
  std::string arm;
  std::string metric;
  double mean = 0;
  double ci_low = 0, ci_high = 0;
  int n = 0;

  bool operator==(const Aggregate& o) const;
};

struct MetricsTable {
  std::vector<TrackMetrics> tracks;
  std::vector<Aggregate> aggregates;

  std::vector<double> series(const std::string& arm, const std::string& metric) const;
  void write_csv(std::ostream& os) const;
  static MetricsTable read_csv(std::istream& is);
  nlohmann::json to_json() const;
};

struct Oracle {
  ExpandedMdp mdp;
  DpSolution solution;
};

struct ExperimentResult {
  std::vector<EpisodeLog> logs;
  MetricsTable metrics;
  std::optional<Oracle> oracle;
};

// Expected stage cost per (channel, waveform, quality), used to build the oracle MDP.
std::vector<double> surrogate_costs(const ExperimentConfig& cfg, const Scene& scene,
                                    std::span<const Mat2> crlb_at_ref);
// Measurement CRLB of each library waveform at the reference SNR, in (m, m/s).
std::vector<Mat2> library_crlb(const ExperimentConfig& cfg);
// Oracle for the configured scene; nullopt when the scene is too large to tabulate.
std::optional<Oracle> build_oracle(const ExperimentConfig& cfg, std::span<const Mat2> crlb_at_ref);

ExperimentResult run_experiment(const ExperimentConfig& cfg, Execution exec = Execution::kParallel);
EpisodeLog run_arm(const ExperimentConfig& cfg, Arm arm, std::span<const Mat2> crlb_at_ref,
                   const std::optional<Oracle>& oracle);

// Per track: share of CPIs whose waveform lies outside the oracle's optimal set.
std::vector<double> suboptimal_fraction(const EpisodeLog& log, const DpSolution& solution);
// Per track: share of CPIs with an unvisited context or model TV distance above eps.
std::vector<double> inaccuracy_fraction(const EpisodeLog& log, double eps);
MetricsTable compute_metrics(std::span<const EpisodeLog> logs, const std::optional<Oracle>& oracle, double eps,
                             int last_tracks = 10);

void emit_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir);

double total_variation(std::span<const double> p, std::span<const double> q);
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace wavesel
