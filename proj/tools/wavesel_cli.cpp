// Command-line front end: run experiments, solve oracles, inspect waveforms.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wavesel/errors.hpp"
#include "wavesel/harness.hpp"

namespace {

using namespace wavesel;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> tracks, cpis;
  std::optional<std::string> out_dir, arms;
};

void add_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--seed", o.seed, "base random seed");
  app->add_option("--tracks", o.tracks, "number of target tracks");
  app->add_option("--cpis", o.cpis, "CPIs per track");
  app->add_option("--out-dir", o.out_dir, "output directory");
  app->add_option("--arms", o.arms, "comma-separated algorithm arms");
}

ExperimentConfig load(const std::string& path, const Overrides& o) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  if (o.seed) text += fmt::format("\nseed = {}", *o.seed);
  if (o.tracks) text += fmt::format("\ntracks = {}", *o.tracks);
  if (o.cpis) text += fmt::format("\ncpis = {}", *o.cpis);
  if (o.out_dir) text += fmt::format("\nout_dir = {}", *o.out_dir);
  if (o.arms) text += fmt::format("\narms = {}", *o.arms);
  std::istringstream is(text + "\n");
  return parse_config(is);
}

int cmd_run(const ExperimentConfig& cfg, bool serial) {
  const auto result = run_experiment(cfg, serial ? Execution::kSerial : Execution::kParallel);
  emit_outputs(result, cfg.out_dir);
  {
    std::ofstream f(std::filesystem::path(cfg.out_dir) / "config.txt");
    f << config_to_text(cfg);
  }
  fmt::print("{:<12} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "arm", "rmse", "sinr_db", "subopt", "inacc", "cost");
  for (const auto& log : result.logs) {
    auto get = [&](const std::string& m) {
      for (const auto& a : result.metrics.aggregates)
        if (a.arm == log.arm && a.metric == m) return a.mean;
      return std::numeric_limits<double>::quiet_NaN();
    };
    fmt::print("{:<12} {:>10.3f} {:>10.3f} {:>10.3f} {:>10.3f} {:>10.4f}   (final tracks)\n", log.arm,
               get("final_rmse"), get("final_mean_sinr_db"), get("final_suboptimal"), get("final_inaccuracy"),
               get("final_mean_cost"));
  }
  fmt::print("outputs in {}\n", cfg.out_dir);
  return 0;
}

int cmd_oracle(const ExperimentConfig& cfg) {
  const auto crlb = library_crlb(cfg);
  const auto oracle = build_oracle(cfg, crlb);
  if (!oracle) throw ConfigError("scene is too large to tabulate an oracle");
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / "oracle.json";
  std::ofstream(path) << oracle->solution.to_json(oracle->mdp).dump(2) << '\n';
  const auto& s = oracle->solution;
  fmt::print("states {}  iterations {}  average cost {:.6f}  communicating {}\n", oracle->mdp.n_states(),
             s.iterations, s.average.lambda, s.average.communicating);
  fmt::print("written {}\n", path.string());
  return 0;
}

int cmd_af(const std::string& spec_text, double fs, int n_delay, int n_doppler, double max_delay,
           double max_doppler, const std::string& out, bool serial) {
  const auto spec = WaveformSpec::parse(spec_text);
  if (fs == 0) fs = 4 * spec.occupied_bandwidth();
  const auto env = synthesize(spec, fs);
  if (max_delay == 0) max_delay = spec.pulse_support();
  if (max_doppler == 0) max_doppler = 2.0 / spec.duration;
  auto grid = [](double lim, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(n == 1 ? 0.0 : -lim + 2 * lim * i / (n - 1));
    return g;
  };
  const auto delays = grid(max_delay, n_delay), dopplers = grid(max_doppler, n_doppler);
  const auto surf = ambiguity_surface(env, delays, dopplers, serial ? Execution::kSerial : Execution::kParallel);
  if (out.empty() || out == "-") {
    surf.write_csv(std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    surf.write_csv(f);
  }
  const auto m = envelope_moments(env);
  std::cerr << fmt::format("{}  samples {}  rms bandwidth {:.6g} Hz  rms duration {:.6g} s  coupling {:.6g}\n",
                           spec.to_string(), env.size(), std::sqrt(m.freq_spread()), std::sqrt(m.time_spread()),
                           m.coupling());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waveform selection experiments"};
  app.require_subcommand(1);

  Overrides run_o, oracle_o, validate_o;
  std::string run_cfg, oracle_cfg, validate_cfg;
  bool serial = false;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", run_cfg, "config file")->required()->check(CLI::ExistingFile);
  run->add_flag("--serial", serial, "run arms one after another");
  add_overrides(run, run_o);

  auto* oracle = app.add_subcommand("oracle", "solve the expanded-state MDP for a scene");
  oracle->add_option("config", oracle_cfg, "config file")->required()->check(CLI::ExistingFile);
  add_overrides(oracle, oracle_o);

  auto* validate = app.add_subcommand("validate", "check a config file and print it normalized");
  validate->add_option("config", validate_cfg, "config file")->required()->check(CLI::ExistingFile);
  add_overrides(validate, validate_o);

  auto* waveform = app.add_subcommand("waveform", "waveform utilities");
  waveform->require_subcommand(1);
  auto* af = waveform->add_subcommand("af", "periodic ambiguity surface as CSV");
  std::string spec, out;
  double fs = 0, max_delay = 0, max_doppler = 0;
  int n_delay = 65, n_doppler = 65;
  af->add_option("spec", spec, "e.g. \"lfm T=1e-5 B=1e6\"")->required();
  af->add_option("--fs", fs, "sample rate in Hz (default four times the bandwidth)");
  af->add_option("--delays", n_delay, "delay grid points")->check(CLI::PositiveNumber);
  af->add_option("--dopplers", n_doppler, "Doppler grid points")->check(CLI::PositiveNumber);
  af->add_option("--max-delay", max_delay, "delay half-span in s");
  af->add_option("--max-doppler", max_doppler, "Doppler half-span in Hz");
  af->add_option("-o,--out", out, "output CSV (stdout if omitted)");
  af->add_flag("--serial", serial, "single-threaded evaluation");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(load(run_cfg, run_o), serial);
    if (oracle->parsed()) return cmd_oracle(load(oracle_cfg, oracle_o));
    if (validate->parsed()) {
      std::cout << config_to_text(load(validate_cfg, validate_o));
      return 0;
    }
    if (af->parsed()) return cmd_af(spec, fs, n_delay, n_doppler, max_delay, max_doppler, out, serial);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
