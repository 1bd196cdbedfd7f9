// Serial vs OpenMP timings for the parallel kernels. Argument 0 = serial, 1 = parallel.

#include <filesystem>

#include <benchmark/benchmark.h>

#include "wavesel/harness.hpp"

using namespace wavesel;

namespace {

Execution exec_of(const benchmark::State& st) { return st.range(0) ? Execution::kParallel : Execution::kSerial; }

ExperimentConfig preset(const char* name) {
  return load_config(std::filesystem::path(WAVESEL_SOURCE_DIR) / "configs" / (std::string(name) + ".cfg"));
}

void BM_AmbiguitySurface(benchmark::State& st) {
  WaveformSpec w;
  w.duration = 10e-6;
  w.bandwidth = 5e6;
  w.pri = 20e-6;
  const auto env = synthesize(w, 2e7);
  std::vector<double> delays, dopplers;
  for (int i = -32; i < 32; ++i) delays.push_back(i * 0.25e-6);
  for (int j = -32; j < 32; ++j) dopplers.push_back(j * 1e4);
  for (auto _ : st) benchmark::DoNotOptimize(ambiguity_surface(env, delays, dopplers, exec_of(st)));
}
BENCHMARK(BM_AmbiguitySurface)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BellmanSweep(benchmark::State& st) {
  const auto cfg = preset("mtd");
  const auto oracle = build_oracle(cfg, library_crlb(cfg));
  const auto& mdp = oracle->mdp;
  std::vector<double> value(mdp.n_states(), 0.0), out(mdp.n_states()), q(mdp.n_pairs());
  for (auto _ : st) {
    bellman_sweep(mdp, 0.95, value, out, q, exec_of(st));
    benchmark::DoNotOptimize(out.data());
  }
  st.counters["states"] = static_cast<double>(mdp.n_states());
}
BENCHMARK(BM_BellmanSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_ValueIteration(benchmark::State& st) {
  const auto cfg = preset("mtd");
  const auto oracle = build_oracle(cfg, library_crlb(cfg));
  for (auto _ : st) benchmark::DoNotOptimize(value_iterate(oracle->mdp, 0.95, 1e-10, exec_of(st)));
}
BENCHMARK(BM_ValueIteration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Effectiveness(benchmark::State& st) {
  const auto cfg = preset("mtd");
  const auto crlb = library_crlb(cfg);
  const CovarianceSampler sampler = [](Rng& rng) {
    Eigen::Matrix2d l;
    l << 10 * (1 + uniform01(rng)), 0, uniform01(rng) - 0.5, 1 + uniform01(rng);
    return Eigen::Matrix2d(l * l.transpose());
  };
  for (auto _ : st) benchmark::DoNotOptimize(library_effectiveness(crlb, sampler, 20000, 1, exec_of(st)));
}
BENCHMARK(BM_Effectiveness)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Experiment(benchmark::State& st) {
  auto cfg = preset("adversarial");
  cfg.tracks = 10;
  for (auto _ : st) benchmark::DoNotOptimize(run_experiment(cfg, exec_of(st)));
}
BENCHMARK(BM_Experiment)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
