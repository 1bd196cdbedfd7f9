#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wavesel {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed derived from a base seed and a path of stream identifiers. Two callers asking
// for the same path get the same stream, which is how arms share scene randomness.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (auto p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(base, path));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

// Inverse-CDF draw from a discrete distribution given a uniform in [0,1).
template <class Probs>
int sample_index(const Probs& p, double u) {
  double acc = 0.0;
  int last = 0;
  int i = 0;
  for (double v : p) {
    if (v > 0.0) last = i;
    acc += v;
    if (u < acc) return i;
    ++i;
  }
  return last;
}

}  // namespace wavesel
