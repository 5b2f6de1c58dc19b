#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deeptrader {

// Deterministic seed derivation. Streams are named so that subsystems
// (init, dropout, exploration, replay, data) draw from isolated sequences
// and reseeding one never shifts another.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix_seed(std::uint64_t root, std::uint64_t key);
std::uint64_t mix_seed(std::uint64_t root, std::string_view name);

// Per-run seed fan-out: run_seed(master, i) depends only on (master, i),
// so adding runs to an experiment never reshuffles earlier runs.
std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run_index);

// mt19937_64 core (bit-exact per the standard) with hand-rolled uniform and
// Box-Muller transforms; std::*_distribution is implementation-defined and
// would silently break reproducibility contracts across toolchains.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}
  RngStream(std::uint64_t root, std::string_view name) : eng_(mix_seed(root, name)) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform on [0,1) with 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; consumes exactly two uniforms per draw
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // uniform integer in [0, n), rejection sampled
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 eng_;
};

}  // namespace deeptrader
