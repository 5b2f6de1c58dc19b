#include "deeptrader/rng.hpp"

#include <cmath>

namespace deeptrader {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t root, std::uint64_t key) {
  std::uint64_t s = root ^ (0xA24BAED4963EE407ULL + key * 0x9FB21C651E98DF25ULL);
  return splitmix64(s);
}

std::uint64_t mix_seed(std::uint64_t root, std::string_view name) {
  // FNV-1a over the stream name
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return mix_seed(root, h);
}

std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run_index) {
  return mix_seed(master_seed, run_index + 1);
}

double RngStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

std::size_t RngStream::index(std::size_t n) {
  // modulo rejection keeps the draw exactly uniform
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

}  // namespace deeptrader
