#pragma once

#include <cstdint>
#include <random>

namespace pmspde {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream keyed by (seed, stream, counter). Draw k of a sample
// set always sees the same numbers whatever thread produces it.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
      : engine_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

namespace streams {
inline constexpr std::uint64_t latent = 1;
inline constexpr std::uint64_t hyper_pick = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t station_effect = 4;
inline constexpr std::uint64_t split = 5;
inline constexpr std::uint64_t simulation = 6;
inline constexpr std::uint64_t synthetic_grid = 7;
}  // namespace streams

}  // namespace pmspde
