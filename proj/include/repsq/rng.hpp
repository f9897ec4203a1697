#pragma once

// Deterministic random streams.
//
// Generator: xoshiro256** (Blackman & Vigna), state seeded from four
// consecutive splitmix64 outputs. Algorithm tag: "xoshiro256ss-splitmix64/v1".
//
// Sub-streams are derived from a root seed and a path of integers:
//
//   h = mix64(seed ^ 0x9e3779b97f4a7c15)
//   for each id in path:  h = mix64(h ^ mix64(id + 0x632be59bd9b4e019))
//
// where mix64 is the splitmix64 finalizer. The stream state is then seeded
// from splitmix64 starting at h. Every variate below is produced by an
// explicitly specified transform, never by <random> distributions, so a given
// (seed, path) yields the same sequence on every conforming platform.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace repsq {

inline constexpr std::string_view kRngAlgorithm = "xoshiro256ss-splitmix64/v1";

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Well-known stream ids used inside a single trial.
enum class StreamRole : std::uint64_t {
  kSampler = 0,
  kNoise = 1,
  kOffset = 2,
};

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static Rng derive(std::uint64_t seed, std::span<const std::uint64_t> path) noexcept;
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    return derive(seed, std::span<const std::uint64_t>(path.begin(), path.size()));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~std::uint64_t{0}; }
  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept;

  // [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // (0, 1), safe for logarithms.
  double uniform_open() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Standard normal via the Marsaglia polar method (one cached spare).
  double normal() noexcept;
  // Gamma(shape, 1). Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
  double gamma(double shape) noexcept;
  // log of a Gamma(shape, 1) draw; stays finite for tiny shapes.
  double log_gamma_variate(double shape) noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace repsq
