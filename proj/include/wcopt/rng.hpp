#pragma once

// Counter-based random numbers keyed by (seed, stream, counter).
//
// Every draw is a pure function of its key, so two streams of the same seed
// never share a draw and results do not depend on the platform's
// <random> distributions.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace wcopt {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream identifiers used across the library.
enum class Stream : std::uint64_t {
  update_sample = 1,     // xi^k
  reference_sample = 2,  // xi' for the reference-Lipschitz policy
  initial_point = 3,
  problem_matrix = 10,
  problem_scaling = 11,
  problem_signal = 12,
  problem_corruption = 13,
  problem_noise = 14,
  monte_carlo = 20,
};

inline constexpr std::uint64_t draw(std::uint64_t seed, Stream stream, std::uint64_t counter) {
  const std::uint64_t key = mix64(seed ^ mix64(static_cast<std::uint64_t>(stream) * 0xd6e8feb86659fd93ULL));
  return mix64(key + counter * 0x9e3779b97f4a7c15ULL);
}

/// Uniform index in [0, n) for the given key (multiply-shift reduction).
inline std::uint64_t draw_index(std::uint64_t seed, Stream stream, std::uint64_t counter, std::uint64_t n) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(draw(seed, stream, counter)) * n;
  return static_cast<std::uint64_t>(prod >> 64);
}

/// Sequential cursor over one stream.
class StreamCursor {
 public:
  StreamCursor(std::uint64_t seed, Stream stream, std::uint64_t start = 0)
      : seed_(seed), stream_(stream), counter_(start) {}

  std::uint64_t next_u64() { return draw(seed_, stream_, counter_++); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t index(std::uint64_t n) {
    const unsigned __int128 prod = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(prod >> 64);
  }

  /// Standard normal by Box-Muller (both variates used).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace wcopt
