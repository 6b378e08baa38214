#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace windrom {

/// splitmix64 finalizer; the documented mixer behind all seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Substream seed derivation: seed_k = splitmix64(seed XOR splitmix64(k+1)).
/// Applied per realization and again per expansion term, so every (seed,
/// realization, mode, term) tuple owns an independent deterministic stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

/// Deterministic random stream: std::mt19937_64 (bit-exact by the standard)
/// with explicit uniform and Box-Muller normal transforms, so draws are
/// reproducible across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// uniform on (0, 1]
  double uniform01() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// standard normal via Box-Muller; consumes exactly two uniforms
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// uniform index in [0, n)
  std::size_t uniform_index(std::size_t n) {
    const double u = uniform01();
    auto k = static_cast<std::size_t>(u * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace windrom
