#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace evmesh {

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so per-pixel noise is reproducible regardless of
/// evaluation order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter, std::uint64_t lane = 0) const {
    std::uint64_t h = mix(seed_ ^ 0x9E3779B97F4A7C15ull);
    h = mix(h ^ (stream * 0xD1B54A32D192ED03ull));
    h = mix(h ^ (counter * 0xAEF17502108EF2D9ull));
    return mix(h ^ (lane + 0x632BE59BD9B4E019ull));
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter, std::uint64_t lane = 0) const {
    return static_cast<double>(bits(stream, counter, lane) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two lanes.
  double normal(std::uint64_t stream, std::uint64_t counter, std::uint64_t lane = 0) const {
    const double u1 = 1.0 - uniform(stream, counter, 2 * lane);  // (0, 1]
    const double u2 = uniform(stream, counter, 2 * lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace evmesh
