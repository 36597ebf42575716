#pragma once

// Counter-based random streams for reproducible parallel simulation.
//
// Stream splitting is a pure function of (master seed, control index,
// path index, lane):
//
//   key = chain(chain(chain(master, control), path), lane)
//
// with chain(a, b) = mix64(a + GAMMA * (b + 1)).  Lane 0 drives the
// Brownian increments, lane 1 the control's own randomness.  Draw k of a
// stream is mix64(key + GAMMA * (k + 1)), so any draw can be produced
// without generating its predecessors and results do not depend on how
// paths are split across threads.

#include <cmath>
#include <cstdint>

namespace gx {

inline constexpr std::uint64_t kRngGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t chain_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a + kRngGamma * (b + 1));
}

inline std::uint64_t stream_key(std::uint64_t master, std::uint64_t control,
                                std::uint64_t path, std::uint64_t lane) {
  return chain_seed(chain_seed(chain_seed(master, control), path), lane);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + kRngGamma * (++counter_)); }

  // Uniform on (0, 1]; never 0, so log() below is safe.
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gx
