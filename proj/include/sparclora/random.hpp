#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "sparclora/time.hpp"

namespace sparclora {

/// Reproducible random stream. mt19937_64 and seed_seq are fully specified by the
/// standard and the distributions below are hand-rolled, so a (seed, stream id)
/// pair yields the same draws on every conforming toolchain.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x5eed'10a5u};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform in [0, window). A non-positive window yields zero.
  Duration uniform_duration(Duration window) {
    if (window.count() <= 0) return Duration::zero();
    return Duration{static_cast<std::int64_t>(below(static_cast<std::uint64_t>(window.count())))};
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

inline RandomStream seeded_stream(std::uint64_t seed, std::uint64_t stream_id) {
  return RandomStream(seed, stream_id);
}

}  // namespace sparclora
