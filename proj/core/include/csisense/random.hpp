#pragma once

#include <cstdint>

namespace csisense {

/// Counter-based deterministic RNG (splitmix64 core).
///
/// Unlike the standard distributions, every draw is specified bit-for-bit,
/// so seeded runs reproduce exactly across compilers and platforms.
/// Substreams forked from a master seed are independent, which lets
/// per-sample generation run in any order and still match the serial result.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (pairs cached).
  double gaussian();
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  /// Independent substream identified by `stream`; forking does not
  /// consume state from this stream.
  RandomStream fork(std::uint64_t stream) const;

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace csisense
