#pragma once

#include <cstddef>
#include <cstdint>

namespace acl {

// Counter-based SplitMix64 stream. The full state is (seed, counter), so a
// stream can be serialized and resumed exactly, and draws are identical on
// every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller (consumes two draws per call).
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace acl
