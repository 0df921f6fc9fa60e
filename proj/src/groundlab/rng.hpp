#pragma once

#include <cstdint>
#include <string_view>

namespace groundlab {

// Deterministic counter-based random stream. Streams are identified by a
// (seed, tag) pair: the same pair reproduces bit-identical draws, distinct
// tags or seeds give independent sequences. Forking derives a child stream
// from the parent's identity (not its position), so per-record streams are
// the same whether records are generated serially or in parallel.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view tag);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double next_double();
  // Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);
  // Standard normal via the polar method (pairs cached).
  double next_normal();

  RandomStream fork(std::string_view tag) const;
  RandomStream fork(std::uint64_t index) const;

 private:
  explicit RandomStream(std::uint64_t raw_identity);

  std::uint64_t identity_;  // fixed at construction, forks derive from it
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace groundlab
