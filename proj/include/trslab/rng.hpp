#pragma once

#include <cstdint>

#include "trslab/tensor.hpp"

namespace trslab {

/// Counter-based Gaussian stream. Draw n is a pure function of (seed, n):
/// a SplitMix64 finalizer over the counter feeds Box-Muller pairs, so two
/// streams with the same seed and position produce identical values.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  /// Independent stream for job `index` of a batch seeded with `seed`.
  static RngStream derive(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  /// N(0, 1) draws in row-major order.
  FrameMatrix<double> normal_matrix(Index rows, Index cols);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace trslab
