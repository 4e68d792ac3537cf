#pragma once

#include <optional>
#include <string>

#include "trslab/tensor.hpp"

namespace trslab {

/// Per-step sampler diagnostics.
struct TraceRecord {
  int step = 0;
  double sigma = 0.0;
  std::string phase;
  /// sigma^-2 |forward estimate - flipped-back backward estimate|^2; 0 when
  /// the step has a single path.
  double discrepancy_loss = 0.0;
  int denoiser_calls = 0;
  int end_conditioned_calls = 0;
  std::optional<VideoLatent> forward_estimate;
  std::optional<VideoLatent> backward_estimate;  // already flipped back to forward time
};

/// Steps whose estimates are kept in the trace, inclusive on both ends.
struct SnapshotPolicy {
  bool enabled = false;
  int from_step = 0;
  int to_step = 0;

  static SnapshotPolicy all() { return {true, 1 << 30, 0}; }
  static SnapshotPolicy range(int from, int to) { return {true, std::max(from, to), std::min(from, to)}; }
  bool records(int t) const { return enabled && t <= from_step && t >= to_step; }
};

}  // namespace trslab
