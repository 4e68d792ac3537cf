#pragma once

#include <cmath>

#include "trslab/rng.hpp"
#include "trslab/tensor.hpp"

namespace trslab::test {

inline VideoLatent random_video(RngStream& rng, Index frames, FrameShape shape, double scale = 1.0) {
  return VideoLatent(shape, scale * rng.normal_matrix(frames, shape.size()));
}

inline Frame random_frame(RngStream& rng, Index size, double scale = 1.0) {
  return scale * rng.normal_matrix(1, size).row(0);
}

inline FrameShape random_shape(RngStream& rng) {
  auto dim = [&] { return static_cast<Index>(1 + rng.next_u64() % 4); };
  return {dim(), dim(), dim()};
}

inline Index random_int(RngStream& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

/// Scalar-frame video from a list of values.
inline VideoLatent scalar_video(std::initializer_list<double> values) {
  FrameMatrix<double> m(static_cast<Index>(values.size()), 1);
  Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return VideoLatent({1, 1, 1}, m);
}

inline double max_abs(const FrameMatrix<double>& a, const FrameMatrix<double>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace trslab::test
