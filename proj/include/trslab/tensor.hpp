#pragma once

// Frame-stacked latent containers and the frame-wise primitives every sampler
// is built from. Storage is frame-major: one row per frame, C*H*W columns.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "trslab/error.hpp"

namespace trslab {

using Index = Eigen::Index;

struct FrameShape {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const { return channels * height * width; }
  friend bool operator==(const FrameShape&, const FrameShape&) = default;
};

inline std::string to_string(const FrameShape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

template <typename Scalar>
using FrameMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using FrameVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace detail

/// Ordered stack of N >= 2 latent frames sharing one shape.
template <typename Scalar>
class VideoLatentT {
 public:
  using Matrix = FrameMatrix<Scalar>;
  using Frame = FrameVector<Scalar>;

  VideoLatentT(FrameShape shape, Matrix frames) : shape_(shape), frames_(std::move(frames)) {
    require(frames_.rows() >= 2, "video latent needs at least 2 frames");
    require(frames_.cols() == shape_.size(), "frame storage does not match shape " + to_string(shape_));
    require(detail::all_finite(frames_), "video latent contains non-finite values");
  }

  static VideoLatentT zeros(Index frames, FrameShape shape) {
    return VideoLatentT(shape, Matrix::Zero(frames, shape.size()));
  }

  static VideoLatentT constant(Index frames, FrameShape shape, Scalar value) {
    return VideoLatentT(shape, Matrix::Constant(frames, shape.size(), value));
  }

  /// Repeats one frame N times.
  static VideoLatentT broadcast(const Frame& frame, Index frames, FrameShape shape) {
    require(frame.size() == shape.size(), "broadcast frame does not match shape");
    return VideoLatentT(shape, frame.replicate(frames, 1));
  }

  Index frame_count() const { return frames_.rows(); }
  const FrameShape& shape() const { return shape_; }
  Index frame_size() const { return frames_.cols(); }
  const Matrix& frames() const { return frames_; }
  auto frame(Index i) const { return frames_.row(i); }

  bool same_layout(const VideoLatentT& other) const {
    return shape_ == other.shape_ && frame_count() == other.frame_count();
  }

  template <typename Other>
  VideoLatentT<Other> cast() const {
    return VideoLatentT<Other>(shape_, frames_.template cast<Other>());
  }

  friend bool operator==(const VideoLatentT& a, const VideoLatentT& b) {
    return a.same_layout(b) && a.frames_ == b.frames_;
  }

 private:
  FrameShape shape_;
  Matrix frames_;
};

/// Frame-to-frame differences; row i holds frame i+1 minus frame i.
template <typename Scalar>
class ResidualStackT {
 public:
  using Matrix = FrameMatrix<Scalar>;

  ResidualStackT(FrameShape shape, Matrix deltas) : shape_(shape), deltas_(std::move(deltas)) {
    require(deltas_.rows() >= 1, "residual stack needs at least one delta");
    require(deltas_.cols() == shape_.size(), "residual storage does not match shape");
  }

  Index size() const { return deltas_.rows(); }
  const FrameShape& shape() const { return shape_; }
  const Matrix& deltas() const { return deltas_; }
  auto delta(Index i) const { return deltas_.row(i); }

 private:
  FrameShape shape_;
  Matrix deltas_;
};

using VideoLatent = VideoLatentT<double>;
using ResidualStack = ResidualStackT<double>;
using Frame = FrameVector<double>;

template <typename Scalar>
VideoLatentT<Scalar> temporal_flip(const VideoLatentT<Scalar>& x) {
  return VideoLatentT<Scalar>(x.shape(), x.frames().colwise().reverse());
}

template <typename Scalar>
ResidualStackT<Scalar> frame_residual(const VideoLatentT<Scalar>& x) {
  const Index n = x.frame_count();
  require(n >= 2, "frame_residual needs at least 2 frames");
  return ResidualStackT<Scalar>(x.shape(), x.frames().bottomRows(n - 1) - x.frames().topRows(n - 1));
}

/// weight * a + (1 - weight) * b. Call sites state which operand carries the weight.
template <typename Scalar>
VideoLatentT<Scalar> lerp(const VideoLatentT<Scalar>& a, const VideoLatentT<Scalar>& b, Scalar weight) {
  require(a.same_layout(b), "lerp: shape mismatch");
  require(weight >= Scalar(0) && weight <= Scalar(1), "lerp: weight outside [0,1]");
  return VideoLatentT<Scalar>(a.shape(), weight * a.frames() + (Scalar(1) - weight) * b.frames());
}

/// Per-frame weights; weights[i] applies to frame i.
template <typename Scalar>
VideoLatentT<Scalar> lerp(const VideoLatentT<Scalar>& a, const VideoLatentT<Scalar>& b,
                          std::span<const Scalar> weights) {
  require(a.same_layout(b), "lerp: shape mismatch");
  require(static_cast<Index>(weights.size()) == a.frame_count(), "lerp: one weight per frame required");
  typename VideoLatentT<Scalar>::Matrix out(a.frame_count(), a.frame_size());
  for (Index i = 0; i < a.frame_count(); ++i) {
    const Scalar w = weights[static_cast<std::size_t>(i)];
    require(w >= Scalar(0) && w <= Scalar(1), "lerp: weight outside [0,1]");
    out.row(i) = w * a.frames().row(i) + (Scalar(1) - w) * b.frames().row(i);
  }
  return VideoLatentT<Scalar>(a.shape(), std::move(out));
}

/// Decreasing noise levels sigma_T, ..., sigma_1, sigma_0 = 0.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> sigmas);

  int steps() const { return static_cast<int>(sigmas_.size()) - 1; }
  /// Noise level at step t in {0, ..., T}; sigma(T) is the largest.
  double sigma(int t) const;
  const std::vector<double>& sigmas() const { return sigmas_; }

 private:
  std::vector<double> sigmas_;
};

struct ScheduleParams {
  int steps = 25;
  double sigma_min = 0.002;
  double sigma_max = 700.0;
  double rho = 7.0;
};

/// Karras rho-spaced grid from sigma_max down to sigma_min, with a trailing 0.
NoiseSchedule build_schedule(int steps, double sigma_min, double sigma_max, double rho);

inline NoiseSchedule build_schedule(const ScheduleParams& p) {
  return build_schedule(p.steps, p.sigma_min, p.sigma_max, p.rho);
}

}  // namespace trslab
