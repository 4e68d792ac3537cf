#pragma once

#include <vector>

#include "trslab/rng.hpp"
#include "trslab/tensor.hpp"

namespace trslab {

/// Denoiser output: unconditional and conditional clean estimates.
struct DenoisedPair {
  VideoLatent uncond;
  VideoLatent cond;

  DenoisedPair(VideoLatent u, VideoLatent c) : uncond(std::move(u)), cond(std::move(c)) {
    require(uncond.same_layout(cond), "denoised pair: shape mismatch");
  }
};

/// A scalar or one value per frame. Used for CFG strength and the parallel
/// fusion weight.
class FrameWeights {
 public:
  FrameWeights(double scalar = 0.0) : values_{scalar} {}  // NOLINT: implicit from scalar
  explicit FrameWeights(std::vector<double> per_frame);

  /// Linear ramp from `first` at frame 1 to `last` at frame N.
  static FrameWeights ramp(double first, double last, Index frames);

  bool is_scalar() const { return values_.size() == 1; }
  double scalar() const { return values_.front(); }
  const std::vector<double>& values() const { return values_; }

  /// Weight for 0-based frame i of an N-frame video.
  double at(Index i, Index frames) const;
  std::vector<double> expand(Index frames) const;

 private:
  std::vector<double> values_;
};

using GuidanceSpec = FrameWeights;

/// Default guidance: per-frame ramp 1.0 -> 3.0 across the clip.
inline GuidanceSpec default_guidance(Index frames) { return FrameWeights::ramp(1.0, 3.0, frames); }

struct EpsAndScore {
  VideoLatent eps;
  VideoLatent score;
};

/// eps = (x_t - x0)/sigma, score = (x0 - x_t)/sigma^2.
EpsAndScore eps_and_score(const VideoLatent& x_t, const VideoLatent& x0_hat, double sigma);

/// (1 + w) * cond - w * uncond, frame-wise when w is per-frame.
VideoLatent apply_cfg(const DenoisedPair& pair, const GuidanceSpec& w);

/// x0 + (sigma_prev / sigma_t) * (x_t - x0).
VideoLatent euler_step(const VideoLatent& x_t, const VideoLatent& x0_hat, double sigma_t, double sigma_prev);

/// Euler step whose drift is anchored on the unconditional estimate:
/// x0_fused + (sigma_prev / sigma_t) * (x_t - x0_uncond).
VideoLatent euler_step_uncond_anchor(const VideoLatent& x_t, const VideoLatent& x0_fused,
                                     const VideoLatent& x0_uncond, double sigma_t, double sigma_prev);

/// Adds sqrt(sigma_t^2 - sigma_prev^2) of fresh Gaussian noise. Draws one
/// normal per element in frame-major order, even when the scale is zero.
VideoLatent renoise(const VideoLatent& x_prev, double sigma_t, double sigma_prev, RngStream& rng);

}  // namespace trslab
