#include "trslab/edm.hpp"

#include <cmath>

namespace trslab {

FrameWeights::FrameWeights(std::vector<double> per_frame) : values_(std::move(per_frame)) {
  require(!values_.empty(), "frame weights must not be empty");
}

FrameWeights FrameWeights::ramp(double first, double last, Index frames) {
  require(frames >= 2, "weight ramp needs at least 2 frames");
  std::vector<double> v(static_cast<std::size_t>(frames));
  for (Index i = 0; i < frames; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(frames - 1);
    v[static_cast<std::size_t>(i)] = first + frac * (last - first);
  }
  v.back() = last;
  return FrameWeights(std::move(v));
}

double FrameWeights::at(Index i, Index frames) const {
  if (is_scalar()) return values_.front();
  require(static_cast<Index>(values_.size()) == frames, "per-frame weights do not match frame count");
  return values_[static_cast<std::size_t>(i)];
}

std::vector<double> FrameWeights::expand(Index frames) const {
  std::vector<double> out(static_cast<std::size_t>(frames));
  for (Index i = 0; i < frames; ++i) out[static_cast<std::size_t>(i)] = at(i, frames);
  return out;
}

EpsAndScore eps_and_score(const VideoLatent& x_t, const VideoLatent& x0_hat, double sigma) {
  require(sigma > 0.0, "eps_and_score: sigma must be positive");
  require(x_t.same_layout(x0_hat), "eps_and_score: shape mismatch");
  FrameMatrix<double> eps = (x_t.frames() - x0_hat.frames()) / sigma;
  FrameMatrix<double> score = (x0_hat.frames() - x_t.frames()) / (sigma * sigma);
  return {VideoLatent(x_t.shape(), std::move(eps)), VideoLatent(x_t.shape(), std::move(score))};
}

VideoLatent apply_cfg(const DenoisedPair& pair, const GuidanceSpec& w) {
  const Index n = pair.cond.frame_count();
  FrameMatrix<double> out(n, pair.cond.frame_size());
  for (Index i = 0; i < n; ++i) {
    const double wi = w.at(i, n);
    require(wi >= 0.0, "guidance strength must be non-negative");
    out.row(i) = (1.0 + wi) * pair.cond.frame(i) - wi * pair.uncond.frame(i);
  }
  return VideoLatent(pair.cond.shape(), std::move(out));
}

VideoLatent euler_step(const VideoLatent& x_t, const VideoLatent& x0_hat, double sigma_t, double sigma_prev) {
  require(sigma_t > sigma_prev && sigma_prev >= 0.0, "euler_step needs sigma_t > sigma_prev >= 0");
  require(x_t.same_layout(x0_hat), "euler_step: shape mismatch");
  const double ratio = sigma_prev / sigma_t;
  return VideoLatent(x_t.shape(), x0_hat.frames() + ratio * (x_t.frames() - x0_hat.frames()));
}

VideoLatent euler_step_uncond_anchor(const VideoLatent& x_t, const VideoLatent& x0_fused,
                                     const VideoLatent& x0_uncond, double sigma_t, double sigma_prev) {
  require(sigma_t > sigma_prev && sigma_prev >= 0.0, "euler_step needs sigma_t > sigma_prev >= 0");
  require(x_t.same_layout(x0_fused) && x_t.same_layout(x0_uncond), "euler_step: shape mismatch");
  const double ratio = sigma_prev / sigma_t;
  return VideoLatent(x_t.shape(), x0_fused.frames() + ratio * (x_t.frames() - x0_uncond.frames()));
}

VideoLatent renoise(const VideoLatent& x_prev, double sigma_t, double sigma_prev, RngStream& rng) {
  require(sigma_t >= sigma_prev && sigma_prev >= 0.0, "renoise needs sigma_t >= sigma_prev >= 0");
  const double scale = std::sqrt(sigma_t * sigma_t - sigma_prev * sigma_prev);
  FrameMatrix<double> eps = rng.normal_matrix(x_prev.frame_count(), x_prev.frame_size());
  if (scale == 0.0) return x_prev;
  return VideoLatent(x_prev.shape(), x_prev.frames() + scale * eps);
}

}  // namespace trslab
