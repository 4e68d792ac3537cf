#pragma once

#include <Eigen/Dense>

#include <mutex>
#include <optional>
#include <vector>

#include "trslab/edm.hpp"
#include "trslab/tensor.hpp"

namespace trslab {

enum class FrameRole { kNone, kStart, kEnd };

const char* to_string(FrameRole role);

/// A single encoded keyframe. Toy worlds use the frame latent itself as the
/// condition embedding.
struct FrameCondition {
  Frame latent;
  FrameRole role = FrameRole::kNone;

  static FrameCondition none(const FrameShape& shape) { return {Frame::Zero(shape.size()), FrameRole::kNone}; }
};

/// D(x; sigma, c) -> (uncond, cond) estimates. Implementations must be
/// deterministic in their arguments and safe to call concurrently.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  /// A role of kNone returns the unconditional estimate in both slots.
  virtual DenoisedPair denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const = 0;
};

// ---------------------------------------------------------------------------
// Gaussian world: every frame is an independent draw from N(mu, sigma_d^2 I).

struct GaussianWorldSpec {
  FrameShape shape;
  Frame mu;
  double sigma_d = 1.0;
};

/// Closed-form posterior mean. The conditional branch pins the prior mean of
/// frame 1 to the condition latent.
DenoisedPair gaussian_denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond,
                              const GaussianWorldSpec& world);

class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(GaussianWorldSpec world);
  DenoisedPair denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const override;
  const GaussianWorldSpec& world() const { return world_; }

 private:
  GaussianWorldSpec world_;
};

// ---------------------------------------------------------------------------
// Shift world: a unit-height Gaussian blob translating at constant velocity.
// Positions are (x, y) = (column, row) in pixels.

struct MotionWorldSpec {
  Index height = 32;
  Index width = 32;
  double blob_sigma = 2.0;
  Index frames = 25;
  Eigen::Vector2d bias_velocity{1.0, 0.0};
  double bias_strength = 0.0;
  /// Integer velocity candidates satisfy |v| <= max_speed.
  double max_speed = 4.0;

  FrameShape shape() const { return {1, height, width}; }
  void validate() const;
};

Frame render_blob(const Eigen::Vector2d& position, const MotionWorldSpec& world);
VideoLatent render_trajectory(const Eigen::Vector2d& first, const Eigen::Vector2d& velocity,
                              const MotionWorldSpec& world);

/// Intensity-weighted centroid of a condition frame.
Eigen::Vector2d decode_blob_position(const FrameCondition& z, const MotionWorldSpec& world);

struct MotionFit {
  Eigen::Vector2d first;
  Eigen::Vector2d velocity;
  double objective = 0.0;
  /// Mean squared residual between x_t and the rendered fit.
  double residual_mse = 0.0;
};

/// Minimizes sum_i |x^(i) - render(p1 + (i-1) v)|^2 + beta sigma^2 |v - bias|^2.
/// Integer grid search, then two Gauss-Newton refinements. `pinned_first`
/// fixes p1.
MotionFit fit_motion(const VideoLatent& x_t, double sigma, const MotionWorldSpec& world,
                     const std::optional<Eigen::Vector2d>& pinned_first);

DenoisedPair shiftworld_denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond,
                                const MotionWorldSpec& world);

class ShiftWorldDenoiser final : public Denoiser {
 public:
  explicit ShiftWorldDenoiser(MotionWorldSpec world);
  DenoisedPair denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const override;
  const MotionWorldSpec& world() const { return world_; }

 private:
  MotionWorldSpec world_;
};

// ---------------------------------------------------------------------------

/// Records every call made through it. One instance per sampler run.
class AuditingDenoiser final : public Denoiser {
 public:
  struct Call {
    double sigma;
    FrameRole role;
  };

  explicit AuditingDenoiser(const Denoiser& inner) : inner_(inner) {}
  DenoisedPair denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const override;

  std::vector<Call> calls() const;
  std::size_t count(FrameRole role) const;
  void clear();

 private:
  const Denoiser& inner_;
  mutable std::mutex mutex_;
  mutable std::vector<Call> calls_;
};

}  // namespace trslab
