#pragma once

// Motion Prior Distillation. The backward path's denoised estimate is not
// produced by an end-conditioned denoiser call; it is rebuilt from the
// forward path's frame-to-frame noise residuals, anchored at z_end, then
// fused with the forward estimate.

#include <vector>

#include "trslab/samplers.hpp"

namespace trslab {

/// (dx_t - dx0) / sigma, delta by delta.
ResidualStack forward_noise_residual(const ResidualStack& dx_t, const ResidualStack& dx0, double sigma);

/// Same deltas, last one first.
ResidualStack reverse_order(const ResidualStack& deltas);

/// First frame of the backward noise: (x'_t^(1) - z_end) / sigma.
Frame init_backward_eps(const Frame& x_flipped_frame1, const Frame& z_end, double sigma);

/// Frame 1 is eps1; frame i subtracts the first i-1 forward noise residuals.
VideoLatent reconstruct_backward_eps(const Frame& eps1, const ResidualStack& delta_eps_fwd);

/// x'_t - sigma * eps_bwd, in flipped time. Frame 1 equals z_end when eps_bwd
/// was initialized from the same x'_t.
VideoLatent reconstruct_backward_estimate(const VideoLatent& x_flipped, const VideoLatent& eps_bwd, double sigma);

/// (1 - lambda) * x0_fwd + lambda * x0_bwd_flippedback.
VideoLatent fuse_estimates(const VideoLatent& x0_fwd, const VideoLatent& x0_bwd_flippedback, double lambda);

/// Steps {T, ..., ceil((1 - gamma) T)} that run distillation; empty for gamma = 0.
struct MpdPhasePlan {
  std::vector<int> distill_steps;
  SamplerMode tail_mode = SamplerMode::kSequential;

  static MpdPhasePlan make(int steps, double gamma, SamplerMode tail);
  bool distills(int t) const;
};

/// Number of distillation steps for T steps at ratio gamma.
int distillation_step_count(int steps, double gamma);

/// Everything one distillation iteration derives from a single conditioned
/// denoiser call.
struct MpdEstimates {
  VideoLatent forward;         // CFG'd start-conditioned estimate
  VideoLatent uncond;          // drift anchor
  VideoLatent reconstruction;  // backward estimate, flipped back to forward time
  VideoLatent fused;
};

MpdEstimates distill_estimates(const VideoLatent& x_t, const DenoisedPair& pair, double sigma, const Frame& z_end,
                               const GuidanceSpec& guidance, double lambda,
                               ResidualOrder order = ResidualOrder::kReversed);

StepOutcome mpd_step_traced(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                            const FrameCondition& c_start, const Frame& z_end, const SamplerConfig& config,
                            RngStream& rng, bool keep_estimates = false);

/// k inner iterations at level sigma_t. Iterations 1..k-1 end with a
/// re-noise back to sigma_t; iteration k descends to sigma_{t-1}.
VideoLatent mpd_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                     const FrameCondition& c_start, const Frame& z_end, const SamplerConfig& config, RngStream& rng);

/// Distillation for the early steps, then the baseline sampler for the rest.
SampleResult mpd_sample(const Denoiser& denoiser, const InbetweenProblem& problem, const SamplerConfig& config,
                        const SnapshotPolicy& snapshots = {});

}  // namespace trslab
