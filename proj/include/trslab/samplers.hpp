#pragma once

// Baseline samplers: forward-only I2V, parallel time reversal fusion and
// sequential forward/backward alternation with re-noising.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trslab/denoiser.hpp"
#include "trslab/edm.hpp"
#include "trslab/rng.hpp"
#include "trslab/trace.hpp"

namespace trslab {

enum class SamplerMode { kForwardOnly, kParallel, kSequential, kMpdParallel, kMpdSequential };

/// Order in which distillation consumes the forward noise residuals when
/// rebuilding the backward noise in flipped time. kReversed walks them from
/// the last frame back, so the flipped-back reconstruction inherits the
/// forward estimate's residuals and none of x_t's noise. kForward walks them
/// in frame order; its reconstruction carries mirrored-frame noise of about
/// 2 sigma.
enum class ResidualOrder { kReversed, kForward };

std::string to_string(ResidualOrder order);
ResidualOrder parse_residual_order(const std::string& text);

std::string to_string(SamplerMode mode);
SamplerMode parse_sampler_mode(const std::string& text);
bool is_mpd(SamplerMode mode);
/// Baseline sampler used outside the distillation phase.
SamplerMode tail_mode(SamplerMode mode);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::kForwardOnly;
  ScheduleParams schedule;
  /// Unset means the default per-frame ramp 1.0 -> 3.0.
  std::optional<GuidanceSpec> guidance;
  /// Parallel fusion weight on the forward branch.
  FrameWeights alpha{0.5};
  /// When set, alpha_i = (N - i) / (N - 1) and `alpha` is ignored.
  bool alpha_ramp = false;
  double lambda = 1.0;
  int k = 1;
  double gamma = 0.0;
  ResidualOrder residual_order = ResidualOrder::kReversed;
  std::uint64_t seed = 0;
  /// Diagnostic switch: skip the re-noising draw in sequential and MPD steps.
  bool renoise = true;

  /// Tuned MPD knobs per baseline: parallel (gamma 0.3, k 2, lambda 0.5),
  /// sequential (gamma 0.2, k 3, lambda 1.0).
  static SamplerConfig defaults(SamplerMode mode);

  GuidanceSpec guidance_for(Index frames) const;
  FrameWeights alpha_for(Index frames) const;
  void validate(Index frames) const;
};

/// Start and end keyframes. The end condition's latent doubles as z_end.
struct InbetweenProblem {
  FrameShape shape;
  Index frames = 2;
  FrameCondition start;
  FrameCondition end;
};

struct SampleResult {
  VideoLatent video;
  std::vector<TraceRecord> trace;
};

/// One step's output plus its trace record.
struct StepOutcome {
  VideoLatent next;
  TraceRecord record;
};

/// x_T ~ N(0, sigma_T^2 I), drawn first from the run's stream.
VideoLatent draw_initial_latent(const InbetweenProblem& problem, const NoiseSchedule& schedule, RngStream& rng);

/// Conditioned denoise, CFG, Euler step from sigma_t to sigma_{t-1}.
StepOutcome forward_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                         const FrameCondition& c_start, const SamplerConfig& config, bool keep_estimates = false);

StepOutcome trf_step_traced(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                            const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config,
                            bool keep_estimates = false);

StepOutcome vibid_step_traced(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                              const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config,
                              RngStream& rng, bool keep_estimates = false);

/// Parallel fusion: alpha * forward update + (1 - alpha) * flip(backward update on flip(x_t)).
VideoLatent trf_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                     const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config);

/// Sequential: forward update, re-noise back to sigma_t, flipped backward update, flip back.
VideoLatent vibid_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                       const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config,
                       RngStream& rng);

/// One step of a baseline mode (forward-only, parallel or sequential).
StepOutcome baseline_step(SamplerMode mode, const VideoLatent& x_t, const Denoiser& denoiser,
                          const NoiseSchedule& schedule, int t, const InbetweenProblem& problem,
                          const SamplerConfig& config, RngStream& rng, bool keep_estimates = false);

VideoLatent forward_sample(const Denoiser& denoiser, const NoiseSchedule& schedule, const InbetweenProblem& problem,
                           const SamplerConfig& config, RngStream& rng);

/// Runs config.mode end to end with RngStream(config.seed).
SampleResult run_sampler(const Denoiser& denoiser, const InbetweenProblem& problem, const SamplerConfig& config,
                         const SnapshotPolicy& snapshots = {});

}  // namespace trslab
