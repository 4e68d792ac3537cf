#include "trslab/samplers.hpp"

#include "trslab/diagnostics.hpp"
#include "trslab/mpd.hpp"

namespace trslab {

std::string to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::kForwardOnly: return "forward-only";
    case SamplerMode::kParallel: return "parallel";
    case SamplerMode::kSequential: return "sequential";
    case SamplerMode::kMpdParallel: return "mpd+parallel";
    case SamplerMode::kMpdSequential: return "mpd+sequential";
  }
  return "forward-only";
}

SamplerMode parse_sampler_mode(const std::string& text) {
  for (SamplerMode m : {SamplerMode::kForwardOnly, SamplerMode::kParallel, SamplerMode::kSequential,
                        SamplerMode::kMpdParallel, SamplerMode::kMpdSequential})
    if (to_string(m) == text) return m;
  throw Error(ErrorCode::kUsage, "unknown sampler mode '" + text + "'");
}

std::string to_string(ResidualOrder order) { return order == ResidualOrder::kForward ? "forward" : "reversed"; }

ResidualOrder parse_residual_order(const std::string& text) {
  if (text == "reversed") return ResidualOrder::kReversed;
  if (text == "forward") return ResidualOrder::kForward;
  throw Error(ErrorCode::kUsage, "unknown residual order '" + text + "'");
}

bool is_mpd(SamplerMode mode) { return mode == SamplerMode::kMpdParallel || mode == SamplerMode::kMpdSequential; }

SamplerMode tail_mode(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::kMpdParallel: return SamplerMode::kParallel;
    case SamplerMode::kMpdSequential: return SamplerMode::kSequential;
    default: return mode;
  }
}

SamplerConfig SamplerConfig::defaults(SamplerMode mode) {
  SamplerConfig c;
  c.mode = mode;
  if (tail_mode(mode) == SamplerMode::kParallel) {
    c.gamma = 0.3;
    c.k = 2;
    c.lambda = 0.5;
  } else if (tail_mode(mode) == SamplerMode::kSequential) {
    c.gamma = 0.2;
    c.k = 3;
    c.lambda = 1.0;
  }
  return c;
}

GuidanceSpec SamplerConfig::guidance_for(Index frames) const {
  return guidance ? *guidance : default_guidance(frames);
}

FrameWeights SamplerConfig::alpha_for(Index frames) const {
  return alpha_ramp ? FrameWeights::ramp(1.0, 0.0, frames) : alpha;
}

void SamplerConfig::validate(Index frames) const {
  require(schedule.steps >= 1, "sampler needs T >= 1");
  require(k >= 1, "sampler needs k >= 1");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0,1]");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0,1]");
  for (double a : alpha_for(frames).expand(frames)) require(a >= 0.0 && a <= 1.0, "alpha must lie in [0,1]");
  for (double w : guidance_for(frames).expand(frames)) require(w >= 0.0, "guidance must be non-negative");
}

namespace {

int end_calls(const FrameCondition& c) { return c.role == FrameRole::kEnd ? 1 : 0; }

}  // namespace

VideoLatent draw_initial_latent(const InbetweenProblem& problem, const NoiseSchedule& schedule, RngStream& rng) {
  const double sigma_max = schedule.sigma(schedule.steps());
  return VideoLatent(problem.shape, sigma_max * rng.normal_matrix(problem.frames, problem.shape.size()));
}

StepOutcome forward_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                         const FrameCondition& c_start, const SamplerConfig& config, bool keep_estimates) {
  const double sigma = schedule.sigma(t);
  const double sigma_prev = schedule.sigma(t - 1);
  const GuidanceSpec w = config.guidance_for(x_t.frame_count());

  const VideoLatent x0 = apply_cfg(denoiser.denoise(x_t, sigma, c_start), w);
  TraceRecord rec;
  rec.step = t;
  rec.sigma = sigma;
  rec.phase = "forward";
  rec.denoiser_calls = 1;
  rec.end_conditioned_calls = end_calls(c_start);
  if (keep_estimates) rec.forward_estimate = x0;
  return {euler_step(x_t, x0, sigma, sigma_prev), std::move(rec)};
}

StepOutcome trf_step_traced(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                            const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config,
                            bool keep_estimates) {
  const double sigma = schedule.sigma(t);
  const double sigma_prev = schedule.sigma(t - 1);
  const Index n = x_t.frame_count();
  const GuidanceSpec w = config.guidance_for(n);

  const VideoLatent x0_fwd = apply_cfg(denoiser.denoise(x_t, sigma, c_start), w);
  const VideoLatent fwd = euler_step(x_t, x0_fwd, sigma, sigma_prev);

  const VideoLatent x_flip = temporal_flip(x_t);
  const VideoLatent x0_bwd_flip = apply_cfg(denoiser.denoise(x_flip, sigma, c_end), w);
  const VideoLatent bwd = temporal_flip(euler_step(x_flip, x0_bwd_flip, sigma, sigma_prev));

  // alpha weights the forward branch
  const FrameWeights alpha = config.alpha_for(n);
  VideoLatent next = alpha.is_scalar() ? lerp(fwd, bwd, alpha.scalar())
                                       : lerp<double>(fwd, bwd, std::span<const double>(alpha.values()));

  const VideoLatent x0_bwd = temporal_flip(x0_bwd_flip);
  TraceRecord rec;
  rec.step = t;
  rec.sigma = sigma;
  rec.phase = "parallel";
  rec.discrepancy_loss = path_discrepancy_loss(x0_fwd, x0_bwd, sigma);
  rec.denoiser_calls = 2;
  rec.end_conditioned_calls = end_calls(c_start) + end_calls(c_end);
  if (keep_estimates) {
    rec.forward_estimate = x0_fwd;
    rec.backward_estimate = x0_bwd;
  }
  return {std::move(next), std::move(rec)};
}

StepOutcome vibid_step_traced(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                              const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config,
                              RngStream& rng, bool keep_estimates) {
  const double sigma = schedule.sigma(t);
  const double sigma_prev = schedule.sigma(t - 1);
  const GuidanceSpec w = config.guidance_for(x_t.frame_count());

  const VideoLatent x0_fwd = apply_cfg(denoiser.denoise(x_t, sigma, c_start), w);
  const VideoLatent fwd = euler_step(x_t, x0_fwd, sigma, sigma_prev);
  const VideoLatent renoised = config.renoise ? renoise(fwd, sigma, sigma_prev, rng) : fwd;

  const VideoLatent x_flip = temporal_flip(renoised);
  const VideoLatent x0_bwd_flip = apply_cfg(denoiser.denoise(x_flip, sigma, c_end), w);
  VideoLatent next = temporal_flip(euler_step(x_flip, x0_bwd_flip, sigma, sigma_prev));

  const VideoLatent x0_bwd = temporal_flip(x0_bwd_flip);
  TraceRecord rec;
  rec.step = t;
  rec.sigma = sigma;
  rec.phase = "sequential";
  rec.discrepancy_loss = path_discrepancy_loss(x0_fwd, x0_bwd, sigma);
  rec.denoiser_calls = 2;
  rec.end_conditioned_calls = end_calls(c_start) + end_calls(c_end);
  if (keep_estimates) {
    rec.forward_estimate = x0_fwd;
    rec.backward_estimate = x0_bwd;
  }
  return {std::move(next), std::move(rec)};
}

VideoLatent trf_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                     const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config) {
  return trf_step_traced(x_t, denoiser, schedule, t, c_start, c_end, config).next;
}

VideoLatent vibid_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                       const FrameCondition& c_start, const FrameCondition& c_end, const SamplerConfig& config,
                       RngStream& rng) {
  return vibid_step_traced(x_t, denoiser, schedule, t, c_start, c_end, config, rng).next;
}

VideoLatent forward_sample(const Denoiser& denoiser, const NoiseSchedule& schedule, const InbetweenProblem& problem,
                           const SamplerConfig& config, RngStream& rng) {
  require(schedule.steps() == config.schedule.steps, "schedule length does not match config T");
  VideoLatent x = draw_initial_latent(problem, schedule, rng);
  for (int t = schedule.steps(); t >= 1; --t) x = forward_step(x, denoiser, schedule, t, problem.start, config).next;
  return x;
}

StepOutcome baseline_step(SamplerMode mode, const VideoLatent& x_t, const Denoiser& denoiser,
                          const NoiseSchedule& schedule, int t, const InbetweenProblem& problem,
                          const SamplerConfig& config, RngStream& rng, bool keep_estimates) {
  switch (mode) {
    case SamplerMode::kForwardOnly:
      return forward_step(x_t, denoiser, schedule, t, problem.start, config, keep_estimates);
    case SamplerMode::kParallel:
      return trf_step_traced(x_t, denoiser, schedule, t, problem.start, problem.end, config, keep_estimates);
    case SamplerMode::kSequential:
      return vibid_step_traced(x_t, denoiser, schedule, t, problem.start, problem.end, config, rng, keep_estimates);
    default:
      throw Error(ErrorCode::kInvalidInput, "baseline_step: not a baseline mode");
  }
}

SampleResult run_sampler(const Denoiser& denoiser, const InbetweenProblem& problem, const SamplerConfig& config,
                         const SnapshotPolicy& snapshots) {
  config.validate(problem.frames);
  if (is_mpd(config.mode)) return mpd_sample(denoiser, problem, config, snapshots);

  const NoiseSchedule schedule = build_schedule(config.schedule);
  RngStream rng(config.seed);
  VideoLatent x = draw_initial_latent(problem, schedule, rng);
  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(schedule.steps()));
  for (int t = schedule.steps(); t >= 1; --t) {
    StepOutcome out = baseline_step(config.mode, x, denoiser, schedule, t, problem, config, rng, snapshots.records(t));
    x = std::move(out.next);
    trace.push_back(std::move(out.record));
  }
  return {std::move(x), std::move(trace)};
}

}  // namespace trslab
