#include "trslab/mpd.hpp"

#include <algorithm>
#include <cmath>

#include "trslab/diagnostics.hpp"

namespace trslab {

ResidualStack forward_noise_residual(const ResidualStack& dx_t, const ResidualStack& dx0, double sigma) {
  require(sigma > 0.0, "forward_noise_residual: sigma must be positive");
  require(dx_t.size() == dx0.size() && dx_t.shape() == dx0.shape(), "forward_noise_residual: length mismatch");
  return ResidualStack(dx_t.shape(), (dx_t.deltas() - dx0.deltas()) / sigma);
}

ResidualStack reverse_order(const ResidualStack& deltas) {
  return ResidualStack(deltas.shape(), deltas.deltas().colwise().reverse());
}

Frame init_backward_eps(const Frame& x_flipped_frame1, const Frame& z_end, double sigma) {
  require(sigma > 0.0, "init_backward_eps: sigma must be positive");
  require(x_flipped_frame1.size() == z_end.size(), "init_backward_eps: shape mismatch");
  return (x_flipped_frame1 - z_end) / sigma;
}

VideoLatent reconstruct_backward_eps(const Frame& eps1, const ResidualStack& delta_eps_fwd) {
  require(eps1.size() == delta_eps_fwd.shape().size(), "reconstruct_backward_eps: shape mismatch");
  const Index n = delta_eps_fwd.size() + 1;
  FrameMatrix<double> eps(n, eps1.size());
  eps.row(0) = eps1;
  for (Index i = 1; i < n; ++i) eps.row(i) = eps.row(i - 1) - delta_eps_fwd.delta(i - 1);
  return VideoLatent(delta_eps_fwd.shape(), std::move(eps));
}

VideoLatent reconstruct_backward_estimate(const VideoLatent& x_flipped, const VideoLatent& eps_bwd, double sigma) {
  require(x_flipped.same_layout(eps_bwd), "reconstruct_backward_estimate: shape mismatch");
  return VideoLatent(x_flipped.shape(), x_flipped.frames() - sigma * eps_bwd.frames());
}

VideoLatent fuse_estimates(const VideoLatent& x0_fwd, const VideoLatent& x0_bwd_flippedback, double lambda) {
  require(x0_fwd.same_layout(x0_bwd_flippedback), "fuse_estimates: shape mismatch");
  // lambda weights the reconstructed estimate
  return lerp(x0_bwd_flippedback, x0_fwd, lambda);
}

int distillation_step_count(int steps, double gamma) {
  require(steps >= 1, "distillation plan needs T >= 1");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0,1]");
  if (gamma == 0.0) return 0;
  // (1 - gamma) * T can land an ulp above an integer; the tolerance keeps
  // exact products from rounding up to the next step.
  const double bound = (1.0 - gamma) * static_cast<double>(steps);
  const int last = std::max(1, static_cast<int>(std::ceil(bound - 1e-9)));
  return steps - last + 1;
}

MpdPhasePlan MpdPhasePlan::make(int steps, double gamma, SamplerMode tail) {
  require(tail == SamplerMode::kParallel || tail == SamplerMode::kSequential, "MPD tail must be parallel or sequential");
  MpdPhasePlan plan;
  plan.tail_mode = tail;
  const int count = distillation_step_count(steps, gamma);
  for (int t = steps; t > steps - count; --t) plan.distill_steps.push_back(t);
  return plan;
}

bool MpdPhasePlan::distills(int t) const {
  return std::find(distill_steps.begin(), distill_steps.end(), t) != distill_steps.end();
}

MpdEstimates distill_estimates(const VideoLatent& x_t, const DenoisedPair& pair, double sigma, const Frame& z_end,
                               const GuidanceSpec& guidance, double lambda, ResidualOrder order) {
  VideoLatent forward = apply_cfg(pair, guidance);

  const ResidualStack dx_t = frame_residual(x_t);
  const ResidualStack dx0 = frame_residual(forward);
  const ResidualStack deps_fwd = forward_noise_residual(dx_t, dx0, sigma);

  const VideoLatent x_flip = temporal_flip(x_t);
  const Frame eps1 = init_backward_eps(x_flip.frame(0), z_end, sigma);
  const VideoLatent eps_bwd =
      reconstruct_backward_eps(eps1, order == ResidualOrder::kReversed ? reverse_order(deps_fwd) : deps_fwd);
  VideoLatent reconstruction = temporal_flip(reconstruct_backward_estimate(x_flip, eps_bwd, sigma));

  VideoLatent fused = fuse_estimates(forward, reconstruction, lambda);
  return {std::move(forward), pair.uncond, std::move(reconstruction), std::move(fused)};
}

StepOutcome mpd_step_traced(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                            const FrameCondition& c_start, const Frame& z_end, const SamplerConfig& config,
                            RngStream& rng, bool keep_estimates) {
  const double sigma = schedule.sigma(t);
  const double sigma_prev = schedule.sigma(t - 1);
  const GuidanceSpec w = config.guidance_for(x_t.frame_count());

  TraceRecord rec;
  rec.step = t;
  rec.sigma = sigma;
  rec.phase = "mpd";

  VideoLatent x = x_t;
  for (int j = 1; j <= config.k; ++j) {
    const DenoisedPair pair = denoiser.denoise(x, sigma, c_start);
    ++rec.denoiser_calls;
    rec.end_conditioned_calls += c_start.role == FrameRole::kEnd ? 1 : 0;

    MpdEstimates est = distill_estimates(x, pair, sigma, z_end, w, config.lambda, config.residual_order);
    VideoLatent next = euler_step_uncond_anchor(x, est.fused, est.uncond, sigma, sigma_prev);

    if (j == config.k) {
      rec.discrepancy_loss = path_discrepancy_loss(est.forward, est.reconstruction, sigma);
      if (keep_estimates) {
        rec.forward_estimate = std::move(est.forward);
        rec.backward_estimate = std::move(est.reconstruction);
      }
      return {std::move(next), std::move(rec)};
    }
    x = config.renoise ? renoise(next, sigma, sigma_prev, rng) : std::move(next);
  }
  throw Error(ErrorCode::kInvalidInput, "mpd_step needs k >= 1");
}

VideoLatent mpd_step(const VideoLatent& x_t, const Denoiser& denoiser, const NoiseSchedule& schedule, int t,
                     const FrameCondition& c_start, const Frame& z_end, const SamplerConfig& config, RngStream& rng) {
  return mpd_step_traced(x_t, denoiser, schedule, t, c_start, z_end, config, rng).next;
}

SampleResult mpd_sample(const Denoiser& denoiser, const InbetweenProblem& problem, const SamplerConfig& config,
                        const SnapshotPolicy& snapshots) {
  require(is_mpd(config.mode), "mpd_sample needs an mpd+parallel or mpd+sequential mode");
  config.validate(problem.frames);

  const NoiseSchedule schedule = build_schedule(config.schedule);
  const MpdPhasePlan plan = MpdPhasePlan::make(schedule.steps(), config.gamma, tail_mode(config.mode));
  RngStream rng(config.seed);
  VideoLatent x = draw_initial_latent(problem, schedule, rng);

  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(schedule.steps()));
  for (int t = schedule.steps(); t >= 1; --t) {
    StepOutcome out = plan.distills(t)
                          ? mpd_step_traced(x, denoiser, schedule, t, problem.start, problem.end.latent, config, rng,
                                            snapshots.records(t))
                          : baseline_step(plan.tail_mode, x, denoiser, schedule, t, problem, config, rng,
                                          snapshots.records(t));
    x = std::move(out.next);
    trace.push_back(std::move(out.record));
  }
  return {std::move(x), std::move(trace)};
}

}  // namespace trslab
