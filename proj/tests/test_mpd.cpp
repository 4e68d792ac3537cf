#include <doctest.h>

#include "support.hpp"
#include "trslab/diagnostics.hpp"
#include "trslab/mpd.hpp"

using namespace trslab;
using trslab::test::scalar_video;

namespace {

ResidualStack scalar_stack(std::initializer_list<double> values) {
  FrameMatrix<double> m(static_cast<Index>(values.size()), 1);
  Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return ResidualStack({1, 1, 1}, m);
}

struct Instance {
  VideoLatent x_t;
  VideoLatent x0;
  Frame z_end;
  double sigma;
};

Instance random_instance(RngStream& rng) {
  const Index n = test::random_int(rng, 3, 25);
  const FrameShape s = test::random_shape(rng);
  const double sigma = 0.01 + 50.0 * rng.uniform();
  return {test::random_video(rng, n, s, sigma), test::random_video(rng, n, s), test::random_frame(rng, s.size()), sigma};
}

/// Flipped-back reconstruction built by walking Eqs. 13-17 index by index.
FrameMatrix<double> direct_reconstruction(const Instance& in, bool reversed) {
  const Index n = in.x_t.frame_count();
  const auto& x = in.x_t.frames();
  const auto& x0 = in.x0.frames();
  std::vector<Frame> deps(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i + 1 < n; ++i)
    deps[static_cast<std::size_t>(i)] = ((x.row(i + 1) - x.row(i)) - (x0.row(i + 1) - x0.row(i))) / in.sigma;
  if (reversed) std::reverse(deps.begin(), deps.end());
  FrameMatrix<double> rec_flipped(n, x.cols());
  Frame eps = (x.row(n - 1) - in.z_end) / in.sigma;
  for (Index i = 0; i < n; ++i) {
    if (i > 0) eps -= deps[static_cast<std::size_t>(i - 1)];
    rec_flipped.row(i) = x.row(n - 1 - i) - in.sigma * eps;
  }
  return rec_flipped.colwise().reverse();
}

MpdEstimates estimates(const Instance& in, ResidualOrder order, double lambda = 1.0) {
  return distill_estimates(in.x_t, DenoisedPair(in.x0, in.x0), in.sigma, in.z_end, 0.0, lambda, order);
}

struct GaussianFixture {
  GaussianWorldSpec world{{1, 2, 2}, Frame::Constant(4, 0.25), 1.0};
  GaussianDenoiser denoiser{world};
  InbetweenProblem problem{world.shape,
                           6,
                           {Frame::Constant(4, 2.0), FrameRole::kStart},
                           {Frame::Constant(4, -1.0), FrameRole::kEnd}};
};

SamplerConfig config_for(SamplerMode mode, int steps = 10, std::uint64_t seed = 5) {
  SamplerConfig c = SamplerConfig::defaults(mode);
  c.schedule.steps = steps;
  c.schedule.sigma_max = 20.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("forward noise residual") {
  CHECK(forward_noise_residual(scalar_stack({2}), scalar_stack({1}), 2.0).deltas()(0, 0) == 0.5);
  RngStream rng(1);
  const VideoLatent x = test::random_video(rng, 6, {2, 2, 2});
  const ResidualStack d = frame_residual(x);
  CHECK(forward_noise_residual(d, d, 0.3).deltas().isZero(0.0));
  for (int trial = 0; trial < 100; ++trial) {
    const ResidualStack a = frame_residual(test::random_video(rng, 5, {1, 2, 3}, 4.0));
    const ResidualStack b = frame_residual(test::random_video(rng, 5, {1, 2, 3}));
    const double sigma = 0.1 + 5.0 * rng.uniform();
    const ResidualStack e = forward_noise_residual(a, b, sigma);
    CHECK(test::max_abs(sigma * e.deltas() + b.deltas(), a.deltas()) <= 1e-12);
  }
  CHECK_THROWS_AS(forward_noise_residual(scalar_stack({1, 2}), scalar_stack({1}), 1.0), Error);
}

TEST_CASE("backward noise initialization") {
  CHECK(init_backward_eps(Frame::Constant(1, 5.0), Frame::Constant(1, 3.0), 2.0)(0) == 1.0);
  CHECK(init_backward_eps(Frame::Constant(3, 1.5), Frame::Constant(3, 1.5), 0.2).isZero(0.0));
  RngStream rng(2);
  const Frame x = test::random_frame(rng, 9), z = test::random_frame(rng, 9);
  CHECK((init_backward_eps(x, z, 0.7) * 0.7 + z - x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(init_backward_eps(x, Frame::Zero(3), 1.0), Error);
}

TEST_CASE("backward noise reconstruction") {
  CHECK(reconstruct_backward_eps(Frame::Constant(1, 1.0), scalar_stack({0.5, -0.25})) == scalar_video({1, 0.5, 0.75}));
  CHECK(reconstruct_backward_eps(Frame::Constant(1, 2.0), scalar_stack({0, 0, 0})) == scalar_video({2, 2, 2, 2}));
  RngStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const ResidualStack d = frame_residual(test::random_video(rng, 7, {1, 3, 1}));
    const VideoLatent eps = reconstruct_backward_eps(test::random_frame(rng, 3), d);
    CHECK(test::max_abs(frame_residual(eps).deltas(), -d.deltas()) <= 1e-12);
  }
}

TEST_CASE("backward estimate reconstruction") {
  const VideoLatent rec = reconstruct_backward_estimate(scalar_video({5, 4, 3}), scalar_video({1, 0.5, 0.75}), 2.0);
  CHECK(rec == scalar_video({3, 3, 1.5}));
  CHECK(init_backward_eps(Frame::Constant(1, 5.0), Frame::Constant(1, 3.0), 2.0)(0) == 1.0);
  const VideoLatent x = scalar_video({1, 2, 3});
  CHECK(reconstruct_backward_estimate(x, VideoLatent::zeros(3, {1, 1, 1}), 4.0) == x);
}

TEST_CASE("estimate fusion") {
  RngStream rng(4);
  const VideoLatent f = test::random_video(rng, 3, {1, 2, 2});
  const VideoLatent b = test::random_video(rng, 3, {1, 2, 2});
  CHECK(fuse_estimates(f, b, 0.0) == f);
  CHECK(fuse_estimates(f, b, 1.0) == b);
  CHECK(fuse_estimates(scalar_video({2, 2}), scalar_video({4, 4}), 0.5) == scalar_video({3, 3}));
}

TEST_CASE("distillation matches a direct index-by-index construction") {
  RngStream rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(rng);
    const double scale = 1.0 + in.sigma;
    CHECK(test::max_abs(estimates(in, ResidualOrder::kForward).reconstruction.frames(),
                        direct_reconstruction(in, false)) <= 1e-10 * scale);
    CHECK(test::max_abs(estimates(in, ResidualOrder::kReversed).reconstruction.frames(),
                        direct_reconstruction(in, true)) <= 1e-10 * scale);
  }
}

TEST_CASE("residual transfer identity in frame order") {
  RngStream rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const Instance in = random_instance(rng);
    const Index n = in.x_t.frame_count();
    const auto y = estimates(in, ResidualOrder::kForward).reconstruction.frames();
    const auto& x = in.x_t.frames();
    const auto& x0 = in.x0.frames();
    // 1-based: y(j+1) - y(j) = dx(j+1) - dx(N-j+1) + dx0(N-j+1), with dx(i) = x(i) - x(i-1).
    auto dx = [&](const auto& m, Index i) { return Frame(m.row(i - 1) - m.row(i - 2)); };
    double worst = 0.0;
    for (Index j = 1; j <= n - 1; ++j) {
      const Frame lhs = y.row(j) - y.row(j - 1);
      const Frame rhs = dx(x, j + 1) - dx(x, n - j + 1) + dx(x0, n - j + 1);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-10 * (1.0 + in.sigma));
  }
}

TEST_CASE("reversed residual order transfers the forward estimate's motion") {
  RngStream rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Instance in = random_instance(rng);
    const auto y = estimates(in, ResidualOrder::kReversed).reconstruction.frames();
    const ResidualStack d0 = frame_residual(in.x0);
    CHECK(test::max_abs(frame_residual(VideoLatent(in.x0.shape(), y)).deltas(), d0.deltas()) <= 1e-10 * (1.0 + in.sigma));
  }
}

TEST_CASE("the reconstruction is anchored at the end keyframe") {
  RngStream rng(8);
  for (ResidualOrder order : {ResidualOrder::kForward, ResidualOrder::kReversed}) {
    for (int trial = 0; trial < 200; ++trial) {
      const Instance in = random_instance(rng);
      const auto rec = estimates(in, order).reconstruction;
      CHECK((rec.frame(rec.frame_count() - 1) - in.z_end).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + in.sigma));
    }
  }
}

TEST_CASE("discrepancy loss of the reconstruction expands over mirrored residuals") {
  RngStream rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(rng);
    const Index n = in.x_t.frame_count();
    const MpdEstimates e = estimates(in, ResidualOrder::kForward);
    const double defined = path_discrepancy_loss(e.forward, e.reconstruction, in.sigma);
    const auto& x = in.x_t.frames();
    const auto& x0 = in.x0.frames();
    double expanded = 0.0;
    for (Index j = 0; j < n; ++j) {
      const Index m = n - 1 - j;
      const Frame mismatch =
          (x.row(j) - x.row(0)) + (x.row(m) - x.row(n - 1)) + in.z_end - x0.row(m) + x0.row(0) - x0.row(j);
      expanded += mismatch.squaredNorm();
    }
    expanded /= in.sigma * in.sigma;
    CHECK(std::abs(defined - expanded) <= 1e-9 * (1.0 + expanded));
  }
}

TEST_CASE("distillation phase plan") {
  CHECK(MpdPhasePlan::make(25, 0.0, SamplerMode::kSequential).distill_steps.empty());
  CHECK(MpdPhasePlan::make(25, 0.2, SamplerMode::kSequential).distill_steps ==
        std::vector<int>{25, 24, 23, 22, 21, 20});
  CHECK(MpdPhasePlan::make(25, 1.0, SamplerMode::kParallel).distill_steps.size() == 25);
  CHECK_THROWS_AS(MpdPhasePlan::make(25, 0.2, SamplerMode::kForwardOnly), Error);
  for (int steps : {1, 2, 7, 10, 25, 50}) {
    for (int m = 1; m <= 20; ++m) {
      const int bound = std::max(1, ((20 - m) * steps + 19) / 20);
      const MpdPhasePlan plan = MpdPhasePlan::make(steps, m / 20.0, SamplerMode::kSequential);
      CHECK(plan.distill_steps.size() == static_cast<std::size_t>(steps - bound + 1));
      CHECK(plan.distill_steps.front() == steps);
      CHECK(plan.distill_steps.back() == bound);
    }
  }
}

TEST_CASE("mpd step with k=1 and lambda=0 is the anchored Euler step") {
  GaussianFixture f;
  SamplerConfig c = config_for(SamplerMode::kMpdSequential);
  c.k = 1;
  c.lambda = 0.0;
  const NoiseSchedule s = build_schedule(c.schedule);
  RngStream rng(10), a(1);
  for (int t = 1; t <= 10; ++t) {
    const VideoLatent x = test::random_video(rng, 6, f.world.shape, s.sigma(t));
    const DenoisedPair p = f.denoiser.denoise(x, s.sigma(t), f.problem.start);
    const VideoLatent expected =
        euler_step_uncond_anchor(x, apply_cfg(p, c.guidance_for(6)), p.uncond, s.sigma(t), s.sigma(t - 1));
    CHECK(mpd_step(x, f.denoiser, s, t, f.problem.start, f.problem.end.latent, c, a) == expected);
  }
  CHECK(a.counter() == 0);
}

TEST_CASE("mpd step with k=2 matches a hand-composed primitive chain") {
  GaussianFixture f;
  SamplerConfig c = config_for(SamplerMode::kMpdSequential);
  c.k = 2;
  c.lambda = 0.7;
  const NoiseSchedule s = build_schedule(c.schedule);
  const int t = 7;
  const double sigma = s.sigma(t), sigma_prev = s.sigma(t - 1);
  const GuidanceSpec w = c.guidance_for(6);
  const Frame& z = f.problem.end.latent;

  auto iteration = [&](const VideoLatent& x) {
    const DenoisedPair p = f.denoiser.denoise(x, sigma, f.problem.start);
    const VideoLatent x0 = apply_cfg(p, w);
    const ResidualStack deps = forward_noise_residual(frame_residual(x), frame_residual(x0), sigma);
    const VideoLatent xf = temporal_flip(x);
    const VideoLatent eps = reconstruct_backward_eps(init_backward_eps(xf.frame(0), z, sigma), reverse_order(deps));
    const VideoLatent rec = temporal_flip(reconstruct_backward_estimate(xf, eps, sigma));
    return euler_step_uncond_anchor(x, fuse_estimates(x0, rec, c.lambda), p.uncond, sigma, sigma_prev);
  };

  RngStream init(11);
  const VideoLatent x = test::random_video(init, 6, f.world.shape, sigma);
  RngStream a(12), b(12);
  const VideoLatent chained = iteration(renoise(iteration(x), sigma, sigma_prev, b));
  CHECK(mpd_step(x, f.denoiser, s, t, f.problem.start, z, c, a) == chained);
  CHECK(a.counter() == b.counter());
}

TEST_CASE("mpd makes k start-conditioned calls per step and never conditions on the end") {
  GaussianFixture f;
  for (SamplerMode mode : {SamplerMode::kMpdParallel, SamplerMode::kMpdSequential}) {
    for (int k : {1, 2, 3}) {
      SamplerConfig c = config_for(mode, 10);
      c.k = k;
      c.gamma = 0.4;
      const NoiseSchedule s = build_schedule(c.schedule);
      AuditingDenoiser audit(f.denoiser);
      RngStream rng(1);
      const VideoLatent x = test::random_video(rng, 6, f.world.shape, s.sigma(10));
      const StepOutcome out = mpd_step_traced(x, audit, s, 10, f.problem.start, f.problem.end.latent, c, rng);
      CHECK(audit.calls().size() == static_cast<std::size_t>(k));
      CHECK(audit.count(FrameRole::kEnd) == 0);
      CHECK(out.record.denoiser_calls == k);
      CHECK(out.record.end_conditioned_calls == 0);

      AuditingDenoiser whole(f.denoiser);
      const SampleResult r = run_sampler(whole, f.problem, c);
      CHECK(whole.calls().size() == static_cast<std::size_t>(5 * k + 5 * 2));
      CHECK(whole.count(FrameRole::kEnd) == 5);
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(r.trace[i].phase == "mpd");
        CHECK(r.trace[i].end_conditioned_calls == 0);
      }
      CHECK(r.trace[5].phase == to_string(tail_mode(mode)));
    }
  }
}

TEST_CASE("gamma=0 reproduces the baseline bit for bit") {
  GaussianFixture f;
  for (SamplerMode mode : {SamplerMode::kMpdParallel, SamplerMode::kMpdSequential}) {
    SamplerConfig c = config_for(mode, 12, 99);
    c.gamma = 0.0;
    SamplerConfig base = c;
    base.mode = tail_mode(mode);
    CHECK(run_sampler(f.denoiser, f.problem, c).video == run_sampler(f.denoiser, f.problem, base).video);
  }
}

TEST_CASE("gamma=1 distills at every step and keeps the anchor") {
  GaussianFixture f;
  SamplerConfig c = config_for(SamplerMode::kMpdSequential, 8);
  c.gamma = 1.0;
  const SampleResult r = run_sampler(f.denoiser, f.problem, c, SnapshotPolicy::all());
  REQUIRE(r.trace.size() == 8);
  for (const TraceRecord& rec : r.trace) {
    CHECK(rec.phase == "mpd");
    REQUIRE(rec.backward_estimate);
    const VideoLatent& b = *rec.backward_estimate;
    CHECK((b.frame(b.frame_count() - 1) - f.problem.end.latent).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(rec.discrepancy_loss >= 0.0);
  }
}
