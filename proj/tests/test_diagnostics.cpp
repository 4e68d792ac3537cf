#include <doctest.h>

#include <fstream>
#include <unistd.h>

#include "support.hpp"
#include "trslab/diagnostics.hpp"
#include "trslab/harness.hpp"
#include "trslab/latent_io.hpp"
#include "trslab/mpd.hpp"

using namespace trslab;
using trslab::test::scalar_video;

namespace {

std::filesystem::path scratch_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / ("trslab_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

MotionWorldSpec world16() {
  MotionWorldSpec w;
  w.frames = 9;
  return w;
}

}  // namespace

TEST_CASE("path discrepancy loss") {
  RngStream rng(1);
  const VideoLatent a = test::random_video(rng, 4, {1, 3, 3});
  const VideoLatent b = test::random_video(rng, 4, {1, 3, 3});
  CHECK(path_discrepancy_loss(a, a, 0.3) == 0.0);
  CHECK(path_discrepancy_loss(scalar_video({2, 2}), scalar_video({0, 2}), 2.0) == 1.0);
  const double expanded = (a.frames().squaredNorm() - 2.0 * a.frames().cwiseProduct(b.frames()).sum() +
                           b.frames().squaredNorm()) /
                          (0.7 * 0.7);
  CHECK(path_discrepancy_loss(a, b, 0.7) == doctest::Approx(expanded).epsilon(1e-9));
  CHECK(path_discrepancy_loss(a, b, 0.7) == path_discrepancy_loss(b, a, 0.7));
  CHECK(path_discrepancy_loss(a, b, 0.35) == 4.0 * path_discrepancy_loss(a, b, 0.7));
  CHECK_THROWS_AS(path_discrepancy_loss(a, b, 0.0), Error);
  CHECK_THROWS_AS(path_discrepancy_loss(a, test::random_video(rng, 5, {1, 3, 3}), 1.0), Error);
}

TEST_CASE("quality metrics on ideal and mirrored videos") {
  const MotionWorldSpec w = world16();
  const VideoLatent truth = render_trajectory({6.0, 16.0}, {2.0, 0.0}, w);
  const Frame zs = truth.frame(0), ze = truth.frame(w.frames - 1);
  const QualityReport q = score_video(truth, w, zs, ze);
  CHECK(q.smoothness == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.direction_consistency == 1.0);
  CHECK(q.ghosting_score == 0.0);
  CHECK(q.endpoint_mse_start == 0.0);
  CHECK(q.endpoint_mse_end == 0.0);
  CHECK_FALSE(q.degenerate);

  const QualityReport r = score_video(temporal_flip(truth), w, zs, ze);
  CHECK(r.direction_consistency == 0.0);
  CHECK(r.endpoint_mse_start > 0.0);

  const VideoLatent ghost(w.shape(), 0.5 * (truth.frames() + temporal_flip(truth).frames()));
  CHECK(score_video(ghost, w, zs, ze).ghosting_score >= 0.5);
}

TEST_CASE("quality metrics are translation invariant") {
  const MotionWorldSpec w = world16();
  const VideoLatent a = render_trajectory({6.0, 10.0}, {2.0, 1.0}, w);
  const VideoLatent b = render_trajectory({9.0, 13.0}, {2.0, 1.0}, w);
  const QualityReport qa = score_video(a, w, a.frame(0), a.frame(8));
  const QualityReport qb = score_video(b, w, b.frame(0), b.frame(8));
  CHECK(qa.smoothness == doctest::Approx(qb.smoothness).epsilon(1e-9));
  CHECK(qa.direction_consistency == qb.direction_consistency);
  CHECK(qa.ghosting_score == qb.ghosting_score);
}

TEST_CASE("degenerate videos are flagged, not rejected") {
  const MotionWorldSpec w = world16();
  const auto zeros = VideoLatent::zeros(w.frames, w.shape());
  const QualityReport q = score_video(zeros, w, render_blob({4, 4}, w), render_blob({20, 4}, w));
  CHECK(q.degenerate);
  CHECK(q.ghosting_score >= 0.0);
  CHECK(q.to_key_value().find("degenerate=1") != std::string::npos);
}

TEST_CASE("quality report key=value serialization has a fixed order") {
  QualityReport q;
  q.endpoint_mse_start = 0.25;
  const std::string kv = q.to_key_value();
  CHECK(kv.rfind("endpoint_mse_start=0.25", 0) == 0);
  CHECK(kv.find("endpoint_mse_end=") < kv.find("smoothness="));
  CHECK(kv.find("ghosting_score=") < kv.find("degenerate="));
}

TEST_CASE("mid step index rounds halves up") {
  CHECK(mid_step_for(0.5, 25) == 13);
  CHECK(mid_step_for(1.0 / 25.0, 25) == 1);
  CHECK(mid_step_for(0.5, 10) == 5);
  CHECK_THROWS_AS(mid_step_for(0.0, 10), Error);
}

TEST_CASE("trace round trip and mid-sampling dumps") {
  GaussianWorldSpec world{{1, 4, 4}, Frame::Zero(16), 1.0};
  const GaussianDenoiser d(world);
  const InbetweenProblem p{world.shape, 5, {Frame::Constant(16, 1.0), FrameRole::kStart},
                           {Frame::Constant(16, -1.0), FrameRole::kEnd}};
  SamplerConfig c = SamplerConfig::defaults(SamplerMode::kMpdParallel);
  c.schedule.steps = 25;
  c.seed = 3;
  const SampleResult r = run_sampler(d, p, c, SnapshotPolicy::range(25, 1));

  const auto dir = scratch_dir("trace");
  write_trace(dir / "trace", r.trace);
  const auto back = read_trace(dir / "trace");
  REQUIRE(back.size() == r.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].step == r.trace[i].step);
    CHECK(back[i].phase == r.trace[i].phase);
    CHECK(back[i].sigma == r.trace[i].sigma);
    CHECK(back[i].discrepancy_loss == r.trace[i].discrepancy_loss);
    CHECK(back[i].denoiser_calls == r.trace[i].denoiser_calls);
    REQUIRE(back[i].forward_estimate);
    CHECK(test::max_abs(back[i].forward_estimate->frames(), r.trace[i].forward_estimate->frames()) <= 1e-5);
  }

  const auto files = dump_mid_estimates(back, 0.5, dir / "mid");
  CHECK(std::filesystem::exists(dir / "mid" / "mid_step013_forward.lat"));
  CHECK(std::filesystem::exists(dir / "mid" / "mid_step013_backward.lat"));
  CHECK(std::filesystem::exists(dir / "mid" / "mid_step013_forward" / "frame_001.pgm"));
  const VideoLatent fwd = read_latent(dir / "mid" / "mid_step013_forward.lat");
  CHECK(test::max_abs(fwd.frames(), r.trace[12].forward_estimate->frames()) <= 1e-5);

  dump_mid_estimates(back, 1.0 / 25.0, dir / "first");
  CHECK(std::filesystem::exists(dir / "first" / "mid_step001_forward.lat"));

  std::ifstream pgm(dir / "mid" / "mid_step013_forward" / "frame_001.pgm", std::ios::binary);
  std::string magic;
  pgm >> magic;
  CHECK(magic == "P5");
  std::filesystem::remove_all(dir);
}

TEST_CASE("dumping without snapshots is a not-recorded error") {
  GaussianWorldSpec world{{1, 2, 2}, Frame::Zero(4), 1.0};
  const GaussianDenoiser d(world);
  const InbetweenProblem p{world.shape, 3, {Frame::Zero(4), FrameRole::kStart}, {Frame::Zero(4), FrameRole::kEnd}};
  SamplerConfig c = SamplerConfig::defaults(SamplerMode::kParallel);
  c.schedule.steps = 6;
  const SampleResult r = run_sampler(d, p, c);
  try {
    dump_mid_estimates(r.trace, 0.5, scratch_dir("none"));
    FAIL("expected not-recorded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotRecorded);
  }
  const SampleResult partial = run_sampler(d, p, c, SnapshotPolicy::range(6, 5));
  CHECK_THROWS_AS(dump_mid_estimates(partial.trace, 0.5, scratch_dir("partial")), Error);
}

namespace {

struct SignTest {
  int wins = 0;
  double p = 1.0;
  double mpd_total = 0.0;
  double parallel_total = 0.0;
};

// Distillation-phase discrepancy of mpd+parallel vs parallel fusion at
// matched steps and seeds.
SignTest discrepancy_sign_test(const Eigen::Vector2d& start, const Eigen::Vector2d& end) {
  ExperimentConfig bench = conflict_benchmark_defaults();
  auto& world = std::get<MotionWorldConfig>(bench.world);
  world.start = start;
  world.end = end;
  const ShiftWorldDenoiser d(world.spec);
  const InbetweenProblem p = bench.problem();
  const SamplerConfig mpd = bench.sampler_for(SamplerMode::kMpdParallel);
  const SamplerConfig par = bench.sampler_for(SamplerMode::kParallel);
  const int distill = distillation_step_count(mpd.schedule.steps, mpd.gamma);

  SignTest r;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    SamplerConfig a = mpd, b = par;
    a.seed = b.seed = static_cast<std::uint64_t>(1000 + s);
    const SampleResult ra = run_sampler(d, p, a);
    const SampleResult rb = run_sampler(d, p, b);
    double la = 0.0, lb = 0.0;
    for (int i = 0; i < distill; ++i) {
      la += ra.trace[static_cast<std::size_t>(i)].discrepancy_loss;
      lb += rb.trace[static_cast<std::size_t>(i)].discrepancy_loss;
    }
    r.wins += la < lb ? 1 : 0;
    r.mpd_total += la;
    r.parallel_total += lb;
  }
  double binom = std::pow(0.5, seeds);
  r.p = 0.0;
  for (int k = 0; k <= seeds; ++k) {
    if (k >= r.wins) r.p += binom;
    binom *= static_cast<double>(seeds - k) / static_cast<double>(k + 1);
  }
  return r;
}

}  // namespace

TEST_CASE("distillation lowers the path discrepancy when motion follows the bias") {
  const SignTest r = discrepancy_sign_test({4.0, 16.0}, {28.0, 16.0});
  MESSAGE("mpd wins " << r.wins << "/50, sign-test p=" << r.p);
  CHECK(r.mpd_total < r.parallel_total);
  CHECK(r.p < 0.05);
}

// With motion opposed to the bias the start-conditioned estimate is the
// biased one, and its anchored reconstruction disagrees with it about as
// often as the two fusion branches disagree; recorded, not enforced.
TEST_CASE("distillation lowers the path discrepancy when motion opposes the bias" * doctest::may_fail()) {
  const SignTest r = discrepancy_sign_test({28.0, 16.0}, {4.0, 16.0});
  MESSAGE("mpd wins " << r.wins << "/50, sign-test p=" << r.p);
  CHECK(r.mpd_total < r.parallel_total);
  CHECK(r.p < 0.05);
}
