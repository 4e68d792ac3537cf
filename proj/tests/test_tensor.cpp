#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "trslab/latent_io.hpp"

using namespace trslab;
using trslab::test::scalar_video;

TEST_CASE("temporal_flip reverses frame order") {
  CHECK(temporal_flip(scalar_video({1, 2, 3})) == scalar_video({3, 2, 1}));
  CHECK(temporal_flip(scalar_video({7, 9})) == scalar_video({9, 7}));
}

TEST_CASE("temporal_flip is an involution") {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const VideoLatent x = test::random_video(rng, test::random_int(rng, 2, 12), test::random_shape(rng));
    CHECK(temporal_flip(temporal_flip(x)) == x);
  }
}

TEST_CASE("frame_residual") {
  const ResidualStack d = frame_residual(scalar_video({1, 4, 9}));
  REQUIRE(d.size() == 2);
  CHECK(d.deltas()(0, 0) == 3.0);
  CHECK(d.deltas()(1, 0) == 5.0);

  const auto constant = VideoLatent::constant(5, {2, 2, 2}, 1.5);
  CHECK(frame_residual(constant).deltas().isZero(0.0));
}

TEST_CASE("frame_residual prefix sums rebuild the last frame") {
  RngStream rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const VideoLatent x = test::random_video(rng, test::random_int(rng, 2, 25), test::random_shape(rng));
    const ResidualStack d = frame_residual(x);
    Frame acc = x.frame(0);
    for (Index i = 0; i < d.size(); ++i) acc += d.delta(i);
    CHECK((acc - x.frame(x.frame_count() - 1)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("frame_residual of the flipped video mirrors and negates") {
  RngStream rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = test::random_int(rng, 2, 20);
    const VideoLatent x = test::random_video(rng, n, test::random_shape(rng));
    const ResidualStack a = frame_residual(x);
    const ResidualStack b = frame_residual(temporal_flip(x));
    for (Index i = 0; i < n - 1; ++i) CHECK(b.delta(i) == -a.delta(n - 2 - i));
  }
}

TEST_CASE("a latent needs two finite frames") {
  CHECK_THROWS_AS(VideoLatent({1, 1, 1}, FrameMatrix<double>::Zero(1, 1)), Error);
  FrameMatrix<double> bad = FrameMatrix<double>::Zero(3, 1);
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(VideoLatent({1, 1, 1}, bad), Error);
  CHECK_THROWS_AS(VideoLatent({1, 2, 2}, FrameMatrix<double>::Zero(3, 3)), Error);
}

TEST_CASE("lerp endpoints and arithmetic") {
  RngStream rng(14);
  const VideoLatent a = test::random_video(rng, 4, {1, 2, 3});
  const VideoLatent b = test::random_video(rng, 4, {1, 2, 3});
  CHECK(lerp(a, b, 1.0) == a);
  CHECK(lerp(a, b, 0.0) == b);
  CHECK(lerp(scalar_video({2, 2}), scalar_video({4, 4}), 0.25) == scalar_video({3.5, 3.5}));
  CHECK(lerp(scalar_video({2, 2}), scalar_video({4, 4}), 0.75) == scalar_video({2.5, 2.5}));
  CHECK_THROWS_AS(lerp(a, test::random_video(rng, 5, {1, 2, 3}), 0.5), Error);
  CHECK_THROWS_AS(lerp(a, b, 1.5), Error);
}

TEST_CASE("lerp is affine in the weight") {
  RngStream rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const FrameShape s = test::random_shape(rng);
    const VideoLatent a = test::random_video(rng, 3, s);
    const VideoLatent b = test::random_video(rng, 3, s);
    const double w1 = rng.uniform(), w2 = rng.uniform();
    const FrameMatrix<double> lhs = lerp(a, b, w1).frames() + lerp(a, b, w2).frames();
    const FrameMatrix<double> rhs = 2.0 * lerp(a, b, 0.5 * (w1 + w2)).frames();
    CHECK(test::max_abs(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("per-frame lerp matches frame-wise scalar lerp") {
  RngStream rng(16);
  const VideoLatent a = test::random_video(rng, 4, {1, 2, 2});
  const VideoLatent b = test::random_video(rng, 4, {1, 2, 2});
  const std::vector<double> w{0.0, 0.25, 0.5, 1.0};
  const VideoLatent out = lerp(a, b, std::span<const double>(w));
  for (Index i = 0; i < 4; ++i) CHECK(out.frame(i) == lerp(a, b, w[static_cast<std::size_t>(i)]).frame(i));
}

TEST_CASE("build_schedule degenerate grids") {
  CHECK(build_schedule(1, 0.002, 700, 7).sigmas() == std::vector<double>{700, 0});
  const auto two = build_schedule(2, 0.002, 700, 7).sigmas();
  REQUIRE(two.size() == 3);
  CHECK(two[0] == doctest::Approx(700).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(two[2] == 0.0);
}

TEST_CASE("build_schedule matches direct evaluation") {
  const NoiseSchedule s = build_schedule(25, 0.002, 700, 7);
  REQUIRE(s.steps() == 25);
  const double a = std::pow(700.0, 1.0 / 7.0), b = std::pow(0.002, 1.0 / 7.0);
  for (int j = 0; j < 25; ++j) {
    const double expected = std::pow(a + (j / 24.0) * (b - a), 7.0);
    CHECK(std::abs(s.sigmas()[static_cast<std::size_t>(j)] - expected) <= 1e-9 * expected);
  }
  CHECK(s.sigma(25) == s.sigmas().front());
  CHECK(s.sigma(0) == 0.0);
}

TEST_CASE("schedules are strictly decreasing with a terminal zero") {
  RngStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int steps = static_cast<int>(test::random_int(rng, 1, 60));
    const double lo = std::exp(-8.0 + 6.0 * rng.uniform());
    const double hi = lo * (1.0 + 1e4 * rng.uniform());
    const double rho = 0.5 + 10.0 * rng.uniform();
    const NoiseSchedule schedule = build_schedule(steps, lo, hi, rho);
    const auto& s = schedule.sigmas();
    CHECK(s.back() == 0.0);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] < s[i - 1]);
  }
}

TEST_CASE("build_schedule rejects bad parameters") {
  CHECK_THROWS_AS(build_schedule(0, 0.002, 700, 7), Error);
  CHECK_THROWS_AS(build_schedule(5, 0.0, 700, 7), Error);
  CHECK_THROWS_AS(build_schedule(5, 700, 0.002, 7), Error);
  CHECK_THROWS_AS(build_schedule(5, 0.002, 700, 0), Error);
}

TEST_CASE("RngStream is a pure function of seed and counter") {
  RngStream a(99), b(99);
  for (int i = 0; i < 1000; ++i) CHECK(a.normal() == b.normal());
  RngStream c(99);
  c.normal_matrix(1, 10);
  RngStream d(99, c.counter());
  CHECK(c.normal() == d.normal());
  CHECK(RngStream(1).next_u64() != RngStream(2).next_u64());
  CHECK(RngStream::derive(5, 0).next_u64() != RngStream::derive(5, 1).next_u64());
}

TEST_CASE("RngStream draws are standard normal") {
  RngStream rng(3);
  const auto m = rng.normal_matrix(1, 200000);
  const double mean = m.mean();
  const double var = (m.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("latent dump round trip at float32 precision") {
  RngStream rng(4);
  const VideoLatent x = test::random_video(rng, 3, {2, 3, 4});
  std::stringstream buf;
  write_latent(buf, x);
  const std::string bytes = buf.str();
  CHECK(bytes.rfind("TRSLAT1 3 2 3 4 dtype=f32 endian=LE\n", 0) == 0);
  CHECK(bytes.size() == 36 + 3 * 24 * 4);
  const VideoLatent y = read_latent(buf);
  CHECK(y.shape() == x.shape());
  CHECK(test::max_abs(y.frames(), x.frames().cast<float>().cast<double>()) == 0.0);
}

TEST_CASE("latent dump rejects malformed input") {
  std::stringstream bad_header("TRSLAT2 2 1 1 1 dtype=f32 endian=LE\n");
  CHECK_THROWS_AS(read_latent(bad_header), Error);
  std::stringstream truncated("TRSLAT1 2 1 1 1 dtype=f32 endian=LE\nab");
  CHECK_THROWS_AS(read_latent(truncated), Error);
}

TEST_CASE("float32 payload encoding is little-endian") {
  FrameMatrix<double> m(1, 2);
  m << 1.0, -2.0;
  const std::string b = to_f32_le(m);
  REQUIRE(b.size() == 8);
  CHECK(static_cast<unsigned char>(b[3]) == 0x3f);
  CHECK(static_cast<unsigned char>(b[2]) == 0x80);
  CHECK(from_f32_le(b, 1, 2) == m);
  CHECK_THROWS_AS(from_f32_le(b, 1, 3), Error);
}
