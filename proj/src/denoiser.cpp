#include "trslab/denoiser.hpp"

#include <cmath>
#include <limits>

namespace trslab {

const char* to_string(FrameRole role) {
  switch (role) {
    case FrameRole::kNone: return "none";
    case FrameRole::kStart: return "start";
    case FrameRole::kEnd: return "end";
  }
  return "none";
}

// ---------------------------------------------------------------------------
// Gaussian world

DenoisedPair gaussian_denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond,
                              const GaussianWorldSpec& world) {
  require(sigma > 0.0, "denoise: sigma must be positive");
  require(x_t.shape() == world.shape && world.mu.size() == world.shape.size(), "gaussian_denoise: shape mismatch");
  require(cond.latent.size() == world.shape.size(), "gaussian_denoise: condition shape mismatch");

  const double prior = world.sigma_d * world.sigma_d;
  const double noise = sigma * sigma;
  const double denom = prior + noise;

  FrameMatrix<double> uncond = (prior * x_t.frames()).rowwise() + noise * world.mu;
  uncond /= denom;
  VideoLatent u(x_t.shape(), std::move(uncond));
  if (cond.role == FrameRole::kNone) return {u, u};

  FrameMatrix<double> conditioned = u.frames();
  conditioned.row(0) = (prior * x_t.frame(0) + noise * cond.latent) / denom;
  return {std::move(u), VideoLatent(x_t.shape(), std::move(conditioned))};
}

GaussianDenoiser::GaussianDenoiser(GaussianWorldSpec world) : world_(std::move(world)) {
  require(world_.sigma_d > 0.0, "gaussian world needs sigma_d > 0");
  require(world_.mu.size() == world_.shape.size(), "gaussian world mean does not match shape");
}

DenoisedPair GaussianDenoiser::denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const {
  return gaussian_denoise(x_t, sigma, cond, world_);
}

// ---------------------------------------------------------------------------
// Shift world

void MotionWorldSpec::validate() const {
  require(height >= 8 && width >= 8, "motion world grid must be at least 8x8");
  require(blob_sigma > 0.0, "motion world needs blob_sigma > 0");
  require(frames >= 2, "motion world needs at least 2 frames");
  require(bias_strength >= 0.0, "motion world needs bias_strength >= 0");
  require(max_speed >= 0.0, "motion world needs max_speed >= 0");
  require(bias_velocity.allFinite(), "motion world bias velocity must be finite");
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FrameMap = Eigen::Map<const RowMatrix>;

/// exp(-(k - center)^2 / (2 s^2)) for k = 0 .. len-1.
Eigen::VectorXd profile(Index len, double center, double s) {
  const double inv = 1.0 / (2.0 * s * s);
  Eigen::VectorXd out(len);
  for (Index k = 0; k < len; ++k) {
    const double d = static_cast<double>(k) - center;
    out(k) = std::exp(-d * d * inv);
  }
  return out;
}

FrameMap frame_map(const VideoLatent& x, Index i, const MotionWorldSpec& w) {
  return FrameMap(x.frames().row(i).data(), w.height, w.width);
}

double penalty(const Eigen::Vector2d& v, double sigma, const MotionWorldSpec& w) {
  return w.bias_strength * sigma * sigma * (v - w.bias_velocity).squaredNorm();
}

std::vector<Eigen::Vector2d> velocity_candidates(const MotionWorldSpec& w) {
  std::vector<Eigen::Vector2d> out;
  const int limit = static_cast<int>(std::floor(w.max_speed));
  for (int vy = -limit; vy <= limit; ++vy)
    for (int vx = -limit; vx <= limit; ++vx)
      if (vx * vx + vy * vy <= w.max_speed * w.max_speed + 1e-12) out.emplace_back(vx, vy);
  return out;
}

/// Full objective including the constant |x|^2 term.
double objective(const VideoLatent& x, double sigma, const MotionWorldSpec& w, const Eigen::Vector2d& first,
                 const Eigen::Vector2d& velocity) {
  double total = x.frames().squaredNorm() + penalty(velocity, sigma, w);
  for (Index i = 0; i < x.frame_count(); ++i) {
    const Eigen::Vector2d q = first + static_cast<double>(i) * velocity;
    const Eigen::VectorXd ex = profile(w.width, q.x(), w.blob_sigma);
    const Eigen::VectorXd ey = profile(w.height, q.y(), w.blob_sigma);
    const double cross = ey.dot(frame_map(x, i, w) * ex);
    total += ex.squaredNorm() * ey.squaredNorm() - 2.0 * cross;
  }
  return total;
}

struct Candidate {
  Eigen::Vector2d first;
  Eigen::Vector2d velocity;
  double score;  // objective minus |x|^2
};

/// Integer p1 over the grid and integer v, scored from per-frame correlation
/// maps over a margin-extended domain. Blobs beyond the margin contribute 0.
Candidate search_free(const VideoLatent& x, double sigma, const MotionWorldSpec& w) {
  const double s = w.blob_sigma;
  const Index margin = static_cast<Index>(std::ceil(4.0 * s));
  const Index we = w.width + 2 * margin;
  const Index he = w.height + 2 * margin;

  Eigen::MatrixXd ex(w.width, we), ey(w.height, he);
  for (Index a = 0; a < we; ++a) ex.col(a) = profile(w.width, static_cast<double>(a - margin), s);
  for (Index b = 0; b < he; ++b) ey.col(b) = profile(w.height, static_cast<double>(b - margin), s);
  const Eigen::RowVectorXd nx = ex.colwise().squaredNorm();
  const Eigen::VectorXd ny = ey.colwise().squaredNorm().transpose();

  const Index n = x.frame_count();
  std::vector<RowMatrix> maps(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const RowMatrix corr = ey.transpose() * frame_map(x, i, w) * ex;
    maps[static_cast<std::size_t>(i)] = ny * nx - 2.0 * corr;
  }

  Candidate best{{0.0, 0.0}, {0.0, 0.0}, std::numeric_limits<double>::infinity()};
  for (const Eigen::Vector2d& v : velocity_candidates(w)) {
    const Index vx = static_cast<Index>(v.x());
    const Index vy = static_cast<Index>(v.y());
    const double pen = penalty(v, sigma, w);
    for (Index py = 0; py < w.height; ++py) {
      for (Index px = 0; px < w.width; ++px) {
        double score = pen;
        for (Index i = 0; i < n; ++i) {
          const Index qx = px + i * vx + margin;
          const Index qy = py + i * vy + margin;
          if (qx < 0 || qy < 0 || qx >= we || qy >= he) continue;
          score += maps[static_cast<std::size_t>(i)](qy, qx);
        }
        if (score < best.score) best = {Eigen::Vector2d(px, py), v, score};
      }
    }
  }
  return best;
}

Candidate search_pinned(const VideoLatent& x, double sigma, const MotionWorldSpec& w, const Eigen::Vector2d& first) {
  const double base = x.frames().squaredNorm();
  Candidate best{first, {0.0, 0.0}, std::numeric_limits<double>::infinity()};
  for (const Eigen::Vector2d& v : velocity_candidates(w)) {
    const double score = objective(x, sigma, w, first, v) - base;
    if (score < best.score) best = {first, v, score};
  }
  return best;
}

/// One damped Gauss-Newton update of (p1, v), or of v alone when pinned.
/// Returns false when no step length reduced the objective.
bool gauss_newton_step(const VideoLatent& x, double sigma, const MotionWorldSpec& w, bool pinned,
                       Eigen::Vector2d& first, Eigen::Vector2d& velocity, double& current) {
  const double s2 = w.blob_sigma * w.blob_sigma;
  Eigen::Matrix4d normal = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();

  Eigen::VectorXd cols = Eigen::VectorXd::LinSpaced(w.width, 0.0, static_cast<double>(w.width - 1));
  Eigen::VectorXd rows = Eigen::VectorXd::LinSpaced(w.height, 0.0, static_cast<double>(w.height - 1));

  for (Index i = 0; i < x.frame_count(); ++i) {
    const double t = static_cast<double>(i);
    const Eigen::Vector2d q = first + t * velocity;
    const Eigen::VectorXd ex = profile(w.width, q.x(), w.blob_sigma);
    const Eigen::VectorXd ey = profile(w.height, q.y(), w.blob_sigma);
    const Eigen::VectorXd gx = ex.cwiseProduct((cols.array() - q.x()).matrix()) / s2;
    const Eigen::VectorXd gy = ey.cwiseProduct((rows.array() - q.y()).matrix()) / s2;

    const FrameMap frame = frame_map(x, i, w);
    const Eigen::VectorXd x_ex = frame * ex;
    const Eigen::VectorXd x_gx = frame * gx;
    const double exx = ex.squaredNorm(), eyy = ey.squaredNorm();
    const double ex_gx = ex.dot(gx), ey_gy = ey.dot(gy);

    // J^T r in q-space, with r = x - render(q)
    Eigen::Vector2d jr(ey.dot(x_gx) - eyy * ex_gx, gy.dot(x_ex) - exx * ey_gy);
    Eigen::Matrix2d jj;
    jj(0, 0) = gx.squaredNorm() * eyy;
    jj(1, 1) = exx * gy.squaredNorm();
    jj(0, 1) = jj(1, 0) = ex_gx * ey_gy;

    Eigen::Matrix<double, 2, 4> a;
    a << Eigen::Matrix2d::Identity(), t * Eigen::Matrix2d::Identity();
    normal += a.transpose() * jj * a;
    rhs += a.transpose() * jr;
  }

  const double lam = w.bias_strength * sigma * sigma;
  normal.bottomRightCorner<2, 2>() += lam * Eigen::Matrix2d::Identity();
  rhs.tail<2>() -= lam * (velocity - w.bias_velocity);

  Eigen::Vector4d delta = Eigen::Vector4d::Zero();
  const double damping = 1e-9 * (normal.trace() + 1.0);
  if (pinned) {
    const Eigen::Matrix2d h = normal.bottomRightCorner<2, 2>() + damping * Eigen::Matrix2d::Identity();
    delta.tail<2>() = h.ldlt().solve(rhs.tail<2>());
  } else {
    const Eigen::Matrix4d h = normal + damping * Eigen::Matrix4d::Identity();
    delta = h.ldlt().solve(rhs);
  }
  if (!delta.allFinite()) return false;

  double step = 1.0;
  for (int attempt = 0; attempt < 6; ++attempt, step *= 0.5) {
    const Eigen::Vector2d f = first + step * delta.head<2>();
    const Eigen::Vector2d v = velocity + step * delta.tail<2>();
    const double value = objective(x, sigma, w, f, v);
    if (value < current) {
      first = f;
      velocity = v;
      current = value;
      return true;
    }
  }
  return false;
}

}  // namespace

Frame render_blob(const Eigen::Vector2d& position, const MotionWorldSpec& world) {
  const Eigen::VectorXd ex = profile(world.width, position.x(), world.blob_sigma);
  const Eigen::VectorXd ey = profile(world.height, position.y(), world.blob_sigma);
  const RowMatrix img = ey * ex.transpose();
  return Eigen::Map<const Frame>(img.data(), img.size());
}

VideoLatent render_trajectory(const Eigen::Vector2d& first, const Eigen::Vector2d& velocity,
                              const MotionWorldSpec& world) {
  FrameMatrix<double> frames(world.frames, world.height * world.width);
  for (Index i = 0; i < world.frames; ++i)
    frames.row(i) = render_blob(first + static_cast<double>(i) * velocity, world);
  return VideoLatent(world.shape(), std::move(frames));
}

Eigen::Vector2d decode_blob_position(const FrameCondition& z, const MotionWorldSpec& world) {
  require(z.latent.size() == world.height * world.width, "decode_blob_position: frame does not match grid");
  const FrameMap img(z.latent.data(), world.height, world.width);
  const double mass = img.sum();
  if (!(std::abs(mass) > 1e-12) || !std::isfinite(mass))
    throw Error(ErrorCode::kDegenerateCondition, "condition frame has no intensity to decode");
  const Eigen::VectorXd cols = Eigen::VectorXd::LinSpaced(world.width, 0.0, static_cast<double>(world.width - 1));
  const Eigen::VectorXd rows = Eigen::VectorXd::LinSpaced(world.height, 0.0, static_cast<double>(world.height - 1));
  const double cx = (img.colwise().sum() * cols)(0) / mass;
  const double cy = (img.rowwise().sum().transpose() * rows)(0) / mass;
  return {cx, cy};
}

MotionFit fit_motion(const VideoLatent& x_t, double sigma, const MotionWorldSpec& world,
                     const std::optional<Eigen::Vector2d>& pinned_first) {
  world.validate();
  require(x_t.shape() == world.shape(), "shift world: latent does not match grid " + to_string(world.shape()));
  const bool pinned = pinned_first.has_value();

  const Candidate start = pinned ? search_pinned(x_t, sigma, world, *pinned_first) : search_free(x_t, sigma, world);
  Eigen::Vector2d first = start.first;
  Eigen::Vector2d velocity = start.velocity;
  double current = objective(x_t, sigma, world, first, velocity);
  for (int iter = 0; iter < 2; ++iter) {
    if (!gauss_newton_step(x_t, sigma, world, pinned, first, velocity, current)) break;
  }

  const double data = current - penalty(velocity, sigma, world);
  const double elements = static_cast<double>(x_t.frames().size());
  return {first, velocity, current, std::max(data, 0.0) / elements};
}

DenoisedPair shiftworld_denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond,
                                const MotionWorldSpec& world) {
  require(sigma > 0.0, "denoise: sigma must be positive");
  require(x_t.frames().allFinite(), "shiftworld_denoise: non-finite input");

  // Posterior-style shrinkage toward the rendered fit. The prior spread is the
  // fit residual in excess of the noise variance plus three standard
  // deviations of its chi-square sampling error, floored at 1e-3.
  const double noise = sigma * sigma;
  const double margin = 3.0 * std::sqrt(2.0 / static_cast<double>(x_t.frames().size()));
  auto estimate = [&](const MotionFit& fit) {
    const double floor = 1e-3 * 1e-3;
    const double prior = std::max(fit.residual_mse - noise * (1.0 + margin), floor);
    const VideoLatent rendered = render_trajectory(fit.first, fit.velocity, world);
    return VideoLatent(x_t.shape(), (prior * x_t.frames() + noise * rendered.frames()) / (prior + noise));
  };

  VideoLatent uncond = estimate(fit_motion(x_t, sigma, world, std::nullopt));
  if (cond.role == FrameRole::kNone) return {uncond, uncond};
  const Eigen::Vector2d anchor = decode_blob_position(cond, world);
  VideoLatent conditioned = estimate(fit_motion(x_t, sigma, world, anchor));
  return {std::move(uncond), std::move(conditioned)};
}

ShiftWorldDenoiser::ShiftWorldDenoiser(MotionWorldSpec world) : world_(std::move(world)) { world_.validate(); }

DenoisedPair ShiftWorldDenoiser::denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const {
  return shiftworld_denoise(x_t, sigma, cond, world_);
}

// ---------------------------------------------------------------------------

DenoisedPair AuditingDenoiser::denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const {
  {
    std::lock_guard lock(mutex_);
    calls_.push_back({sigma, cond.role});
  }
  return inner_.denoise(x_t, sigma, cond);
}

std::vector<AuditingDenoiser::Call> AuditingDenoiser::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t AuditingDenoiser::count(FrameRole role) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const Call& c : calls_) n += c.role == role ? 1 : 0;
  return n;
}

void AuditingDenoiser::clear() {
  std::lock_guard lock(mutex_);
  calls_.clear();
}

}  // namespace trslab
