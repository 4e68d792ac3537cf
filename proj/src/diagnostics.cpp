#include "trslab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "trslab/latent_io.hpp"

namespace trslab {

double path_discrepancy_loss(const VideoLatent& x0_a, const VideoLatent& x0_b_flippedback, double sigma) {
  require(sigma > 0.0, "path_discrepancy_loss: sigma must be positive");
  require(x0_a.same_layout(x0_b_flippedback), "path_discrepancy_loss: shape mismatch");
  return (x0_a.frames() - x0_b_flippedback.frames()).squaredNorm() / (sigma * sigma);
}

std::string QualityReport::to_key_value() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "endpoint_mse_start=" << endpoint_mse_start << '\n'
      << "endpoint_mse_end=" << endpoint_mse_end << '\n'
      << "smoothness=" << smoothness << '\n'
      << "direction_consistency=" << direction_consistency << '\n'
      << "ghosting_score=" << ghosting_score << '\n'
      << "degenerate=" << (degenerate ? 1 : 0) << '\n';
  return out.str();
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> plane(const VideoLatent& v, Index frame, const MotionWorldSpec& w) {
  return Eigen::Map<const RowMatrix>(v.frames().row(frame).data(), w.height, w.width);
}

}  // namespace

BlobTrack track_blob(const VideoLatent& video, const MotionWorldSpec& world) {
  require(video.shape() == world.shape(), "track_blob: video does not match world grid");
  const double video_peak = video.frames().maxCoeff();
  BlobTrack track;
  for (Index f = 0; f < video.frame_count(); ++f) {
    const auto img = plane(video, f, world);
    const double peak = img.maxCoeff();
    if (!(video_peak > 1e-9) || peak < 0.25 * video_peak) {
      track.positions.emplace_back(0.0, 0.0);
      track.present.push_back(false);
      continue;
    }
    double mass = 0.0, cx = 0.0, cy = 0.0;
    for (Index r = 0; r < world.height; ++r) {
      for (Index c = 0; c < world.width; ++c) {
        const double v = img(r, c);
        if (v < 0.5 * peak) continue;
        mass += v;
        cx += v * static_cast<double>(c);
        cy += v * static_cast<double>(r);
      }
    }
    track.positions.emplace_back(cx / mass, cy / mass);
    track.present.push_back(true);
  }
  return track;
}

int count_local_maxima(const VideoLatent& video, Index frame, const MotionWorldSpec& world, double threshold) {
  const auto img = plane(video, frame, world);
  int count = 0;
  for (Index r = 0; r < world.height; ++r) {
    for (Index c = 0; c < world.width; ++c) {
      const double v = img(r, c);
      if (!(v > threshold)) continue;
      bool is_max = true;
      for (Index dr = -1; dr <= 1 && is_max; ++dr) {
        for (Index dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const Index rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= world.height || cc >= world.width) continue;
          if (!(v > img(rr, cc))) {
            is_max = false;
            break;
          }
        }
      }
      count += is_max ? 1 : 0;
    }
  }
  return count;
}

QualityReport score_video(const VideoLatent& video, const MotionWorldSpec& world, const Frame& z_start,
                          const Frame& z_end) {
  require(video.shape() == world.shape(), "score_video: video does not match world grid");
  require(z_start.size() == video.frame_size() && z_end.size() == video.frame_size(), "score_video: keyframe shape");
  const Index n = video.frame_count();
  const double elements = static_cast<double>(video.frame_size());

  QualityReport rep;
  rep.endpoint_mse_start = (video.frame(0) - z_start).squaredNorm() / elements;
  rep.endpoint_mse_end = (video.frame(n - 1) - z_end).squaredNorm() / elements;

  const BlobTrack track = track_blob(video, world);
  for (Index f = 0; f < n; ++f) rep.degenerate = rep.degenerate || !track.present[static_cast<std::size_t>(f)];

  // Keyframe displacement; a keyframe without intensity leaves it zero.
  Eigen::Vector2d displacement = Eigen::Vector2d::Zero();
  try {
    displacement = decode_blob_position({z_end, FrameRole::kEnd}, world) -
                   decode_blob_position({z_start, FrameRole::kStart}, world);
  } catch (const Error&) {
    rep.degenerate = true;
  }

  int transitions = 0, consistent = 0;
  for (Index f = 0; f + 1 < n; ++f) {
    const auto a = static_cast<std::size_t>(f);
    if (!track.present[a] || !track.present[a + 1]) continue;
    ++transitions;
    consistent += (track.positions[a + 1] - track.positions[a]).dot(displacement) > 0.0 ? 1 : 0;
  }
  rep.direction_consistency = transitions > 0 ? static_cast<double>(consistent) / transitions : 0.0;

  int triples = 0;
  double accel = 0.0;
  for (Index f = 1; f + 1 < n; ++f) {
    const auto a = static_cast<std::size_t>(f);
    if (!track.present[a - 1] || !track.present[a] || !track.present[a + 1]) continue;
    ++triples;
    accel += (track.positions[a + 1] - 2.0 * track.positions[a] + track.positions[a - 1]).squaredNorm();
  }
  rep.smoothness = triples > 0 ? accel / triples : 0.0;
  if (transitions == 0) rep.degenerate = true;

  const double peak = video.frames().leftCols(world.height * world.width).maxCoeff();
  double ghosts = 0.0;
  if (peak > 0.0) {
    for (Index f = 0; f < n; ++f) ghosts += std::max(count_local_maxima(video, f, world, 0.5 * peak) - 1, 0);
  }
  rep.ghosting_score = ghosts / static_cast<double>(n);
  return rep;
}

int mid_step_for(double at_fraction, int steps) {
  require(at_fraction > 0.0 && at_fraction <= 1.0, "at_fraction must lie in (0,1]");
  require(steps >= 1, "mid_step_for needs T >= 1");
  return std::clamp(static_cast<int>(std::floor(at_fraction * steps + 0.5)), 1, steps);
}

std::vector<std::filesystem::path> dump_mid_estimates(const std::vector<TraceRecord>& trace, double at_fraction,
                                                      const std::filesystem::path& out_dir) {
  require(!trace.empty(), "dump_mid_estimates: empty trace", ErrorCode::kNotRecorded);
  int steps = 0;
  for (const TraceRecord& r : trace) steps = std::max(steps, r.step);
  const int t = mid_step_for(at_fraction, steps);

  const TraceRecord* rec = nullptr;
  for (const TraceRecord& r : trace)
    if (r.step == t) rec = &r;
  if (rec == nullptr || !rec->forward_estimate)
    throw Error(ErrorCode::kNotRecorded, "no estimate snapshot recorded at step " + std::to_string(t));

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  char stem[32];
  auto dump = [&](const VideoLatent& x, const char* which) {
    std::snprintf(stem, sizeof stem, "mid_step%03d_%s", t, which);
    const std::filesystem::path lat = out_dir / (std::string(stem) + ".lat");
    write_latent(lat, x);
    write_pgm_frames(out_dir / stem, "frame", x);
    written.push_back(lat);
    written.push_back(out_dir / stem);
  };
  dump(*rec->forward_estimate, "forward");
  if (rec->backward_estimate) dump(*rec->backward_estimate, "backward");
  return written;
}

namespace {

std::string snapshot_name(int step, const char* which) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "step_%03d_%s.lat", step, which);
  return buf;
}

}  // namespace

void write_trace(const std::filesystem::path& dir, const std::vector<TraceRecord>& trace) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const TraceRecord& r : trace) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["sigma"] = r.sigma;
    j["phase"] = r.phase;
    j["discrepancy_loss"] = r.discrepancy_loss;
    j["denoiser_calls"] = r.denoiser_calls;
    j["end_conditioned_calls"] = r.end_conditioned_calls;
    if (r.forward_estimate) {
      std::filesystem::create_directories(dir / "snapshots");
      j["forward_snapshot"] = "snapshots/" + snapshot_name(r.step, "forward");
      write_latent(dir / "snapshots" / snapshot_name(r.step, "forward"), *r.forward_estimate);
    }
    if (r.backward_estimate) {
      std::filesystem::create_directories(dir / "snapshots");
      j["backward_snapshot"] = "snapshots/" + snapshot_name(r.step, "backward");
      write_latent(dir / "snapshots" / snapshot_name(r.step, "backward"), *r.backward_estimate);
    }
    records.push_back(std::move(j));
  }
  std::ofstream out(dir / "trace.json");
  require(static_cast<bool>(out), "cannot write trace to " + dir.string());
  out << records.dump(1) << '\n';
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& dir) {
  std::ifstream in(dir / "trace.json");
  require(static_cast<bool>(in), "no trace.json in " + dir.string(), ErrorCode::kNotRecorded);
  const nlohmann::json records = nlohmann::json::parse(in);
  std::vector<TraceRecord> trace;
  for (const auto& j : records) {
    TraceRecord r;
    r.step = j.at("step").get<int>();
    r.sigma = j.at("sigma").get<double>();
    r.phase = j.at("phase").get<std::string>();
    r.discrepancy_loss = j.at("discrepancy_loss").get<double>();
    r.denoiser_calls = j.at("denoiser_calls").get<int>();
    r.end_conditioned_calls = j.at("end_conditioned_calls").get<int>();
    if (j.contains("forward_snapshot")) r.forward_estimate = read_latent(dir / j["forward_snapshot"].get<std::string>());
    if (j.contains("backward_snapshot"))
      r.backward_estimate = read_latent(dir / j["backward_snapshot"].get<std::string>());
    trace.push_back(std::move(r));
  }
  return trace;
}

}  // namespace trslab
