#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trslab/denoiser.hpp"
#include "trslab/tensor.hpp"
#include "trslab/trace.hpp"

namespace trslab {

/// sigma^-2 * |a - b|^2 summed over every element.
double path_discrepancy_loss(const VideoLatent& x0_a, const VideoLatent& x0_b_flippedback, double sigma);

/// Desk-scale quality metrics for shift-world videos. All fields >= 0.
struct QualityReport {
  double endpoint_mse_start = 0.0;
  double endpoint_mse_end = 0.0;
  /// Mean squared second temporal difference of the tracked blob position.
  double smoothness = 0.0;
  /// Fraction of tracked transitions moving along the start -> end displacement.
  double direction_consistency = 0.0;
  /// Mean over frames of max(local maxima above half the video peak - 1, 0).
  double ghosting_score = 0.0;
  bool degenerate = false;

  /// Flat `key=value` lines in a fixed order.
  std::string to_key_value() const;
};

/// Per-frame blob position: centroid of the pixels at or above half the
/// frame peak. A frame whose peak is below a quarter of the video peak has
/// no detectable blob.
struct BlobTrack {
  std::vector<Eigen::Vector2d> positions;
  std::vector<bool> present;
};

BlobTrack track_blob(const VideoLatent& video, const MotionWorldSpec& world);

/// Strict 8-neighbourhood maxima of channel 0 of frame i above `threshold`.
int count_local_maxima(const VideoLatent& video, Index frame, const MotionWorldSpec& world, double threshold);

QualityReport score_video(const VideoLatent& video, const MotionWorldSpec& world, const Frame& z_start,
                          const Frame& z_end);

/// Step index for a fraction of T, rounding halves up.
int mid_step_for(double at_fraction, int steps);

/// Writes the forward and flipped-back backward estimates recorded at step
/// round(at_fraction * T) as latent dumps plus PGM frames. Returns the
/// files written. Throws kNotRecorded when the step carries no snapshot.
std::vector<std::filesystem::path> dump_mid_estimates(const std::vector<TraceRecord>& trace, double at_fraction,
                                                      const std::filesystem::path& out_dir);

/// trace.json plus snapshots/step_NNN_{forward,backward}.lat.
void write_trace(const std::filesystem::path& dir, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace(const std::filesystem::path& dir);

}  // namespace trslab
