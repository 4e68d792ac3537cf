#pragma once

// Experiment configuration, seeded batch runs, sweeps and the conflict
// benchmark. A config is one JSON document; see README for the schema.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trslab/diagnostics.hpp"
#include "trslab/samplers.hpp"

namespace trslab {

struct GaussianWorldConfig {
  GaussianWorldSpec spec;
  Index frames = 25;
  Frame start;
  Frame end;
};

struct MotionWorldConfig {
  MotionWorldSpec spec;
  Eigen::Vector2d start{28.0, 16.0};
  Eigen::Vector2d end{4.0, 16.0};
};

using WorldConfig = std::variant<GaussianWorldConfig, MotionWorldConfig>;

/// Optional value lists for the ablation axes.
struct SweepGrid {
  std::vector<double> gamma;
  std::vector<int> k;
  std::vector<double> lambda;
  std::vector<double> alpha;

  bool empty() const { return gamma.empty() && k.empty() && lambda.empty() && alpha.empty(); }
  std::size_t cell_count() const;
};

struct BridgeEndpoint {
  std::string tcp;      // host:port
  std::string command;  // stdio subprocess
};

struct ExperimentConfig {
  WorldConfig world;
  /// Base sampler settings. MPD knobs absent from the file take the
  /// per-mode defaults.
  SamplerConfig sampler;
  std::vector<SamplerMode> modes;
  std::vector<std::uint64_t> seeds;
  SweepGrid sweep;
  std::filesystem::path out_dir;
  bool write_frames = true;
  bool write_trace = true;
  SnapshotPolicy snapshots;
  std::optional<BridgeEndpoint> bridge;
  int jobs = 1;

  /// Keys present under "sampler" in the source document; used to decide
  /// which MPD knobs fall back to per-mode defaults.
  std::vector<std::string> explicit_sampler_keys;

  void validate() const;
  InbetweenProblem problem() const;
  /// Sampler settings for one mode before sweep overrides.
  SamplerConfig sampler_for(SamplerMode mode) const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Builds the denoiser the config asks for: the bridge when configured,
/// else the in-process world denoiser.
std::unique_ptr<Denoiser> make_denoiser(const ExperimentConfig& config);

/// One grid point of the sweep.
struct GridPoint {
  std::optional<double> gamma;
  std::optional<int> k;
  std::optional<double> lambda;
  std::optional<double> alpha;

  /// Directory-safe label, "default" when no axis is swept.
  std::string label() const;
  void apply(SamplerConfig& config) const;
};

std::vector<GridPoint> expand_grid(const SweepGrid& grid);

struct RunRow {
  std::string mode;
  std::string grid;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

struct CellSummary {
  std::string mode;
  std::string grid;
  std::size_t runs = 0;
  std::map<std::string, std::pair<double, double>> metrics;  // mean, std
};

struct ExperimentReport {
  std::vector<RunRow> rows;
  std::vector<CellSummary> cells;

  std::string to_json() const;
  std::string to_text() const;
};

struct RunOptions {
  bool use_sweep = true;
};

/// Runs every (mode, grid point, seed), writes per-run artifacts under
/// <out>/<mode>/<grid>/<seed>/ and report.json / report.txt under <out>.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Metrics recorded for one finished run.
std::map<std::string, double> run_metrics(const ExperimentConfig& config, const SampleResult& result);

struct PairWinRates {
  std::string mpd_mode;
  std::string baseline_mode;
  std::size_t seeds = 0;
  double ghosting = 0.0;        // strictly lower ghosting_score
  double endpoint_mse = 0.0;    // strictly lower endpoint_mse_end
  double direction = 0.0;      // strictly higher direction_consistency
  /// No worse on direction_consistency and ghosting_score, strictly better on
  /// at least one.
  double conflict = 0.0;
};

struct BenchmarkReport {
  ExperimentReport runs;
  std::vector<PairWinRates> pairs;
  std::vector<std::string> warnings;

  std::string to_text() const;
  std::string to_json() const;
};

/// Runs parallel, sequential and both MPD modes over the config's seeds on
/// a motion world.
BenchmarkReport conflict_benchmark(const ExperimentConfig& config);

/// The desk-scale conflict world: 32x32, N=25, blob radius 4, bias (1, 0)
/// with strength 2, start (28,16), end (4,16) so the true motion opposes the bias, sigma_max 80.
ExperimentConfig conflict_benchmark_defaults();

}  // namespace trslab
