#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "trslab/harness.hpp"

namespace {

using namespace trslab;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kInvalidInput:
      return 2;
    case ErrorCode::kBackendUnavailable:
      return 3;
    case ErrorCode::kNotRecorded:
      return 4;
    case ErrorCode::kDegenerateCondition:
      return 5;
  }
  return 1;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

ExperimentConfig load(const std::string& path, const Overrides& o) {
  ExperimentConfig c = load_experiment_config(path);
  if (o.seed) c.seeds = {*o.seed};
  if (o.out) {
    c.out_dir = *o.out;
  } else if (c.out_dir.empty()) {
    const char* env = std::getenv("TRSLAB_OUT");
    c.out_dir = env != nullptr && *env != '\0' ? env : "trslab-out";
  }
  if (o.jobs) c.jobs = *o.jobs;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-reversal inbetweening samplers with motion prior distillation"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;
  std::string run_dir;
  std::string dump_out;
  double at = 0.5;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "run this single seed");
    sub->add_option("--out", o.out, "output root (default $TRSLAB_OUT or ./trslab-out)");
    sub->add_option("--jobs", o.jobs, "concurrent runs")->check(CLI::PositiveNumber);
  };
  CLI::App* run = app.add_subcommand("run", "run every mode and seed at the base settings");
  add_overrides(run);
  CLI::App* sweep = app.add_subcommand("sweep", "run the sweep grid");
  add_overrides(sweep);
  CLI::App* bench = app.add_subcommand("bench-conflict", "MPD vs. baselines on the biased shift world");
  add_overrides(bench);
  CLI::App* dump = app.add_subcommand("dump-mid", "export the mid-sampling forward/backward estimates of a run");
  dump->add_option("run-dir", run_dir, "per-run directory holding trace/")->required()->check(CLI::ExistingDirectory);
  dump->add_option("--at", at, "fraction of T")->check(CLI::Range(0.0, 1.0));
  dump->add_option("--out", dump_out, "destination (default <run-dir>/mid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      const ExperimentReport r = run_experiment(load(config_path, o), {false});
      std::cout << r.to_text();
    } else if (sweep->parsed()) {
      const ExperimentConfig c = load(config_path, o);
      if (c.sweep.empty()) throw Error(ErrorCode::kUsage, "config has no sweep grid");
      std::cout << run_experiment(c, {true}).to_text();
    } else if (bench->parsed()) {
      const BenchmarkReport r = conflict_benchmark(load(config_path, o));
      for (const std::string& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << r.to_text();
    } else if (dump->parsed()) {
      const std::filesystem::path dir = run_dir;
      const auto trace = read_trace(dir / "trace");
      for (const auto& p : dump_mid_estimates(trace, at, dump_out.empty() ? dir / "mid" : std::filesystem::path(dump_out)))
        std::cout << p.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
