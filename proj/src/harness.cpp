#include "trslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "trslab/bridge.hpp"
#include "trslab/latent_io.hpp"

namespace trslab {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::kUsage, "config: " + msg); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) usage(where + " must be an object");
  for (const auto& item : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; });
    if (!ok) usage("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    usage(std::string("bad value for '") + key + "'");
  }
}

Frame frame_value(const json& j, Index size, const char* what) {
  if (j.is_number()) return Frame::Constant(size, j.get<double>());
  if (j.is_array()) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != size) usage(std::string(what) + " needs " + std::to_string(size) + " values");
    return Eigen::Map<const Frame>(v.data(), size);
  }
  usage(std::string(what) + " must be a number or a list");
}

Eigen::Vector2d vec2(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) usage(std::string(what) + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

FrameWeights weights_value(const json& j, const char* what) {
  if (j.is_number()) return FrameWeights(j.get<double>());
  if (j.is_array()) return FrameWeights(j.get<std::vector<double>>());
  usage(std::string(what) + " must be a number or a list");
}

WorldConfig parse_world(const json& j) {
  const std::string kind = get_or<std::string>(j, "kind", "motion");
  if (kind == "gaussian") {
    check_keys(j, "world", {"kind", "channels", "height", "width", "frames", "mu", "sigma_d", "start", "end"});
    GaussianWorldConfig g;
    g.spec.shape = {get_or<Index>(j, "channels", 1), get_or<Index>(j, "height", 4), get_or<Index>(j, "width", 4)};
    if (g.spec.shape.channels < 1 || g.spec.shape.height < 1 || g.spec.shape.width < 1) usage("world shape must be positive");
    const Index size = g.spec.shape.size();
    g.frames = get_or<Index>(j, "frames", 25);
    g.spec.sigma_d = get_or<double>(j, "sigma_d", 1.0);
    g.spec.mu = j.contains("mu") ? frame_value(j["mu"], size, "mu") : Frame::Zero(size);
    g.start = j.contains("start") ? frame_value(j["start"], size, "start") : g.spec.mu;
    g.end = j.contains("end") ? frame_value(j["end"], size, "end") : g.spec.mu;
    return g;
  }
  if (kind != "motion") usage("world.kind must be 'gaussian' or 'motion'");
  check_keys(j, "world", {"kind", "height", "width", "blob_sigma", "frames", "bias_velocity", "bias_strength",
                          "max_speed", "start", "end"});
  MotionWorldConfig m;
  m.spec.height = get_or<Index>(j, "height", m.spec.height);
  m.spec.width = get_or<Index>(j, "width", m.spec.width);
  m.spec.blob_sigma = get_or<double>(j, "blob_sigma", m.spec.blob_sigma);
  m.spec.frames = get_or<Index>(j, "frames", m.spec.frames);
  m.spec.bias_strength = get_or<double>(j, "bias_strength", m.spec.bias_strength);
  m.spec.max_speed = get_or<double>(j, "max_speed", m.spec.max_speed);
  if (j.contains("bias_velocity")) m.spec.bias_velocity = vec2(j["bias_velocity"], "bias_velocity");
  if (j.contains("start")) m.start = vec2(j["start"], "start");
  if (j.contains("end")) m.end = vec2(j["end"], "end");
  return m;
}

void parse_sampler(const json& j, ExperimentConfig& cfg) {
  check_keys(j, "sampler", {"mode", "steps", "sigma_min", "sigma_max", "rho", "guidance", "alpha", "alpha_ramp",
                            "lambda", "k", "gamma", "renoise", "residual_order"});
  SamplerConfig& s = cfg.sampler;
  for (const auto& item : j.items()) cfg.explicit_sampler_keys.push_back(item.key());
  if (j.contains("mode")) s.mode = parse_sampler_mode(j["mode"].get<std::string>());
  s.schedule.steps = get_or<int>(j, "steps", s.schedule.steps);
  s.schedule.sigma_min = get_or<double>(j, "sigma_min", s.schedule.sigma_min);
  s.schedule.sigma_max = get_or<double>(j, "sigma_max", s.schedule.sigma_max);
  s.schedule.rho = get_or<double>(j, "rho", s.schedule.rho);
  if (j.contains("guidance")) {
    const json& g = j["guidance"];
    if (g.is_object()) {
      check_keys(g, "sampler.guidance", {"ramp"});
      const auto r = g.at("ramp").get<std::vector<double>>();
      if (r.size() != 2) usage("guidance.ramp must be [first, last]");
      // Resolved against the frame count once the world is known.
      s.guidance = FrameWeights(std::vector<double>{r[0], r[1]});
      cfg.explicit_sampler_keys.push_back("guidance_ramp");
    } else {
      s.guidance = weights_value(g, "guidance");
    }
  }
  if (j.contains("alpha")) s.alpha = weights_value(j["alpha"], "alpha");
  s.alpha_ramp = get_or<bool>(j, "alpha_ramp", s.alpha_ramp);
  s.lambda = get_or<double>(j, "lambda", s.lambda);
  s.k = get_or<int>(j, "k", s.k);
  s.gamma = get_or<double>(j, "gamma", s.gamma);
  s.renoise = get_or<bool>(j, "renoise", s.renoise);
  if (j.contains("residual_order")) s.residual_order = parse_residual_order(j["residual_order"].get<std::string>());
}

bool has_key(const std::vector<std::string>& keys, const char* key) {
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

Index world_frames(const WorldConfig& w) {
  return std::visit(
      [](const auto& c) -> Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, GaussianWorldConfig>)
          return c.frames;
        else
          return c.spec.frames;
      },
      w);
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

}  // namespace

std::size_t SweepGrid::cell_count() const {
  auto len = [](std::size_t n) { return n == 0 ? std::size_t{1} : n; };
  return len(gamma.size()) * len(k.size()) * len(lambda.size()) * len(alpha.size());
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    usage(std::string("not valid JSON: ") + e.what());
  }
  check_keys(doc, "config", {"world", "sampler", "modes", "seeds", "sweep", "output", "snapshots", "bridge", "jobs"});

  ExperimentConfig cfg;
  try {
    cfg.world = parse_world(doc.value("world", json::object()));
    if (doc.contains("sampler")) parse_sampler(doc["sampler"], cfg);
    if (has_key(cfg.explicit_sampler_keys, "guidance_ramp")) {
      const auto r = cfg.sampler.guidance->values();
      cfg.sampler.guidance = FrameWeights::ramp(r[0], r[1], world_frames(cfg.world));
    }

    if (doc.contains("modes")) {
      for (const auto& m : doc["modes"]) cfg.modes.push_back(parse_sampler_mode(m.get<std::string>()));
      if (cfg.modes.empty()) usage("modes must not be empty");
    } else {
      cfg.modes.push_back(cfg.sampler.mode);
    }

    if (!doc.contains("seeds")) {
      cfg.seeds.push_back(0);
    } else if (doc["seeds"].is_array()) {
      cfg.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    } else {
      const json& s = doc["seeds"];
      check_keys(s, "seeds", {"from", "count"});
      const auto from = get_or<std::uint64_t>(s, "from", 0);
      const auto count = get_or<std::uint64_t>(s, "count", 1);
      for (std::uint64_t i = 0; i < count; ++i) cfg.seeds.push_back(from + i);
    }

    if (doc.contains("sweep")) {
      const json& s = doc["sweep"];
      check_keys(s, "sweep", {"gamma", "k", "lambda", "alpha"});
      auto axis = [&](const char* key, auto& out) {
        if (!s.contains(key)) return;
        out = s[key].get<std::decay_t<decltype(out)>>();
        if (out.empty()) usage(std::string("sweep.") + key + " must not be empty");
      };
      axis("gamma", cfg.sweep.gamma);
      axis("k", cfg.sweep.k);
      axis("lambda", cfg.sweep.lambda);
      axis("alpha", cfg.sweep.alpha);
    }

    if (doc.contains("output")) {
      const json& o = doc["output"];
      check_keys(o, "output", {"dir", "frames", "trace"});
      cfg.out_dir = get_or<std::string>(o, "dir", "");
      cfg.write_frames = get_or<bool>(o, "frames", true);
      cfg.write_trace = get_or<bool>(o, "trace", true);
    }

    if (doc.contains("snapshots")) {
      const json& s = doc["snapshots"];
      if (s.is_string() && s.get<std::string>() == "all") {
        cfg.snapshots = SnapshotPolicy::all();
      } else if (s.is_string() && s.get<std::string>() == "none") {
        cfg.snapshots = {};
      } else {
        check_keys(s, "snapshots", {"from", "to"});
        cfg.snapshots = SnapshotPolicy::range(s.at("from").get<int>(), s.at("to").get<int>());
      }
    }

    if (doc.contains("bridge")) {
      const json& b = doc["bridge"];
      check_keys(b, "bridge", {"tcp", "command"});
      BridgeEndpoint ep{get_or<std::string>(b, "tcp", ""), get_or<std::string>(b, "command", "")};
      if (ep.tcp.empty() == ep.command.empty()) usage("bridge needs exactly one of 'tcp' or 'command'");
      cfg.bridge = ep;
    }

    cfg.jobs = get_or<int>(doc, "jobs", 1);
  } catch (const json::exception& e) {
    usage(e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUsage, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

void ExperimentConfig::validate() const {
  try {
    if (seeds.empty()) usage("at least one seed is required");
    if (modes.empty()) usage("at least one mode is required");
    if (jobs < 1) usage("jobs must be >= 1");
    std::visit(
        [](const auto& w) {
          if constexpr (std::is_same_v<std::decay_t<decltype(w)>, GaussianWorldConfig>) {
            if (!(w.spec.sigma_d > 0.0)) usage("sigma_d must be positive");
            if (w.frames < 2) usage("frames must be >= 2");
          } else {
            w.spec.validate();
          }
        },
        world);
    const Index n = world_frames(world);
    for (SamplerMode m : modes) {
      SamplerConfig c = sampler_for(m);
      for (const GridPoint& g : expand_grid(sweep)) {
        SamplerConfig cell = c;
        g.apply(cell);
        cell.validate(n);
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUsage) throw;
    throw Error(ErrorCode::kUsage, std::string("config: ") + e.what());
  }
}

InbetweenProblem ExperimentConfig::problem() const {
  return std::visit(
      [](const auto& w) -> InbetweenProblem {
        if constexpr (std::is_same_v<std::decay_t<decltype(w)>, GaussianWorldConfig>) {
          return {w.spec.shape, w.frames, {w.start, FrameRole::kStart}, {w.end, FrameRole::kEnd}};
        } else {
          return {w.spec.shape(), w.spec.frames, {render_blob(w.start, w.spec), FrameRole::kStart},
                  {render_blob(w.end, w.spec), FrameRole::kEnd}};
        }
      },
      world);
}

SamplerConfig ExperimentConfig::sampler_for(SamplerMode mode) const {
  SamplerConfig c = sampler;
  c.mode = mode;
  const SamplerConfig d = SamplerConfig::defaults(mode);
  if (!has_key(explicit_sampler_keys, "gamma")) c.gamma = d.gamma;
  if (!has_key(explicit_sampler_keys, "k")) c.k = d.k;
  if (!has_key(explicit_sampler_keys, "lambda")) c.lambda = d.lambda;
  return c;
}

std::unique_ptr<Denoiser> make_denoiser(const ExperimentConfig& config) {
  if (config.bridge) {
    auto transport = config.bridge->tcp.empty() ? make_stdio_transport(config.bridge->command)
                                                : make_tcp_transport(config.bridge->tcp);
    auto bridge = std::make_unique<BridgeDenoiser>(std::move(transport));
    bridge->ping();
    return bridge;
  }
  return std::visit(
      [](const auto& w) -> std::unique_ptr<Denoiser> {
        if constexpr (std::is_same_v<std::decay_t<decltype(w)>, GaussianWorldConfig>)
          return std::make_unique<GaussianDenoiser>(w.spec);
        else
          return std::make_unique<ShiftWorldDenoiser>(w.spec);
      },
      config.world);
}

std::string GridPoint::label() const {
  std::string out;
  auto add = [&](const char* name, const std::string& v) { out += (out.empty() ? "" : "_") + std::string(name) + v; };
  if (gamma) add("gamma", format_number(*gamma));
  if (k) add("k", std::to_string(*k));
  if (lambda) add("lambda", format_number(*lambda));
  if (alpha) add("alpha", format_number(*alpha));
  return out.empty() ? "default" : out;
}

void GridPoint::apply(SamplerConfig& config) const {
  if (gamma) config.gamma = *gamma;
  if (k) config.k = *k;
  if (lambda) config.lambda = *lambda;
  if (alpha) {
    config.alpha = *alpha;
    config.alpha_ramp = false;
  }
}

std::vector<GridPoint> expand_grid(const SweepGrid& grid) {
  std::vector<GridPoint> out{GridPoint{}};
  auto expand = [&out](const auto& values, auto member) {
    if (values.empty()) return;
    std::vector<GridPoint> next;
    for (const GridPoint& g : out) {
      for (const auto& v : values) {
        GridPoint h = g;
        h.*member = v;
        next.push_back(h);
      }
    }
    out = std::move(next);
  };
  expand(grid.gamma, &GridPoint::gamma);
  expand(grid.k, &GridPoint::k);
  expand(grid.lambda, &GridPoint::lambda);
  expand(grid.alpha, &GridPoint::alpha);
  return out;
}

std::map<std::string, double> run_metrics(const ExperimentConfig& config, const SampleResult& result) {
  std::map<std::string, double> m;
  const VideoLatent& x = result.video;
  const InbetweenProblem p = config.problem();
  if (const auto* w = std::get_if<MotionWorldConfig>(&config.world)) {
    const QualityReport q = score_video(x, w->spec, p.start.latent, p.end.latent);
    m["endpoint_mse_start"] = q.endpoint_mse_start;
    m["endpoint_mse_end"] = q.endpoint_mse_end;
    m["smoothness"] = q.smoothness;
    m["direction_consistency"] = q.direction_consistency;
    m["ghosting_score"] = q.ghosting_score;
    m["degenerate"] = q.degenerate ? 1.0 : 0.0;
  } else {
    const double elements = static_cast<double>(x.frame_size());
    const double mean = x.frames().mean();
    m["mean"] = mean;
    m["variance"] = (x.frames().array() - mean).square().mean();
    m["endpoint_mse_start"] = (x.frame(0) - p.start.latent).squaredNorm() / elements;
    m["endpoint_mse_end"] = (x.frame(x.frame_count() - 1) - p.end.latent).squaredNorm() / elements;
  }
  double loss = 0.0, calls = 0.0, end_calls = 0.0;
  for (const TraceRecord& r : result.trace) {
    loss += r.discrepancy_loss;
    calls += r.denoiser_calls;
    end_calls += r.end_conditioned_calls;
  }
  m["mean_discrepancy_loss"] = result.trace.empty() ? 0.0 : loss / static_cast<double>(result.trace.size());
  m["denoiser_calls"] = calls;
  m["end_conditioned_calls"] = end_calls;
  return m;
}

namespace {

void write_row(const std::filesystem::path& path, const RunRow& row) {
  ordered j;
  j["mode"] = row.mode;
  j["grid"] = row.grid;
  j["seed"] = row.seed;
  j["metrics"] = row.metrics;
  std::ofstream out(path);
  out << j.dump(1) << '\n';
}

std::vector<CellSummary> summarize(const std::vector<RunRow>& rows) {
  std::vector<CellSummary> cells;
  for (const RunRow& row : rows) {
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const CellSummary& c) { return c.mode == row.mode && c.grid == row.grid; });
    if (it == cells.end()) {
      cells.push_back({row.mode, row.grid, 0, {}});
      it = std::prev(cells.end());
    }
    ++it->runs;
  }
  for (CellSummary& cell : cells) {
    std::map<std::string, std::vector<double>> values;
    for (const RunRow& row : rows)
      if (row.mode == cell.mode && row.grid == cell.grid)
        for (const auto& [k, v] : row.metrics) values[k].push_back(v);
    for (const auto& [k, vs] : values) {
      double mean = 0.0;
      for (double v : vs) mean += v;
      mean /= static_cast<double>(vs.size());
      double var = 0.0;
      for (double v : vs) var += (v - mean) * (v - mean);
      const double sd = vs.size() > 1 ? std::sqrt(var / static_cast<double>(vs.size() - 1)) : 0.0;
      cell.metrics[k] = {mean, sd};
    }
  }
  return cells;
}

ordered report_json(const ExperimentReport& r) {
  ordered j;
  j["cells"] = ordered::array();
  for (const CellSummary& c : r.cells) {
    ordered cj;
    cj["mode"] = c.mode;
    cj["grid"] = c.grid;
    cj["runs"] = c.runs;
    for (const auto& [k, ms] : c.metrics) cj["metrics"][k] = {{"mean", ms.first}, {"std", ms.second}};
    j["cells"].push_back(cj);
  }
  j["rows"] = ordered::array();
  for (const RunRow& row : r.rows) {
    ordered rj;
    rj["mode"] = row.mode;
    rj["grid"] = row.grid;
    rj["seed"] = row.seed;
    rj["metrics"] = row.metrics;
    j["rows"].push_back(rj);
  }
  return j;
}

}  // namespace

std::string ExperimentReport::to_json() const { return report_json(*this).dump(1) + "\n"; }

std::string ExperimentReport::to_text() const {
  std::ostringstream out;
  out << std::setprecision(6);
  for (const CellSummary& c : cells) {
    out << "[" << c.mode << " / " << c.grid << "] runs=" << c.runs << '\n';
    for (const auto& [k, ms] : c.metrics) out << "  " << k << " = " << ms.first << " +- " << ms.second << '\n';
  }
  return out.str();
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const std::vector<GridPoint> grid = options.use_sweep ? expand_grid(config.sweep) : std::vector<GridPoint>{{}};
  struct Task {
    SamplerMode mode;
    GridPoint point;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (SamplerMode m : config.modes)
    for (const GridPoint& g : grid)
      for (std::uint64_t s : config.seeds) tasks.push_back({m, g, s});

  const std::unique_ptr<Denoiser> denoiser = make_denoiser(config);
  const InbetweenProblem problem = config.problem();
  std::vector<RunRow> rows(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        const Task& task = tasks[i];
        SamplerConfig c = config.sampler_for(task.mode);
        task.point.apply(c);
        c.seed = task.seed;
        const SampleResult result = run_sampler(*denoiser, problem, c, config.snapshots);
        RunRow row{to_string(task.mode), task.point.label(), task.seed, run_metrics(config, result)};
        if (!config.out_dir.empty()) {
          const auto dir = config.out_dir / row.mode / row.grid / std::to_string(task.seed);
          std::filesystem::create_directories(dir);
          write_latent(dir / "final.lat", result.video);
          if (config.write_frames) write_pgm_frames(dir / "frames", "frame", result.video);
          if (config.write_trace) write_trace(dir / "trace", result.trace);
          write_row(dir / "row.json", row);
        }
        rows[i] = std::move(row);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::min<int>(config.jobs, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentReport report{std::move(rows), {}};
  report.cells = summarize(report.rows);
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    std::ofstream(config.out_dir / "report.json") << report.to_json();
    std::ofstream(config.out_dir / "report.txt") << report.to_text();
  }
  return report;
}

BenchmarkReport conflict_benchmark(const ExperimentConfig& config) {
  const auto* world = std::get_if<MotionWorldConfig>(&config.world);
  if (world == nullptr) throw Error(ErrorCode::kUsage, "bench-conflict needs a motion world");

  BenchmarkReport bench;
  if (world->spec.bias_strength == 0.0)
    bench.warnings.push_back("bias_strength is 0: no forward-generation bias, the benchmark is degenerate");

  ExperimentConfig c = config;
  c.modes = {SamplerMode::kParallel, SamplerMode::kSequential, SamplerMode::kMpdParallel, SamplerMode::kMpdSequential};
  c.sweep = {};
  bench.runs = run_experiment(c, {false});

  auto metric = [&](const std::string& mode, std::uint64_t seed, const char* key) {
    for (const RunRow& r : bench.runs.rows)
      if (r.mode == mode && r.seed == seed) return r.metrics.at(key);
    throw Error(ErrorCode::kInvalidInput, "missing benchmark row");
  };
  for (auto [mpd, base] : {std::pair{SamplerMode::kMpdParallel, SamplerMode::kParallel},
                           std::pair{SamplerMode::kMpdSequential, SamplerMode::kSequential}}) {
    PairWinRates w{to_string(mpd), to_string(base), c.seeds.size()};
    for (std::uint64_t s : c.seeds) {
      const double dg = metric(w.mpd_mode, s, "ghosting_score") - metric(w.baseline_mode, s, "ghosting_score");
      const double de = metric(w.mpd_mode, s, "endpoint_mse_end") - metric(w.baseline_mode, s, "endpoint_mse_end");
      const double dd =
          metric(w.mpd_mode, s, "direction_consistency") - metric(w.baseline_mode, s, "direction_consistency");
      w.ghosting += dg < 0.0;
      w.endpoint_mse += de < 0.0;
      w.direction += dd > 0.0;
      w.conflict += (dd >= 0.0 && dg <= 0.0 && (dd > 0.0 || dg < 0.0));
    }
    const double n = static_cast<double>(w.seeds);
    w.ghosting /= n;
    w.endpoint_mse /= n;
    w.direction /= n;
    w.conflict /= n;
    bench.pairs.push_back(w);
  }

  if (!c.out_dir.empty()) {
    std::ofstream(c.out_dir / "benchmark.txt") << bench.to_text();
    std::ofstream(c.out_dir / "benchmark.json") << bench.to_json();
  }
  return bench;
}

std::string BenchmarkReport::to_text() const {
  std::ostringstream out;
  out << std::setprecision(4) << std::fixed;
  for (const std::string& w : warnings) out << "warning: " << w << '\n';
  out << std::left << std::setw(16) << "mode" << std::right << std::setw(12) << "direction" << std::setw(12)
      << "ghosting" << std::setw(12) << "mse_end" << std::setw(12) << "smoothness" << '\n';
  for (const CellSummary& c : runs.cells) {
    out << std::left << std::setw(16) << c.mode << std::right;
    for (const char* k : {"direction_consistency", "ghosting_score", "endpoint_mse_end", "smoothness"})
      out << std::setw(12) << c.metrics.at(k).first;
    out << '\n';
  }
  for (const PairWinRates& w : pairs) {
    out << w.mpd_mode << " vs " << w.baseline_mode << " over " << w.seeds << " seeds: conflict-win " << w.conflict
        << ", direction " << w.direction << ", ghosting " << w.ghosting << ", mse_end " << w.endpoint_mse << '\n';
  }
  return out.str();
}

std::string BenchmarkReport::to_json() const {
  ordered j = report_json(runs);
  j["warnings"] = warnings;
  j["win_rates"] = ordered::array();
  for (const PairWinRates& w : pairs) {
    ordered pj;
    pj["mpd_mode"] = w.mpd_mode;
    pj["baseline_mode"] = w.baseline_mode;
    pj["seeds"] = w.seeds;
    pj["conflict"] = w.conflict;
    pj["direction_consistency"] = w.direction;
    pj["ghosting_score"] = w.ghosting;
    pj["endpoint_mse_end"] = w.endpoint_mse;
    j["win_rates"].push_back(pj);
  }
  return j.dump(1) + "\n";
}

ExperimentConfig conflict_benchmark_defaults() {
  ExperimentConfig c;
  MotionWorldConfig w;
  w.spec.blob_sigma = 4.0;
  w.spec.bias_velocity = {1.0, 0.0};
  w.spec.bias_strength = 2.0;
  w.start = {28.0, 16.0};
  w.end = {4.0, 16.0};
  c.world = w;
  c.sampler.schedule.sigma_max = 80.0;
  c.modes = {SamplerMode::kParallel, SamplerMode::kSequential, SamplerMode::kMpdParallel, SamplerMode::kMpdSequential};
  for (std::uint64_t s = 0; s < 50; ++s) c.seeds.push_back(s);
  c.write_frames = false;
  c.write_trace = false;
  return c;
}

}  // namespace trslab
