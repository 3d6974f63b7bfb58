#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nowcast/error.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/io.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/priors.hpp"
#include "nowcast/selection.hpp"
#include "nowcast/simulator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nowcast;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kConfigEnv = "NOWCAST_CONFIG";

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  std::optional<int> particles;
  std::optional<double> threshold;
  std::string out;
  std::string areas;
  int jobs = 0;
  std::vector<std::string> inputs;
  std::string priors_path;
  std::string adjacency_path;
  std::string grid;
  std::string as_of;
  std::string first;
  std::string last;
  bool plot = false;
};

// Per-command bookkeeping that ends up in manifest.json or errors.json.
class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)) {
    std::string path = opt.config_path;
    if (path.empty()) {
      if (const char* env = std::getenv(kConfigEnv)) path = env;
    }
    if (!path.empty()) {
      config_ = io::KeyValueConfig::load(path);
      inputs_.push_back(path);
    }
    if (opt.seed) config_.set("seed", std::to_string(*opt.seed));
    if (opt.sigma) config_.set("sigma", io::format_real(*opt.sigma));
    if (opt.particles) config_.set("n_particles", std::to_string(*opt.particles));
    if (opt.threshold) config_.set("alert.threshold", io::format_real(*opt.threshold));
    if (opt.out.empty()) throw std::invalid_argument("--out is required");
    out_ = opt.out;
    fs::create_directories(out_);
  }

  const io::KeyValueConfig& config() const { return config_; }
  const fs::path& out() const { return out_; }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(config_.get_int("seed", 1)); }

  RunConfig run_config() const {
    RunConfig c;
    c.sigma = config_.get_real("sigma", c.sigma);
    c.n_particles = static_cast<int>(config_.get_int("n_particles", c.n_particles));
    c.m_smooth = static_cast<int>(config_.get_int("m_smooth", c.n_particles));
    c.weekend_effects = config_.get_bool("weekend_effects", c.weekend_effects);
    c.weekend_a = config_.get_real("weekend_a", c.weekend_a);
    c.weekend_b = config_.get_real("weekend_b", c.weekend_b);
    c.lambda0_shape = config_.get_real("lambda0_shape", c.lambda0_shape);
    c.lambda0_rate = config_.get_real("lambda0_rate", c.lambda0_rate);
    c.burn_in = static_cast<int>(config_.get_int("burn_in", c.burn_in));
    c.thin = static_cast<int>(config_.get_int("thin", c.thin));
    c.proposal_scale = config_.get_real("proposal_scale", c.proposal_scale);
    c.z_proposal_scale = config_.get_real("z_proposal_scale", c.z_proposal_scale);
    c.independence_moves = config_.get_bool("independence_moves", c.independence_moves);
    c.evidence_draws = static_cast<int>(config_.get_int("evidence_draws", c.evidence_draws));
    c.seed = seed();
    c.validate();
    return c;
  }

  // Each area gets its own stream, so results do not depend on area order.
  RunConfig area_config(const std::string& area) const {
    RunConfig c = run_config();
    c.seed = mix_seed(c.seed, io::fnv1a64(area));
    return c;
  }

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  void error(const std::string& area, const std::string& kind, const std::string& message) {
    errors_.push_back({{"area", area}, {"kind", kind}, {"message", message}});
  }
  void set_sigma(double s) { sigma_ = s; }
  void set_as_of(Date d) { as_of_ = d; }

  void write(const std::string& name, const std::string& content) {
    io::write_file_atomic(out_ / name, content);
    outputs_.push_back({{"path", name}, {"fnv1a", io::hex64(io::fnv1a64(content))}});
  }

  int finish() {
    json m;
    m["command"] = command_;
    m["version"] = kVersion;
    m["config_hash"] = io::hex64(io::fnv1a64(command_ + "\n" + config_.canonical()));
    json cfg = json::object();
    for (const auto& [k, v] : config_.values()) cfg[k] = v;
    m["config"] = cfg;
    m["seed"] = seed();
    if (sigma_) m["sigma"] = *sigma_;
    else m["sigma"] = nullptr;
    m["as_of"] = as_of_ ? json(format_date(*as_of_)) : json(nullptr);
    json ins = json::array();
    for (const auto& p : inputs_) {
      std::string hash = fs::is_regular_file(p) ? io::hex64(io::fnv1a64(io::read_file(p))) : "";
      ins.push_back({{"path", p}, {"fnv1a", hash}});
    }
    m["inputs"] = ins;
    m["outputs"] = outputs_;
    m["warnings"] = warnings_;
    io::write_file_atomic(out_ / "manifest.json", m.dump(2) + "\n");
    for (const auto& w : warnings_) std::cerr << "warning: " << w << '\n';
    if (errors_.empty()) {
      std::error_code ec;
      fs::remove(out_ / "errors.json", ec);
      return 0;
    }
    json e;
    e["command"] = command_;
    e["errors"] = errors_;
    io::write_file_atomic(out_ / "errors.json", e.dump(2) + "\n");
    for (const auto& err : errors_) {
      std::cerr << "error: " << err["area"].get<std::string>() << ": " << err["message"].get<std::string>() << '\n';
    }
    return 1;
  }

 private:
  std::string command_;
  io::KeyValueConfig config_;
  fs::path out_;
  std::vector<std::string> inputs_;
  std::vector<std::string> warnings_;
  json errors_ = json::array();
  json outputs_ = json::array();
  std::optional<double> sigma_;
  std::optional<Date> as_of_;
};

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const DataError*>(&e)) return "data_error";
  if (dynamic_cast<const InsufficientData*>(&e)) return "insufficient_data";
  if (dynamic_cast<const Unavailable*>(&e)) return "unavailable";
  if (dynamic_cast<const InfeasibleObservation*>(&e)) return "infeasible_observation";
  if (dynamic_cast<const DegenerateState*>(&e)) return "degenerate_state";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  return "error";
}

// Expands directories into their .csv files starting with `prefix`, sorted by name.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs, const std::string& prefix = "") {
  std::vector<fs::path> out;
  for (const auto& s : inputs) {
    fs::path p(s);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && e.path().extension() == ".csv" && name.rfind(prefix, 0) == 0) {
          found.push_back(e.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw DataError("input not found: " + s);
    }
  }
  return out;
}

std::set<std::string> area_filter(const std::string& list) {
  std::set<std::string> out;
  for (auto& a : io::split_csv(list)) {
    if (!a.empty()) out.insert(a);
  }
  return out;
}

std::vector<ReportTriangle> load_triangles(Run& run, const Options& opt) {
  auto files = expand_inputs(opt.inputs, "triangle");
  std::vector<ReportTriangle> out;
  for (const auto& f : files) {
    run.input(f);
    std::ifstream in(f);
    for (auto& t : read_triangles_csv(in)) out.push_back(std::move(t));
  }
  if (out.empty()) throw InsufficientData("no triangles in the inputs");
  auto keep = area_filter(opt.areas);
  if (!keep.empty()) {
    std::erase_if(out, [&](const ReportTriangle& t) { return keep.count(t.area_id) == 0; });
    if (out.empty()) throw InsufficientData("no triangle matches --areas");
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.area_id < b.area_id; });
  Date latest = out.front().as_of;
  for (const auto& t : out) latest = std::max(latest, t.as_of);
  run.set_as_of(latest);
  return out;
}

LagPriorTable load_priors(Run& run, const Options& opt) {
  if (opt.priors_path.empty()) throw std::invalid_argument("--priors is required");
  run.input(opt.priors_path);
  std::ifstream in(opt.priors_path);
  if (!in) throw DataError("cannot open prior table " + opt.priors_path);
  return read_prior_table_csv(in);
}

PriorConfig prior_config(const io::KeyValueConfig& c) {
  PriorConfig p;
  p.window_days = static_cast<int>(c.get_int("priors.window_days", p.window_days));
  p.max_lag = static_cast<int>(c.get_int("priors.max_lag", p.max_lag));
  p.hops = static_cast<int>(c.get_int("priors.hops", p.hops));
  p.epsilon = c.get_real("priors.epsilon", p.epsilon);
  p.fallback.alpha = c.get_real("priors.fallback_alpha", p.fallback.alpha);
  p.fallback.beta = c.get_real("priors.fallback_beta", p.fallback.beta);
  return p;
}

std::optional<Date> option_date(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_date(text);
}

// Runs fn(i) for i in [0, n) on a bounded pool. Each task writes only its own slot.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Result slot of a per-area task.
template <class T>
struct AreaOutcome {
  std::optional<T> value;
  std::string kind;
  std::string message;
  bool warning_only = false;
};

template <class T, class Fn>
std::vector<AreaOutcome<T>> for_each_area(const std::vector<ReportTriangle>& triangles, int jobs, Fn&& fn) {
  std::vector<AreaOutcome<T>> out(triangles.size());
  parallel_for(triangles.size(), jobs, [&](std::size_t i) {
    try {
      out[i].value = fn(triangles[i]);
    } catch (const Unavailable& e) {
      out[i].kind = error_kind(e);
      out[i].message = e.what();
      out[i].warning_only = true;
    } catch (const std::exception& e) {
      out[i].kind = error_kind(e);
      out[i].message = e.what();
    }
  });
  return out;
}

// Records skipped areas; missing priors are warnings, everything else an error.
template <class T>
void report_outcomes(Run& run, const std::vector<ReportTriangle>& triangles, const std::vector<AreaOutcome<T>>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].value) continue;
    if (out[i].warning_only) run.warn(triangles[i].area_id + " skipped: " + out[i].message);
    else run.error(triangles[i].area_id, out[i].kind, out[i].message);
  }
}

NowcastOptions nowcast_options(const io::KeyValueConfig& c) {
  NowcastOptions o;
  o.window_days = static_cast<int>(c.get_int("nowcast.window_days", o.window_days));
  o.include_report_day = c.get_bool("nowcast.include_report_day", o.include_report_day);
  return o;
}

ReportTriangle as_of_view(const ReportTriangle& t, const std::optional<Date>& as_of) {
  return as_of ? truncate_triangle(t, *as_of) : t;
}

std::string slug(const std::string& area) {
  std::string s = area;
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

// Commands.

int cmd_ingest(const Options& opt) {
  Run run("ingest", opt);
  auto files = expand_inputs(opt.inputs);
  if (files.empty()) throw InsufficientData("no snapshot files in the inputs");
  double max_bad = run.config().get_real("ingest.max_malformed_fraction", 0.01);
  std::vector<ReportSnapshot> all;
  for (const auto& f : files) {
    run.input(f);
    std::ifstream in(f);
    auto r = read_snapshots_csv(in, f.string(), max_bad);
    for (auto& w : r.warnings) run.warn(std::move(w));
    merge_snapshots(all, std::move(r.snapshots));
  }
  auto areas = snapshot_areas(all);
  if (areas.empty()) throw InsufficientData("the inputs contain no snapshot rows");
  auto keep = area_filter(opt.areas);
  ConvergenceRule rule;
  rule.converge_lag = static_cast<int>(run.config().get_int("ingest.converge_lag", rule.converge_lag));
  rule.stable_reports = static_cast<int>(run.config().get_int("ingest.stable_reports", rule.stable_reports));
  rule.stable_min_lag = static_cast<int>(run.config().get_int("ingest.stable_min_lag", rule.stable_min_lag));
  for (const auto& area : areas) {
    if (!keep.empty() && keep.count(area) == 0) continue;
    auto tri = mark_convergence(build_triangle(all, area), rule);
    std::ostringstream os;
    write_triangle_csv(os, tri);
    run.write("triangle_" + slug(area) + ".csv", os.str());
    run.set_as_of(tri.as_of);
  }
  return run.finish();
}

int cmd_priors(const Options& opt) {
  Run run("priors", opt);
  auto triangles = load_triangles(run, opt);
  std::optional<AdjacencyGraph> graph;
  if (!opt.adjacency_path.empty()) {
    run.input(opt.adjacency_path);
    std::ifstream in(opt.adjacency_path);
    if (!in) throw DataError("cannot open adjacency file " + opt.adjacency_path);
    graph = read_adjacency_csv(in);
  }
  auto as_of = option_date(opt.as_of);
  if (as_of) {
    for (auto& t : triangles) t = truncate_triangle(t, *as_of);
    run.set_as_of(*as_of);
  }
  auto table = build_prior_table(triangles, graph ? &*graph : nullptr, prior_config(run.config()));
  std::ostringstream os;
  write_prior_table_csv(os, table);
  run.write("priors.csv", os.str());
  return run.finish();
}

int cmd_nowcast(const Options& opt) {
  Run run("nowcast", opt);
  auto triangles = load_triangles(run, opt);
  auto priors = load_priors(run, opt);
  auto as_of = option_date(opt.as_of);
  if (as_of) run.set_as_of(*as_of);
  run.set_sigma(run.run_config().sigma);
  const auto options = nowcast_options(run.config());

  auto results = for_each_area<NowcastResult>(triangles, opt.jobs, [&](const ReportTriangle& t) {
    return run_nowcast(as_of_view(t, as_of), priors, run.area_config(t.area_id), options);
  });
  report_outcomes(run, triangles, results);

  KalmanParams kalman;
  kalman.mu = run.config().get_real("baselines.kalman_mu", std::numeric_limits<double>::quiet_NaN());
  kalman.sigma2 = run.config().get_real("baselines.kalman_sigma2", 100.0);
  kalman.sigma_y2 = run.config().get_real("baselines.kalman_sigma_y2", 100.0);
  WindowForm form = run.config().get_string("baselines.window_form", "literal") == "seven_day" ? WindowForm::kSevenDay
                                                                                                : WindowForm::kLiteral;

  std::vector<NowcastResult> done;
  std::vector<BaselineRow> baselines;
  json doc;
  doc["manifest"] = "manifest.json";
  json areas = json::object();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].value) continue;
    const auto& r = *results[i].value;
    json a = run_metadata_json(r);
    const auto& last = r.counts.back();
    a["now_cast"] = {{"date", format_date(r.dates.back())},
                     {"x_mean", last.mean()},
                     {"x_q05", last.quantile(0.05)},
                     {"x_q50", last.quantile(0.5)},
                     {"x_q95", last.quantile(0.95)}};
    a["log_evidence"] = r.forward.log_evidence();
    a["count_posteriors"] = count_posteriors_json(r);
    areas[r.area_id] = std::move(a);
    auto rows = baseline_rows(r, kalman, form);
    baselines.insert(baselines.end(), rows.begin(), rows.end());
    if (opt.plot) run.write("nowcast_" + slug(r.area_id) + ".svg", nowcast_svg(r));
    done.push_back(r);
  }
  doc["areas"] = std::move(areas);
  std::ostringstream sm, bl;
  write_smoothing_csv(sm, done);
  write_baselines_csv(bl, baselines);
  run.write("smoothing.csv", sm.str());
  run.write("nowcast.json", doc.dump(2) + "\n");
  run.write("baselines.csv", bl.str());
  return run.finish();
}

int cmd_scan_sigma(const Options& opt) {
  Run run("scan-sigma", opt);
  auto triangles = load_triangles(run, opt);
  auto priors = load_priors(run, opt);
  auto as_of = option_date(opt.as_of);
  if (as_of) run.set_as_of(*as_of);
  std::vector<double> grid(kDefaultSigmaGrid.begin(), kDefaultSigmaGrid.end());
  grid = run.config().get_reals("scan.grid", grid);
  if (!opt.grid.empty()) grid = io::KeyValueConfig::parse("g = " + opt.grid).get_reals("g", {});
  if (grid.empty()) throw std::invalid_argument("empty sigma grid");
  const auto options = nowcast_options(run.config());

  auto scans = for_each_area<SigmaScan>(triangles, opt.jobs, [&](const ReportTriangle& t) {
    auto view = as_of_view(t, as_of);
    if (view.rows.empty()) throw InsufficientData("no test dates");
    Date last = view.rows.back().test_date;
    Date first = view.rows.front().test_date;
    if (options.window_days > 0) first = std::max(first, add_days(last, 1 - options.window_days));
    auto obs = observations_from_triangle(view, priors, first, last);
    return select_sigma(obs, grid, run.area_config(t.area_id));
  });
  report_outcomes(run, triangles, scans);

  json doc;
  doc["manifest"] = "manifest.json";
  json areas = json::object();
  for (std::size_t i = 0; i < scans.size(); ++i) {
    if (!scans[i].value) continue;
    const auto& s = *scans[i].value;
    const auto& area = triangles[i].area_id;
    std::ostringstream os;
    write_sigma_scan_csv(os, s);
    run.write("sigma_scan_" + slug(area) + ".csv", os.str());
    areas[area] = {{"best_sigma", s.best}, {"grid", s.grid}, {"log_evidence", s.log_evidences}, {"warnings", s.warnings}};
    for (const auto& w : s.warnings) run.warn(area + ": " + w);
  }
  doc["areas"] = std::move(areas);
  run.write("sigma_scan.json", doc.dump(2) + "\n");
  return run.finish();
}

int cmd_alert(const Options& opt) {
  Run run("alert", opt);
  auto triangles = load_triangles(run, opt);
  auto priors = load_priors(run, opt);
  if (!run.config().has("alert.threshold")) throw std::invalid_argument("--threshold is required");
  const double threshold = run.config().get_real("alert.threshold", 0.0);
  const double trigger = run.config().get_real("alert.trigger", 0.9);
  auto as_of = option_date(opt.as_of);
  if (as_of) run.set_as_of(*as_of);
  run.set_sigma(run.run_config().sigma);
  const auto options = nowcast_options(run.config());

  auto reports = for_each_area<AlertReport>(triangles, opt.jobs, [&](const ReportTriangle& t) {
    auto r = run_nowcast(as_of_view(t, as_of), priors, run.area_config(t.area_id), options);
    return alert_report(r.smoothing, r.dates, threshold);
  });
  report_outcomes(run, triangles, reports);

  json doc;
  doc["manifest"] = "manifest.json";
  doc["threshold"] = threshold;
  doc["trigger_probability"] = trigger;
  json areas = json::object();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (!reports[i].value) continue;
    const auto& rep = *reports[i].value;
    areas[triangles[i].area_id] = {{"triggered", rep.triggered(trigger)}, {"rows", alert_report_json(rep)}};
  }
  doc["areas"] = std::move(areas);
  run.write("alerts.json", doc.dump(2) + "\n");
  return run.finish();
}

int cmd_monitor(const Options& opt) {
  Run run("monitor", opt);
  auto triangles = load_triangles(run, opt);
  const auto& c = run.config();
  MonitorConfig mc;
  mc.window_days = static_cast<int>(c.get_int("monitor.window_days", mc.window_days));
  mc.lag = static_cast<int>(c.get_int("monitor.lag", mc.lag));
  mc.baseline_days = static_cast<int>(c.get_int("monitor.baseline_days", mc.baseline_days));
  mc.baseline_quantile = c.get_real("monitor.baseline_quantile", mc.baseline_quantile);
  mc.evidence_steps = static_cast<int>(c.get_int("monitor.evidence_steps", mc.evidence_steps));
  auto first_opt = option_date(opt.first.empty() ? c.get_string("monitor.first", "") : opt.first);
  auto last_opt = option_date(opt.last.empty() ? c.get_string("monitor.last", "") : opt.last);
  std::optional<LagPriorTable> fixed_priors;
  if (!opt.priors_path.empty()) fixed_priors = load_priors(run, opt);
  run.set_sigma(run.run_config().sigma);
  const auto prior_cfg = prior_config(c);

  auto rows = for_each_area<std::vector<MonitorRow>>(triangles, opt.jobs, [&](const ReportTriangle& t) {
    Date last = last_opt.value_or(t.as_of);
    Date first = first_opt.value_or(add_days(last, -20));
    if (first > last) throw std::invalid_argument("monitoring range is empty");
    // Without a prior table, fit one from what was known before monitoring began.
    LagPriorTable priors = fixed_priors ? *fixed_priors
                                        : build_prior_table({truncate_triangle(t, first)}, nullptr, prior_cfg);
    return monitor_triangle(t, priors, run.area_config(t.area_id), mc, first, last);
  });
  report_outcomes(run, triangles, rows);

  std::ostringstream os;
  bool header = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].value) continue;
    write_monitor_csv(os, triangles[i].area_id, *rows[i].value, header);
    header = false;
  }
  if (header) write_monitor_csv(os, "", {});
  run.write("monitor.csv", os.str());
  return run.finish();
}

int cmd_simulate(const Options& opt) {
  Run run("simulate", opt);
  const auto& c = run.config();
  ScenarioConfig sc;
  sc.area_id = c.get_string("simulate.area_id", sc.area_id);
  sc.start = parse_date(c.get_string("simulate.start", format_date(sc.start)));
  sc.days = static_cast<int>(c.get_int("simulate.days", sc.days));
  sc.sigma_true = c.get_real("simulate.sigma_true", sc.sigma_true);
  sc.lambda0 = c.get_real("simulate.lambda0", sc.lambda0);
  sc.kappa0 = c.get_real("simulate.kappa0", sc.kappa0);
  if (c.has("simulate.weekend_z")) {
    auto z = c.get_string("simulate.weekend_z", "");
    if (z == "random") sc.weekend_z.reset();
    else sc.weekend_z = c.get_real("simulate.weekend_z", 1.0);
  }
  sc.weekend_prior.alpha = c.get_real("simulate.weekend_alpha", sc.weekend_prior.alpha);
  sc.weekend_prior.beta = c.get_real("simulate.weekend_beta", sc.weekend_prior.beta);
  if (c.has("simulate.theta_alpha") || c.has("simulate.theta_beta")) {
    auto a = c.get_reals("simulate.theta_alpha", {});
    auto b = c.get_reals("simulate.theta_beta", {});
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("theta_alpha and theta_beta must pair up");
    sc.theta_schedule.clear();
    for (std::size_t j = 0; j < a.size(); ++j) sc.theta_schedule.push_back({a[j], b[j]});
  }
  if (c.has("simulate.fault_first")) {
    FaultWindow f;
    f.first = parse_date(c.get_string("simulate.fault_first", ""));
    f.last = parse_date(c.get_string("simulate.fault_last", format_date(f.first)));
    f.fraction = c.get_real("simulate.fault_fraction", 0.5);
    sc.faults.push_back(f);
  }
  sc.extra_report_days = static_cast<int>(c.get_int("simulate.extra_report_days", sc.extra_report_days));
  sc.seed = run.seed();
  sc.validate();

  auto sim = simulate(sc);
  std::ostringstream snaps, truth, tri;
  write_snapshots_csv(snaps, sim.snapshots);
  write_truth_csv(truth, sim.truth);
  auto triangle = mark_convergence(build_triangle(sim.snapshots, sc.area_id));
  write_triangle_csv(tri, triangle);
  run.set_as_of(triangle.as_of);
  run.write("snapshots.csv", snaps.str());
  run.write("truth.csv", truth.str());
  run.write("triangle_" + slug(sc.area_id) + ".csv", tri.str());
  return run.finish();
}

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("--config", opt.config_path, std::string("key = value config file (default: $") + kConfigEnv + ")");
  sub->add_option("--seed", opt.seed, "random seed");
  sub->add_option("--sigma", opt.sigma, "random-walk scale of the drift");
  sub->add_option("--particles", opt.particles, "particles per time step");
  sub->add_option("--out", opt.out, "output directory")->required();
  sub->add_option("--areas", opt.areas, "comma-separated area filter");
  sub->add_option("--jobs", opt.jobs, "worker threads (0: one per core)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Now-casting of lagged, under-reported daily counts"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options opt;

  auto* ingest = app.add_subcommand("ingest", "build report triangles from snapshot CSV files");
  add_common(ingest, opt);
  ingest->add_option("inputs", opt.inputs, "snapshot files or directories")->required();

  auto* priors = app.add_subcommand("priors", "fit per-lag reporting-rate priors");
  add_common(priors, opt);
  priors->add_option("inputs", opt.inputs, "triangle files or directories")->required();
  priors->add_option("--adjacency", opt.adjacency_path, "area adjacency CSV for the spatial estimate");
  priors->add_option("--as-of", opt.as_of, "use only reports published up to this date");

  auto* nowcast = app.add_subcommand("nowcast", "smooth the latent intensity and counts");
  add_common(nowcast, opt);
  nowcast->add_option("inputs", opt.inputs, "triangle files or directories")->required();
  nowcast->add_option("--priors", opt.priors_path, "prior table CSV")->required();
  nowcast->add_option("--as-of", opt.as_of, "replay the data as published on this date");
  nowcast->add_flag("--plot", opt.plot, "write one SVG chart per area");

  auto* scan = app.add_subcommand("scan-sigma", "choose sigma by model evidence");
  add_common(scan, opt);
  scan->add_option("inputs", opt.inputs, "triangle files or directories")->required();
  scan->add_option("--priors", opt.priors_path, "prior table CSV")->required();
  scan->add_option("--grid", opt.grid, "comma-separated sigma values");
  scan->add_option("--as-of", opt.as_of, "replay the data as published on this date");

  auto* alert = app.add_subcommand("alert", "probability that the intensity exceeds a threshold");
  add_common(alert, opt);
  alert->add_option("inputs", opt.inputs, "triangle files or directories")->required();
  alert->add_option("--priors", opt.priors_path, "prior table CSV")->required();
  alert->add_option("--threshold", opt.threshold, "intensity threshold V");
  alert->add_option("--as-of", opt.as_of, "replay the data as published on this date");

  auto* monitor = app.add_subcommand("monitor", "consistency statistics over a range of report dates");
  add_common(monitor, opt);
  monitor->add_option("inputs", opt.inputs, "triangle files or directories")->required();
  monitor->add_option("--priors", opt.priors_path, "prior table CSV (default: fitted before --first)");
  monitor->add_option("--first", opt.first, "first report date");
  monitor->add_option("--last", opt.last, "last report date");

  auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario");
  add_common(sim, opt);

  CLI11_PARSE(app, argc, argv);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "ingest") return cmd_ingest(opt);
    if (name == "priors") return cmd_priors(opt);
    if (name == "nowcast") return cmd_nowcast(opt);
    if (name == "scan-sigma") return cmd_scan_sigma(opt);
    if (name == "alert") return cmd_alert(opt);
    if (name == "monitor") return cmd_monitor(opt);
    return cmd_simulate(opt);
  } catch (const std::exception& e) {
    json err;
    err["command"] = name;
    err["errors"] = json::array({{{"area", ""}, {"kind", error_kind(e)}, {"message", e.what()}}});
    std::cerr << "error: " << e.what() << '\n';
    if (!opt.out.empty()) {
      try {
        fs::create_directories(opt.out);
        io::write_file_atomic(fs::path(opt.out) / "errors.json", err.dump(2) + "\n");
      } catch (const std::exception&) {
      }
    }
    return 2;
  }
}
