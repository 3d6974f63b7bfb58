#include "nowcast/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/io.hpp"

namespace nowcast {

std::vector<Observation> observations_from_triangle(const ReportTriangle& triangle, const LagPriorTable& priors,
                                                    Date first, Date last) {
  std::vector<Observation> out;
  for (Date d = first; d <= last; d = add_days(d, 1)) {
    Observation obs;
    obs.date = d;
    obs.weekend = is_weekend(d);
    if (auto idx = triangle.index_of(d)) {
      const auto& row = triangle.rows[*idx];
      if (const LagReport* latest = row.latest()) {
        obs.lag = latest->lag;
        if (row.converged && row.final_count) {
          obs.count = *row.final_count;
        } else {
          const LagPrior* prior = priors.lookup(triangle.area_id, latest->lag);
          if (!prior) throw Unavailable("no reporting-rate prior for area '" + triangle.area_id + "'");
          obs.count = latest->count;
          obs.thinning = prior->params;
        }
      }
    }
    out.push_back(obs);
  }
  return out;
}

NowcastResult run_nowcast(const ReportTriangle& triangle, const LagPriorTable& priors, const RunConfig& config,
                          const NowcastOptions& options) {
  if (triangle.rows.empty()) throw InsufficientData("area '" + triangle.area_id + "' has no reports");
  Date last_test = std::min(triangle.rows.back().test_date, add_days(triangle.as_of, -1));
  Date first = triangle.rows.front().test_date;
  if (options.window_days > 0) first = std::max(first, add_days(last_test, -(options.window_days - 1)));
  Date last = options.include_report_day ? triangle.as_of : last_test;

  NowcastResult r;
  r.area_id = triangle.area_id;
  r.config = config;
  r.observations = observations_from_triangle(triangle, priors, first, last);
  for (const auto& o : r.observations) r.dates.push_back(o.date);
  r.forward = run_forward(r.observations, config);
  r.smoothing = backward_smooth(r.forward, config);
  r.counts = smooth_counts(r.smoothing, r.observations, config);
  r.z_mean.reserve(r.dates.size());
  for (std::size_t t = 0; t < r.dates.size(); ++t) {
    r.z_mean.push_back(weekend_posterior(r.smoothing, t, r.observations[t], config).mean());
  }
  return r;
}

std::vector<MonitorRow> monitor_triangle(const ReportTriangle& triangle, const LagPriorTable& priors,
                                         const RunConfig& config, const MonitorConfig& monitor, Date first, Date last) {
  if (monitor.lag < 1) throw std::invalid_argument("monitoring lag must be at least 1");
  if (monitor.evidence_steps < 1) throw std::invalid_argument("evidence window needs at least one step");
  NowcastOptions opts;
  opts.window_days = monitor.window_days;
  opts.include_report_day = true;

  struct AsOf {
    CountDistribution predictive;  // x on the as-of day, from the day before
    CountDistribution lagged;      // x on as-of - lag
    double evidence = 0.0;
  };
  std::map<Date, AsOf> runs;
  for (Date a = add_days(first, -monitor.lag); a <= last; a = add_days(a, 1)) {
    RunConfig cfg = config;
    cfg.seed = mix_seed(config.seed, 0x6d6f6e, static_cast<std::uint64_t>(a.time_since_epoch().count()));
    auto result = run_nowcast(truncate_triangle(triangle, a), priors, cfg, opts);
    const std::size_t n = result.dates.size();
    if (n < 2 || n <= static_cast<std::size_t>(monitor.lag)) throw InsufficientData("monitoring window too short");
    AsOf entry;
    entry.predictive = predictive_counts(result.forward.states[n - 2], is_weekend(a), cfg);
    entry.lagged = result.counts[n - 1 - static_cast<std::size_t>(monitor.lag)];
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(monitor.evidence_steps), n - 1);
    entry.evidence = lagged_report_evidence(result.forward.step_log_evidence, n - 1 - k, k - 1);
    runs.emplace(a, std::move(entry));
  }

  std::vector<MonitorRow> rows;
  for (Date r = first; r <= last; r = add_days(r, 1)) {
    MonitorRow row;
    row.report_date = r;
    row.target_date = add_days(r, -monitor.lag);
    row.consistency = consistency_statistic(runs.at(row.target_date).predictive, runs.at(r).lagged);
    row.window_log_evidence = runs.at(r).evidence;
    if (rows.size() >= static_cast<std::size_t>(monitor.baseline_days)) {
      std::vector<double> trail;
      for (auto it = rows.end() - monitor.baseline_days; it != rows.end(); ++it) trail.push_back(it->consistency);
      row.baseline = sample_quantile(trail, monitor.baseline_quantile);
      row.flagged = row.consistency < *row.baseline;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_smoothing_csv(std::ostream& out, const std::vector<NowcastResult>& results) {
  out << "area_id,test_date,stat,value\n";
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.dates.size(); ++t) {
      const auto& lam = r.smoothing.lambda[t];
      std::vector<double> v(lam.data(), lam.data() + lam.size());
      const auto& x = r.counts[t];
      std::pair<const char*, double> stats[] = {
          {"lambda_mean", lam.mean()},
          {"lambda_q05", sample_quantile(v, 0.05)},
          {"lambda_q95", sample_quantile(v, 0.95)},
          {"kappa_mean", r.smoothing.kappa[t].mean()},
          {"x_mean", x.mean()},
          {"x_q05", static_cast<double>(x.quantile(0.05))},
          {"x_q95", static_cast<double>(x.quantile(0.95))},
          {"z_mean", r.z_mean[t]},
      };
      std::string prefix = r.area_id + "," + format_date(r.dates[t]) + ",";
      for (auto [name, value] : stats) out << prefix << name << ',' << io::format_real(value) << '\n';
    }
  }
}

nlohmann::ordered_json count_posteriors_json(const NowcastResult& result) {
  nlohmann::ordered_json dates = nlohmann::ordered_json::object();
  for (std::size_t t = 0; t < result.dates.size(); ++t) {
    nlohmann::ordered_json pmf = nlohmann::ordered_json::object();
    const auto& d = result.counts[t];
    for (Eigen::Index k = 0; k < d.probs.size(); ++k) {
      if (d.probs[k] > 0.0) pmf[std::to_string(d.lo + k)] = d.probs[k];
    }
    dates[format_date(result.dates[t])] = std::move(pmf);
  }
  return dates;
}

nlohmann::ordered_json run_metadata_json(const NowcastResult& result) {
  nlohmann::ordered_json j;
  j["area_id"] = result.area_id;
  j["first_date"] = result.dates.empty() ? "" : format_date(result.dates.front());
  j["last_date"] = result.dates.empty() ? "" : format_date(result.dates.back());
  j["sigma"] = result.config.sigma;
  j["n_particles"] = result.config.n_particles;
  j["m_smooth"] = result.config.m_smooth;
  j["weekend_effects"] = result.config.weekend_effects;
  j["log_evidence"] = result.forward.log_evidence();
  j["step_log_evidence"] = result.forward.step_log_evidence;
  double acc = 0.0;
  for (const auto& s : result.forward.states) acc += s.acceptance;
  j["mean_acceptance"] = result.forward.states.empty() ? 0.0 : acc / static_cast<double>(result.forward.states.size());
  nlohmann::ordered_json degenerate = nlohmann::ordered_json::array();
  for (int t : result.smoothing.degenerate_steps) degenerate.push_back(format_date(result.dates[static_cast<std::size_t>(t)]));
  j["degenerate_smoothing_dates"] = std::move(degenerate);
  return j;
}

nlohmann::ordered_json alert_report_json(const AlertReport& report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["date"] = format_date(r.date);
    row["p_above_threshold"] = r.p_above_threshold;
    row["kappa_mean"] = r.drift.mean;
    row["kappa_q05"] = r.drift.q05;
    row["kappa_q95"] = r.drift.q95;
    row["increasing_flag"] = r.drift.increasing;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sigma_scan_csv(std::ostream& out, const SigmaScan& scan) {
  out << "sigma,log_evidence\n";
  for (std::size_t i = 0; i < scan.grid.size(); ++i) {
    out << io::format_real(scan.grid[i]) << ',' << io::format_real(scan.log_evidences[i]) << '\n';
  }
}

void write_monitor_csv(std::ostream& out, const std::string& area_id, const std::vector<MonitorRow>& rows,
                       bool header) {
  if (header) out << "area_id,report_date,target_date,consistency,baseline,flagged,window_log_evidence\n";
  for (const auto& r : rows) {
    out << area_id << ',' << format_date(r.report_date) << ',' << format_date(r.target_date) << ','
        << io::format_real(r.consistency) << ',' << (r.baseline ? io::format_real(*r.baseline) : "") << ','
        << (r.flagged ? 1 : 0) << ',' << io::format_real(r.window_log_evidence) << '\n';
  }
}

std::vector<BaselineRow> baseline_rows(const NowcastResult& result, const KalmanParams& kalman, WindowForm form, const ReportTriangle* reference) {
  std::vector<BaselineRow> out;
  std::vector<Date> dates;
  std::vector<double> reports;
  for (const auto& o : result.observations) {
    if (!o.count) continue;
    dates.push_back(o.date);
    reports.push_back(static_cast<double>(*o.count));
  }
  if (!reports.empty()) {
    auto uni = moving_average(reports, 7, MovingAverageWeights::kUniform);
    auto lin = moving_average(reports, 7, MovingAverageWeights::kLinear);
    KalmanParams kp = kalman;
    if (!std::isfinite(kp.mu)) kp.mu = reports.front();
    auto kf = kalman_filter(reports, kp);
    for (std::size_t i = 0; i < dates.size(); ++i) {
      out.push_back({result.area_id, dates[i], "ma7_uniform", uni[i]});
      out.push_back({result.area_id, dates[i], "ma7_linear", lin[i]});
      out.push_back({result.area_id, dates[i], "kalman_mean", kf[i].mean});
    }
  }

  std::vector<double> means;
  for (const auto& c : result.counts) means.push_back(c.mean());
  const std::size_t back = form == WindowForm::kLiteral ? 7 : 6;
  for (std::size_t T = back; T < result.dates.size(); ++T) {
    const auto& o = result.observations[T];
    if (!o.count || !o.thinning || o.lag < 1) continue;
    std::string suffix = "_lag" + std::to_string(o.lag);
    double wa = windowed_average(means, T, form);
    out.push_back({result.area_id, result.dates[T], "wa" + suffix, wa});
    if (!reference) continue;
    std::vector<double> truth(result.dates.size(), 0.0);
    bool complete = true;
    for (std::size_t t = T - back; t <= T && complete; ++t) {
      auto idx = reference->index_of(result.dates[t]);
      if (!idx || !reference->rows[*idx].final_count) {
        complete = false;
      } else {
        truth[t] = static_cast<double>(*reference->rows[*idx].final_count);
      }
    }
    if (complete) out.push_back({result.area_id, result.dates[T], "ae" + suffix, windowed_average_error(wa, truth, T, form)});
  }
  std::stable_sort(out.begin(), out.end(), [](const BaselineRow& a, const BaselineRow& b) { return a.date < b.date; });
  return out;
}

void write_baselines_csv(std::ostream& out, const std::vector<BaselineRow>& rows) {
  out << "area_id,date,estimator,value\n";
  for (const auto& r : rows) {
    out << r.area_id << ',' << format_date(r.date) << ',' << r.estimator << ',' << io::format_real(r.value) << '\n';
  }
}

std::string nowcast_svg(const NowcastResult& result) {
  const double width = 800, height = 320, left = 50, right = 20, top = 30, bottom = 40;
  const std::size_t n = result.dates.size();
  double ymax = 1.0;
  for (std::size_t t = 0; t < n; ++t) {
    ymax = std::max(ymax, static_cast<double>(result.counts[t].quantile(0.95)));
    if (result.observations[t].count) ymax = std::max(ymax, static_cast<double>(*result.observations[t].count));
  }
  ymax *= 1.05;
  auto px = [&](std::size_t t) { return left + (n > 1 ? (width - left - right) * t / double(n - 1) : 0.0); };
  auto py = [&](double v) { return top + (height - top - bottom) * (1.0 - v / ymax); };

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << result.area_id
      << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << width - right << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"5\" y=\"" << top + 5 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << static_cast<long long>(ymax) << "</text>\n";
  if (n > 0) {
    svg << "<text x=\"" << left << "\" y=\"" << height - 10 << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_date(result.dates.front()) << "</text>\n";
    svg << "<text x=\"" << width - right - 70 << "\" y=\"" << height - 10
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_date(result.dates.back()) << "</text>\n";

    svg << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
    for (std::size_t t = 0; t < n; ++t) svg << px(t) << ',' << py(double(result.counts[t].quantile(0.95))) << ' ';
    for (std::size_t t = n; t-- > 0;) svg << px(t) << ',' << py(double(result.counts[t].quantile(0.05))) << ' ';
    svg << "\"/>\n";

    svg << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    for (std::size_t t = 0; t < n; ++t) svg << px(t) << ',' << py(result.counts[t].mean()) << ' ';
    svg << "\"/>\n";

    for (std::size_t t = 0; t < n; ++t) {
      if (!result.observations[t].count) continue;
      svg << "<circle cx=\"" << px(t) << "\" cy=\"" << py(double(*result.observations[t].count))
          << "\" r=\"3\" fill=\"#d94801\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace nowcast
