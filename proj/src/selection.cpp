#include "nowcast/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nowcast/error.hpp"

namespace nowcast {

SigmaScan select_sigma(std::span<const Observation> observations, std::span<const double> grid,
                       const RunConfig& config) {
  if (grid.empty()) throw std::invalid_argument("sigma grid is empty");
  std::vector<double> sigmas(grid.begin(), grid.end());
  std::sort(sigmas.begin(), sigmas.end());
  sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());

  SigmaScan scan;
  for (double sigma : sigmas) {
    RunConfig run = config;
    run.sigma = sigma;
    try {
      double ev = run_forward(observations, run).log_evidence();
      if (!std::isfinite(ev)) throw DegenerateState("non-finite evidence");
      scan.grid.push_back(sigma);
      scan.log_evidences.push_back(ev);
    } catch (const std::exception& e) {
      scan.warnings.push_back("sigma " + std::to_string(sigma) + " skipped: " + e.what());
    }
  }
  if (scan.grid.empty()) throw InsufficientData("every sigma in the grid failed");
  auto best = std::max_element(scan.log_evidences.begin(), scan.log_evidences.end());
  scan.best = scan.grid[static_cast<std::size_t>(best - scan.log_evidences.begin())];
  return scan;
}

double consistency_statistic(const CountDistribution& predictive, const CountDistribution& smoothing) {
  std::int64_t lo = std::max(predictive.lo, smoothing.lo);
  std::int64_t hi = std::min(predictive.hi(), smoothing.hi());
  double c = 0.0;
  for (std::int64_t x = lo; x <= hi; ++x) c += predictive.pmf(x) * smoothing.pmf(x);
  return c;
}

double lagged_report_evidence(std::span<const double> step_log_evidence, std::size_t first, std::size_t k) {
  if (first + k >= step_log_evidence.size()) throw std::out_of_range("evidence window runs past the series");
  double s = 0.0;
  for (std::size_t i = first; i <= first + k; ++i) s += step_log_evidence[i];
  return s;
}

double alert_probability(const SmoothingResult& smoothing, double threshold, std::size_t t) {
  if (t >= smoothing.steps()) throw std::out_of_range("time index outside the smoothing range");
  const auto& atoms = smoothing.lambda[t];
  if (atoms.size() == 0) return 0.0;
  return static_cast<double>((atoms > threshold).count()) / static_cast<double>(atoms.size());
}

std::vector<DriftSummary> drift_summary(const SmoothingResult& smoothing) {
  std::vector<DriftSummary> out;
  out.reserve(smoothing.steps());
  for (const auto& k : smoothing.kappa) {
    std::vector<double> v(k.data(), k.data() + k.size());
    DriftSummary s;
    s.mean = k.mean();
    s.q05 = sample_quantile(v, 0.05);
    s.q95 = sample_quantile(std::move(v), 0.95);
    s.increasing = s.q05 > 0.0;
    out.push_back(s);
  }
  return out;
}

bool AlertReport::triggered(double trigger) const { return !rows.empty() && rows.back().p_above_threshold > trigger; }

AlertReport alert_report(const SmoothingResult& smoothing, std::span<const Date> dates, double threshold) {
  if (dates.size() != smoothing.steps()) throw std::invalid_argument("dates and smoothing atoms differ in length");
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  AlertReport report;
  report.threshold = threshold;
  auto drift = drift_summary(smoothing);
  for (std::size_t t = 0; t < dates.size(); ++t) {
    report.rows.push_back({dates[t], alert_probability(smoothing, threshold, t), drift[t]});
  }
  return report;
}

}  // namespace nowcast
