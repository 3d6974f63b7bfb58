#pragma once

#include <span>
#include <string>
#include <vector>

#include "nowcast/date.hpp"
#include "nowcast/distribution.hpp"
#include "nowcast/smc.hpp"

namespace nowcast {

struct SigmaScan {
  std::vector<double> grid;           // ascending, failed values removed
  std::vector<double> log_evidences;  // aligned with grid
  double best = 0.0;
  std::vector<std::string> warnings;
};

inline const std::vector<double> kDefaultSigmaGrid{1.0, 2.0, 5.0, 10.0, 20.0};

/// Forward filter at each sigma; best is the argmax of the evidence, ties
/// going to the smaller sigma. Throws InsufficientData if every run fails.
SigmaScan select_sigma(std::span<const Observation> observations, std::span<const double> grid,
                       const RunConfig& config);

/// sum_x p_smooth(x) p_pred(x), with both supports zero-extended.
double consistency_statistic(const CountDistribution& predictive, const CountDistribution& smoothing);

/// Sum of the per-step log evidence terms for steps first .. first + k.
double lagged_report_evidence(std::span<const double> step_log_evidence, std::size_t first, std::size_t k);

/// Fraction of smoothing atoms of lambda_t above `threshold`.
double alert_probability(const SmoothingResult& smoothing, double threshold, std::size_t t);

struct DriftSummary {
  double mean = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  bool increasing = false;  // q05 > 0
};

std::vector<DriftSummary> drift_summary(const SmoothingResult& smoothing);

struct AlertRow {
  Date date{};
  double p_above_threshold = 0.0;
  DriftSummary drift;
};

struct AlertReport {
  double threshold = 0.0;
  std::vector<AlertRow> rows;

  /// Whether the latest day's probability exceeds `trigger`.
  bool triggered(double trigger = 0.9) const;
};

AlertReport alert_report(const SmoothingResult& smoothing, std::span<const Date> dates, double threshold);

}  // namespace nowcast
