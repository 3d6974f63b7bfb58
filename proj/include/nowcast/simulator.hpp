#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/date.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/kernels.hpp"

namespace nowcast {

struct FaultWindow {
  Date first{};
  Date last{};      // inclusive
  double fraction;  // reports published in the window are scaled by this
};

struct ScenarioConfig {
  std::string area_id = "sim";
  Date start = parse_date("2020-09-01");
  int days = 60;
  double sigma_true = 5.0;
  double lambda0 = 100.0;
  double kappa0 = 0.0;
  /// When non-empty, kappa_t is taken from here instead of the random walk.
  std::vector<double> kappa_path;
  /// Fixed weekend multiplier; when unset, drawn per weekend day from weekend_prior.
  std::optional<double> weekend_z = 1.0;
  BetaBinomialParams weekend_prior{1.0, 1.0};
  /// Beta prior of the reporting rate at lags 1..tau; rate 1 beyond tau (empty: complete at lag 1).
  std::vector<BetaBinomialParams> theta_schedule{{4.0, 6.0}, {7.0, 3.0}, {16.0, 4.0}, {40.0, 4.0}, {80.0, 2.0}};
  std::vector<FaultWindow> faults;
  int extra_report_days = 0;  // report days published after the last test date + 1
  std::uint64_t seed = 1;

  int tau() const { return static_cast<int>(theta_schedule.size()); }
  void validate() const;
};

struct TruthRow {
  Date date{};
  double lambda = 0.0;
  double kappa = 0.0;
  double z = 1.0;
  Count x = 0;
};

struct Simulation {
  std::vector<TruthRow> truth;
  /// reports[t][j - 1] = cumulative count of day t at lag j, j = 1..tau + 1.
  std::vector<std::vector<Count>> reports;
  /// Sorted reporting-rate draws, theta[t][j - 1] for j = 1..tau.
  std::vector<std::vector<double>> theta;
  std::vector<ReportSnapshot> snapshots;

  /// Count of day t at `lag` (the final count beyond tau).
  Count report(std::size_t t, int lag) const;
};

/// Draws one scenario. Every report day from start + 1 on publishes the
/// cumulative count of every earlier test date; faults then scale the counts
/// published inside their windows.
Simulation simulate(const ScenarioConfig& scenario);

/// Scales every count published on a report date inside [first, last] by
/// `fraction`, rounding down. Throws std::invalid_argument unless 0 <= fraction < 1.
std::vector<ReportSnapshot> inject_fault(std::vector<ReportSnapshot> snapshots, Date first, Date last, double fraction);

// CSV `date,lambda,kappa,z,x`.
void write_truth_csv(std::ostream& out, const std::vector<TruthRow>& truth);

}  // namespace nowcast
