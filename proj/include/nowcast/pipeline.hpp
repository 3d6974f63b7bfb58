#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nowcast/baselines.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/priors.hpp"
#include "nowcast/selection.hpp"
#include "nowcast/smc.hpp"

namespace nowcast {

/// One observation per date in [first, last]: the latest published report,
/// exact when its row has converged and thinned by the lag prior otherwise.
/// Throws Unavailable when a thinned report has no prior for its area.
std::vector<Observation> observations_from_triangle(const ReportTriangle& triangle, const LagPriorTable& priors,
                                                    Date first, Date last);

struct NowcastOptions {
  int window_days = 0;              // trailing test dates modelled; 0 keeps the whole triangle
  bool include_report_day = true;   // add the as-of date itself as a prediction-only step
};

struct NowcastResult {
  std::string area_id;
  std::vector<Date> dates;
  std::vector<Observation> observations;
  ForwardResult forward;
  SmoothingResult smoothing;
  std::vector<CountDistribution> counts;
  std::vector<double> z_mean;
  RunConfig config;
};

NowcastResult run_nowcast(const ReportTriangle& triangle, const LagPriorTable& priors, const RunConfig& config,
                          const NowcastOptions& options = {});

struct MonitorConfig {
  int window_days = 21;       // trailing test dates per as-of run
  int lag = 1;                // j in the consistency statistic
  int baseline_days = 14;     // trailing values forming the baseline
  double baseline_quantile = 0.05;
  int evidence_steps = 3;     // latest observed steps summed into the evidence column
};

struct MonitorRow {
  Date report_date{};
  Date target_date{};  // report_date - lag
  double consistency = 0.0;
  std::optional<double> baseline;
  bool flagged = false;
  double window_log_evidence = 0.0;
};

/// Replays the triangle as it stood on each day: for every report date R in
/// [first, last], compares the lag-j smoothing distribution of x at R - j with
/// the predictive made for it one day earlier.
std::vector<MonitorRow> monitor_triangle(const ReportTriangle& triangle, const LagPriorTable& priors,
                                         const RunConfig& config, const MonitorConfig& monitor, Date first, Date last);

// Exports.
void write_smoothing_csv(std::ostream& out, const std::vector<NowcastResult>& results);
nlohmann::ordered_json count_posteriors_json(const NowcastResult& result);
nlohmann::ordered_json run_metadata_json(const NowcastResult& result);
nlohmann::ordered_json alert_report_json(const AlertReport& report);
void write_sigma_scan_csv(std::ostream& out, const SigmaScan& scan);
// CSV `area_id,report_date,target_date,consistency,baseline,flagged,window_log_evidence`.
void write_monitor_csv(std::ostream& out, const std::string& area_id, const std::vector<MonitorRow>& rows,
                       bool header = true);

struct BaselineRow {
  std::string area_id;
  Date date{};
  std::string estimator;
  double value = 0.0;
};

/// Moving averages and a Kalman filter over the latest reports, plus the
/// lag-j windowed average of the now-cast means. `reference`, when given,
/// supplies converged counts for the absolute errors.
std::vector<BaselineRow> baseline_rows(const NowcastResult& result, const KalmanParams& kalman, WindowForm form,
                                       const ReportTriangle* reference = nullptr);
void write_baselines_csv(std::ostream& out, const std::vector<BaselineRow>& rows);

/// Line chart of the smoothing mean with its 5-95% band and the reported counts.
std::string nowcast_svg(const NowcastResult& result);

}  // namespace nowcast
