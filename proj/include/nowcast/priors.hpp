#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/date.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/kernels.hpp"

namespace nowcast {

enum class PriorSource { kTemporal, kSpatial, kFallback };

const char* to_string(PriorSource source);
PriorSource parse_prior_source(const std::string& text);

struct LagPrior {
  std::string area_id;
  int lag = 1;
  BetaBinomialParams params;
  PriorSource source = PriorSource::kFallback;
  std::optional<Date> window_start;
  std::optional<Date> window_end;
};

/// Beta priors on the reporting rate, keyed by (area, lag).
class LagPriorTable {
 public:
  void set(LagPrior prior);
  const LagPrior* find(const std::string& area, int lag) const;
  /// Prior for `lag`, clamped to the largest lag tabulated for the area.
  const LagPrior* lookup(const std::string& area, int lag) const;
  bool has_area(const std::string& area) const;
  const std::map<std::pair<std::string, int>, LagPrior>& entries() const { return entries_; }

 private:
  std::map<std::pair<std::string, int>, LagPrior> entries_;
};

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;
};

/// Sample mean and population variance of observed rates. Throws
/// InsufficientData on fewer than two values.
MeanVariance temporal_theta_estimate(std::span<const double> rates);

/// Unweighted mean of neighbour rates over the `hops`-hop neighbourhood,
/// excluding `area`. Throws InsufficientData when the neighbourhood is empty
/// or a neighbour has no rate.
double spatial_theta_estimate(const AdjacencyGraph& graph, const std::string& area, int hops,
                              const std::map<std::string, double>& rates_by_area);

/// Beta shapes whose mean is `m` and whose variance is min(v, m(1-m) - epsilon).
/// Throws std::domain_error unless 0 < m < 1 and v >= 0.
BetaBinomialParams moment_match_beta(double m, double v, double epsilon = 1e-6);

struct PriorConfig {
  int window_days = 14;  // most recent converged test dates used
  int max_lag = 6;
  int hops = 2;
  double epsilon = 1e-6;
  BetaBinomialParams fallback{1.0, 1.0};
  std::optional<Date> exclude_date;  // leave-one-out target, if inside the window
};

/// Fits a prior for each (area, lag in 1..max_lag): temporal when the area has
/// at least two usable converged rates in its window, spatial from the
/// neighbourhood otherwise, and the fallback Beta when neither applies.
LagPriorTable build_prior_table(const std::vector<ReportTriangle>& triangles, const AdjacencyGraph* graph,
                                const PriorConfig& config = {});

/// Usable reporting rates at `lag` for converged rows in [first, last].
std::map<Date, double> converged_rates(const ReportTriangle& triangle, int lag, Date first, Date last);

// CSV `area_id,lag,alpha,beta,source,window_start,window_end`.
void write_prior_table_csv(std::ostream& out, const LagPriorTable& table);
LagPriorTable read_prior_table_csv(std::istream& in);

}  // namespace nowcast
