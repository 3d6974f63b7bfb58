#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/date.hpp"

namespace nowcast {

using Count = std::int64_t;

/// All cumulative counts published on one report date.
struct ReportSnapshot {
  Date report_date;
  std::map<std::pair<std::string, Date>, Count> entries;  // (area, test date) -> count
};

/// One cumulative report of a test date, `lag` days after it.
struct LagReport {
  int lag = 0;
  Count count = 0;
  bool missing = false;      // carried forward: no report on this day
  bool over_report = false;  // value dropped below an earlier report
};

struct TriangleRow {
  Date test_date;
  std::vector<LagReport> reports;  // ascending, contiguous lags once started
  bool converged = false;
  std::optional<Count> final_count;
  bool over_reported = false;

  /// Latest report actually published (skips carried-forward entries).
  const LagReport* latest() const;
  const LagReport* at_lag(int lag) const;
};

/// Reporting triangle of one area: one row per test date, contiguous in time.
struct ReportTriangle {
  std::string area_id;
  std::vector<TriangleRow> rows;
  Date as_of{};  // last report date that contributed

  std::size_t size() const { return rows.size(); }
  /// Index of `d` in rows, if covered.
  std::optional<std::size_t> index_of(Date d) const;
};

struct ConvergenceRule {
  int converge_lag = 7;
  int stable_reports = 3;
  int stable_min_lag = 4;
};

/// Undirected adjacency between areas.
class AdjacencyGraph {
 public:
  void add_node(const std::string& area);
  /// Throws DataError on self loops.
  void add_edge(const std::string& a, const std::string& b);
  const std::set<std::string>& neighbours(const std::string& area) const;
  /// Areas within `hops` edges of `area`, excluding `area` itself.
  std::set<std::string> neighbourhood(const std::string& area, int hops) const;
  bool contains(const std::string& area) const { return adj_.count(area) != 0; }
  const std::map<std::string, std::set<std::string>>& nodes() const { return adj_; }

 private:
  std::map<std::string, std::set<std::string>> adj_;
};

/// Assembles the reporting triangle of `area` from snapshots sorted by report date.
/// Days without a report for a started row are carried forward and flagged missing.
ReportTriangle build_triangle(const std::vector<ReportSnapshot>& snapshots, const std::string& area);

ReportTriangle mark_convergence(ReportTriangle triangle, const ConvergenceRule& rule = {});

/// The triangle as it stood on `as_of`: rows before it, reports published by
/// it, convergence re-evaluated.
ReportTriangle truncate_triangle(const ReportTriangle& triangle, Date as_of, const ConvergenceRule& rule = {});

/// Fraction of the final count reported by `lag`, clamped to [0,1] for
/// over-reported rows. Throws Unavailable or InsufficientData.
double reporting_rate(const ReportTriangle& triangle, std::size_t row, int lag);

/// Inverse of build_triangle for the reports actually published (missing
/// entries are dropped).
std::vector<ReportSnapshot> snapshots_from_triangle(const ReportTriangle& triangle);

/// Distinct area ids present in the snapshots, sorted.
std::vector<std::string> snapshot_areas(const std::vector<ReportSnapshot>& snapshots);

// CSV `area_id,test_date,report_date,count`.
struct SnapshotReadResult {
  std::vector<ReportSnapshot> snapshots;
  std::vector<std::string> warnings;  // one per malformed row, with line number
  std::size_t rows_read = 0;
  std::size_t rows_malformed = 0;
};
/// Reads snapshot rows; malformed lines are reported, and more than
/// `max_malformed_fraction` of them aborts with DataError.
SnapshotReadResult read_snapshots_csv(std::istream& in, const std::string& source = "<stream>",
                                      double max_malformed_fraction = 0.01);
void merge_snapshots(std::vector<ReportSnapshot>& into, std::vector<ReportSnapshot> more);
void write_snapshots_csv(std::ostream& out, const std::vector<ReportSnapshot>& snapshots);

// CSV `area_id,test_date,lag,count,converged,over_report_flag`. Carried-forward
// entries are not written; reading rebuilds them.
void write_triangle_csv(std::ostream& out, const ReportTriangle& triangle);
std::vector<ReportTriangle> read_triangles_csv(std::istream& in);

// CSV `area_a,area_b`.
AdjacencyGraph read_adjacency_csv(std::istream& in);

}  // namespace nowcast
