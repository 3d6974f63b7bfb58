#include "nowcast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <istream>
#include <ostream>

#include "nowcast/error.hpp"
#include "nowcast/io.hpp"

namespace nowcast {

const LagReport* TriangleRow::latest() const {
  for (auto it = reports.rbegin(); it != reports.rend(); ++it) {
    if (!it->missing) return &*it;
  }
  return nullptr;
}

const LagReport* TriangleRow::at_lag(int lag) const {
  for (const auto& r : reports) {
    if (r.lag == lag) return &r;
  }
  return nullptr;
}

std::optional<std::size_t> ReportTriangle::index_of(Date d) const {
  if (rows.empty()) return std::nullopt;
  int offset = days_between(rows.front().test_date, d);
  if (offset < 0 || static_cast<std::size_t>(offset) >= rows.size()) return std::nullopt;
  return static_cast<std::size_t>(offset);
}

void AdjacencyGraph::add_node(const std::string& area) { adj_[area]; }

void AdjacencyGraph::add_edge(const std::string& a, const std::string& b) {
  if (a == b) throw DataError("adjacency self loop on '" + a + "'");
  adj_[a].insert(b);
  adj_[b].insert(a);
}

const std::set<std::string>& AdjacencyGraph::neighbours(const std::string& area) const {
  static const std::set<std::string> empty;
  auto it = adj_.find(area);
  return it == adj_.end() ? empty : it->second;
}

std::set<std::string> AdjacencyGraph::neighbourhood(const std::string& area, int hops) const {
  std::set<std::string> seen{area};
  std::vector<std::string> frontier{area};
  for (int h = 0; h < hops && !frontier.empty(); ++h) {
    std::vector<std::string> next;
    for (const auto& node : frontier) {
      for (const auto& nb : neighbours(node)) {
        if (seen.insert(nb).second) next.push_back(nb);
      }
    }
    frontier = std::move(next);
  }
  seen.erase(area);
  return seen;
}

namespace {

void check_sorted(const std::vector<ReportSnapshot>& snapshots) {
  for (std::size_t i = 1; i < snapshots.size(); ++i) {
    if (snapshots[i].report_date == snapshots[i - 1].report_date) {
      throw DataError("duplicate snapshot for report date " + format_date(snapshots[i].report_date));
    }
    if (snapshots[i].report_date < snapshots[i - 1].report_date) {
      throw DataError("snapshots not sorted by report date");
    }
  }
}

// Flags decreases; `reports` is ascending in lag.
void flag_over_reports(TriangleRow& row) {
  row.over_reported = false;
  std::optional<Count> prev;
  for (auto& r : row.reports) {
    r.over_report = false;
    if (r.missing) continue;
    if (prev && r.count < *prev) {
      r.over_report = true;
      row.over_reported = true;
    }
    prev = r.count;
  }
}

}  // namespace

ReportTriangle build_triangle(const std::vector<ReportSnapshot>& snapshots, const std::string& area) {
  check_sorted(snapshots);
  ReportTriangle tri;
  tri.area_id = area;
  if (snapshots.empty()) return tri;
  tri.as_of = snapshots.back().report_date;

  std::optional<Date> first, last;
  std::map<Date, const ReportSnapshot*> by_date;
  for (const auto& snap : snapshots) {
    by_date[snap.report_date] = &snap;
    for (auto it = snap.entries.lower_bound({area, Date::min()}); it != snap.entries.end() && it->first.first == area;
         ++it) {
      Date td = it->first.second;
      if (!(td < snap.report_date)) {
        throw DataError("test date " + format_date(td) + " not before report date " + format_date(snap.report_date));
      }
      if (it->second < 0) throw DataError("negative count for " + area);
      if (!first || td < *first) first = td;
      if (!last || td > *last) last = td;
    }
  }
  if (!first) return tri;

  for (Date td = *first; td <= *last; td = add_days(td, 1)) {
    TriangleRow row;
    row.test_date = td;
    std::optional<Count> carried;
    for (Date rd = add_days(td, 1); rd <= tri.as_of; rd = add_days(rd, 1)) {
      int lag = days_between(td, rd);
      std::optional<Count> value;
      if (auto s = by_date.find(rd); s != by_date.end()) {
        if (auto e = s->second->entries.find({area, td}); e != s->second->entries.end()) value = e->second;
      }
      if (value) {
        row.reports.push_back({lag, *value, false, false});
        carried = value;
      } else if (carried) {
        row.reports.push_back({lag, *carried, true, false});
      }
    }
    flag_over_reports(row);
    tri.rows.push_back(std::move(row));
  }
  return tri;
}

ReportTriangle mark_convergence(ReportTriangle triangle, const ConvergenceRule& rule) {
  for (auto& row : triangle.rows) {
    row.converged = false;
    row.final_count.reset();
    const LagReport* latest = row.latest();
    if (!latest) continue;
    bool converged = latest->lag >= rule.converge_lag;
    if (!converged && latest->lag >= rule.stable_min_lag && rule.stable_reports > 0) {
      std::vector<Count> tail;
      for (auto it = row.reports.rbegin(); it != row.reports.rend() && static_cast<int>(tail.size()) < rule.stable_reports;
           ++it) {
        if (!it->missing) tail.push_back(it->count);
      }
      converged = static_cast<int>(tail.size()) == rule.stable_reports &&
                  std::all_of(tail.begin(), tail.end(), [&](Count c) { return c == tail.front(); });
    }
    if (converged) {
      row.converged = true;
      row.final_count = latest->count;
    }
  }
  return triangle;
}

ReportTriangle truncate_triangle(const ReportTriangle& triangle, Date as_of, const ConvergenceRule& rule) {
  ReportTriangle out;
  out.area_id = triangle.area_id;
  out.as_of = std::min(as_of, triangle.as_of);
  for (const auto& row : triangle.rows) {
    if (!(row.test_date < out.as_of)) break;
    TriangleRow r;
    r.test_date = row.test_date;
    int max_lag = days_between(row.test_date, out.as_of);
    for (const auto& rep : row.reports) {
      if (rep.lag <= max_lag) r.reports.push_back(rep);
    }
    flag_over_reports(r);
    out.rows.push_back(std::move(r));
  }
  return mark_convergence(std::move(out), rule);
}

double reporting_rate(const ReportTriangle& triangle, std::size_t row_index, int lag) {
  if (row_index >= triangle.rows.size()) throw Unavailable("row out of range");
  const auto& row = triangle.rows[row_index];
  if (!row.converged || !row.final_count) {
    throw Unavailable("row " + format_date(row.test_date) + " has not converged");
  }
  if (*row.final_count == 0) throw InsufficientData("reporting rate undefined for a zero final count");
  const LagReport* r = row.at_lag(lag);
  if (!r || r->missing) {
    throw Unavailable("no report at lag " + std::to_string(lag) + " for " + format_date(row.test_date));
  }
  double rate = static_cast<double>(r->count) / static_cast<double>(*row.final_count);
  if (row.over_reported) rate = std::clamp(rate, 0.0, 1.0);
  return rate;
}

std::vector<ReportSnapshot> snapshots_from_triangle(const ReportTriangle& triangle) {
  std::map<Date, ReportSnapshot> by_date;
  for (const auto& row : triangle.rows) {
    for (const auto& r : row.reports) {
      if (r.missing) continue;
      Date rd = add_days(row.test_date, r.lag);
      auto& snap = by_date[rd];
      snap.report_date = rd;
      snap.entries[{triangle.area_id, row.test_date}] = r.count;
    }
  }
  std::vector<ReportSnapshot> out;
  for (auto& [d, s] : by_date) out.push_back(std::move(s));
  return out;
}

std::vector<std::string> snapshot_areas(const std::vector<ReportSnapshot>& snapshots) {
  std::set<std::string> areas;
  for (const auto& s : snapshots) {
    for (const auto& [key, count] : s.entries) areas.insert(key.first);
  }
  return {areas.begin(), areas.end()};
}

namespace {

bool parse_count(const std::string& text, Count& out) {
  auto first = text.data();
  auto last = first + text.size();
  while (first != last && *first == ' ') ++first;
  while (last != first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && first != last;
}

}  // namespace

SnapshotReadResult read_snapshots_csv(std::istream& in, const std::string& source, double max_malformed_fraction) {
  SnapshotReadResult result;
  std::map<Date, ReportSnapshot> by_date;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = io::split_csv(line);
    if (line_no == 1 && !fields.empty() && fields[0] == "area_id") continue;
    ++result.rows_read;
    auto malformed = [&](const std::string& why) {
      ++result.rows_malformed;
      result.warnings.push_back(source + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 4) {
      malformed("expected 4 fields, got " + std::to_string(fields.size()));
      continue;
    }
    Date test_date, report_date;
    try {
      test_date = parse_date(fields[1]);
      report_date = parse_date(fields[2]);
    } catch (const DataError& e) {
      malformed(e.what());
      continue;
    }
    Count count = 0;
    if (!parse_count(fields[3], count) || count < 0) {
      malformed("count is not a non-negative integer: '" + fields[3] + "'");
      continue;
    }
    if (!(test_date < report_date)) {
      malformed("test date must precede report date");
      continue;
    }
    if (fields[0].empty()) {
      malformed("empty area id");
      continue;
    }
    auto& snap = by_date[report_date];
    snap.report_date = report_date;
    auto [it, inserted] = snap.entries.emplace(std::make_pair(fields[0], test_date), count);
    if (!inserted) malformed("duplicate row for area/test date/report date");
  }
  if (result.rows_read > 0 &&
      static_cast<double>(result.rows_malformed) > max_malformed_fraction * static_cast<double>(result.rows_read)) {
    std::string msg = source + ": " + std::to_string(result.rows_malformed) + " of " +
                      std::to_string(result.rows_read) + " rows malformed";
    if (!result.warnings.empty()) msg += " (first: " + result.warnings.front() + ")";
    throw DataError(msg);
  }
  for (auto& [d, s] : by_date) result.snapshots.push_back(std::move(s));
  return result;
}

void merge_snapshots(std::vector<ReportSnapshot>& into, std::vector<ReportSnapshot> more) {
  std::map<Date, ReportSnapshot> by_date;
  for (auto& s : into) by_date[s.report_date] = std::move(s);
  for (auto& s : more) {
    auto& target = by_date[s.report_date];
    target.report_date = s.report_date;
    for (auto& [key, count] : s.entries) {
      auto [it, inserted] = target.entries.emplace(key, count);
      if (!inserted && it->second != count) {
        throw DataError("conflicting counts for " + key.first + " " + format_date(key.second) + " on " +
                        format_date(s.report_date));
      }
    }
  }
  into.clear();
  for (auto& [d, s] : by_date) into.push_back(std::move(s));
}

void write_snapshots_csv(std::ostream& out, const std::vector<ReportSnapshot>& snapshots) {
  out << "area_id,test_date,report_date,count\n";
  for (const auto& s : snapshots) {
    auto rd = format_date(s.report_date);
    for (const auto& [key, count] : s.entries) {
      out << key.first << ',' << format_date(key.second) << ',' << rd << ',' << count << '\n';
    }
  }
}

void write_triangle_csv(std::ostream& out, const ReportTriangle& triangle) {
  out << "area_id,test_date,lag,count,converged,over_report_flag\n";
  for (const auto& row : triangle.rows) {
    auto td = format_date(row.test_date);
    for (const auto& r : row.reports) {
      if (r.missing) continue;
      out << triangle.area_id << ',' << td << ',' << r.lag << ',' << r.count << ',' << (row.converged ? 1 : 0) << ','
          << (r.over_report ? 1 : 0) << '\n';
    }
  }
}

std::vector<ReportTriangle> read_triangles_csv(std::istream& in) {
  struct Entry {
    int lag;
    Count count;
  };
  struct AreaData {
    std::map<Date, std::vector<Entry>> rows;
    std::set<Date> converged;
    Date as_of = Date::min();
  };
  std::map<std::string, AreaData> areas;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = io::split_csv(line);
    if (line_no == 1 && !f.empty() && f[0] == "area_id") continue;
    if (f.size() != 6) throw DataError("triangle line " + std::to_string(line_no) + ": expected 6 fields");
    Count lag = 0, count = 0, conv = 0, flag = 0;
    if (!parse_count(f[2], lag) || !parse_count(f[3], count) || !parse_count(f[4], conv) || !parse_count(f[5], flag) ||
        lag < 1 || count < 0) {
      throw DataError("triangle line " + std::to_string(line_no) + ": bad numeric field");
    }
    Date td = parse_date(f[1]);
    auto& a = areas[f[0]];
    a.rows[td].push_back({static_cast<int>(lag), count});
    if (conv) a.converged.insert(td);
    a.as_of = std::max(a.as_of, add_days(td, static_cast<int>(lag)));
  }
  std::vector<ReportTriangle> out;
  for (auto& [area, data] : areas) {
    ReportTriangle tri;
    tri.area_id = area;
    tri.as_of = data.as_of;
    Date first = data.rows.begin()->first;
    Date last = data.rows.rbegin()->first;
    for (Date td = first; td <= last; td = add_days(td, 1)) {
      TriangleRow row;
      row.test_date = td;
      if (auto it = data.rows.find(td); it != data.rows.end()) {
        auto entries = it->second;
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.lag < b.lag; });
        for (std::size_t k = 0; k < entries.size(); ++k) {
          if (k > 0 && entries[k].lag == entries[k - 1].lag) {
            throw DataError("duplicate lag in triangle for " + area + " " + format_date(td));
          }
          if (!row.reports.empty()) {
            for (int lag = row.reports.back().lag + 1; lag < entries[k].lag; ++lag) {
              row.reports.push_back({lag, row.reports.back().count, true, false});
            }
          }
          row.reports.push_back({entries[k].lag, entries[k].count, false, false});
        }
        int max_lag = days_between(td, tri.as_of);
        while (!row.reports.empty() && row.reports.back().lag < max_lag) {
          row.reports.push_back({row.reports.back().lag + 1, row.reports.back().count, true, false});
        }
      }
      flag_over_reports(row);
      if (data.converged.count(td) && row.latest()) {
        row.converged = true;
        row.final_count = row.latest()->count;
      }
      tri.rows.push_back(std::move(row));
    }
    out.push_back(std::move(tri));
  }
  return out;
}

AdjacencyGraph read_adjacency_csv(std::istream& in) {
  AdjacencyGraph g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = io::split_csv(line);
    if (line_no == 1 && !f.empty() && f[0] == "area_a") continue;
    if (f.size() == 1) {
      g.add_node(f[0]);
      continue;
    }
    if (f.size() != 2) throw DataError("adjacency line " + std::to_string(line_no) + ": expected 2 fields");
    g.add_edge(f[0], f[1]);
  }
  return g;
}

}  // namespace nowcast
