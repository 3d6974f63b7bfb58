#include "nowcast/priors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "nowcast/error.hpp"
#include "nowcast/io.hpp"

namespace nowcast {

const char* to_string(PriorSource source) {
  switch (source) {
    case PriorSource::kTemporal:
      return "temporal";
    case PriorSource::kSpatial:
      return "spatial";
    case PriorSource::kFallback:
      return "fallback";
  }
  return "fallback";
}

PriorSource parse_prior_source(const std::string& text) {
  if (text == "temporal") return PriorSource::kTemporal;
  if (text == "spatial") return PriorSource::kSpatial;
  if (text == "fallback") return PriorSource::kFallback;
  throw DataError("unknown prior source '" + text + "'");
}

void LagPriorTable::set(LagPrior prior) {
  if (!(prior.params.alpha > 0.0 && prior.params.beta > 0.0)) {
    throw std::invalid_argument("prior shapes must be positive");
  }
  auto key = std::make_pair(prior.area_id, prior.lag);
  entries_[key] = std::move(prior);
}

const LagPrior* LagPriorTable::find(const std::string& area, int lag) const {
  auto it = entries_.find({area, lag});
  return it == entries_.end() ? nullptr : &it->second;
}

const LagPrior* LagPriorTable::lookup(const std::string& area, int lag) const {
  if (auto* p = find(area, lag)) return p;
  // Largest tabulated lag not above `lag`, else the smallest one.
  auto first = entries_.lower_bound({area, 0});
  if (first == entries_.end() || first->first.first != area) return nullptr;
  const LagPrior* best = &first->second;
  for (auto it = first; it != entries_.end() && it->first.first == area; ++it) {
    if (it->first.second <= lag) best = &it->second;
  }
  return best;
}

bool LagPriorTable::has_area(const std::string& area) const {
  auto it = entries_.lower_bound({area, 0});
  return it != entries_.end() && it->first.first == area;
}

MeanVariance temporal_theta_estimate(std::span<const double> rates) {
  if (rates.size() < 2) throw InsufficientData("need at least two reporting rates");
  double n = static_cast<double>(rates.size());
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rates) var += (r - mean) * (r - mean);
  return {mean, var / n};
}

double spatial_theta_estimate(const AdjacencyGraph& graph, const std::string& area, int hops,
                              const std::map<std::string, double>& rates_by_area) {
  auto hood = graph.neighbourhood(area, hops);
  if (hood.empty()) throw InsufficientData("empty neighbourhood for '" + area + "'");
  double sum = 0.0;
  for (const auto& nb : hood) {
    auto it = rates_by_area.find(nb);
    if (it == rates_by_area.end()) throw InsufficientData("no rate for neighbour '" + nb + "'");
    sum += it->second;
  }
  return sum / static_cast<double>(hood.size());
}

BetaBinomialParams moment_match_beta(double m, double v, double epsilon) {
  if (!(m > 0.0 && m < 1.0)) throw std::domain_error("moment matching needs a mean in (0,1)");
  if (!(v >= 0.0)) throw std::domain_error("moment matching needs a non-negative variance");
  if (!(epsilon > 0.0)) throw std::domain_error("epsilon must be positive");
  double cap = m * (1.0 - m) - epsilon;
  if (!(cap > 0.0)) throw std::domain_error("epsilon too large for this mean");
  // A zero variance has no finite match; it takes the clipped value.
  double nu = v > 0.0 ? std::min(v, cap) : cap;
  double alpha = m * m * (1.0 - m) / nu - m;
  double beta = alpha * (1.0 - m) / m;
  return {alpha, beta};
}

std::map<Date, double> converged_rates(const ReportTriangle& triangle, int lag, Date first, Date last) {
  std::map<Date, double> out;
  for (std::size_t i = 0; i < triangle.rows.size(); ++i) {
    const auto& row = triangle.rows[i];
    if (row.test_date < first || row.test_date > last) continue;
    if (!row.converged || !row.final_count || *row.final_count == 0) continue;
    const LagReport* r = row.at_lag(lag);
    if (!r || r->missing) continue;
    out[row.test_date] = reporting_rate(triangle, i, lag);
  }
  return out;
}

namespace {

std::optional<Date> last_converged(const ReportTriangle& tri) {
  for (auto it = tri.rows.rbegin(); it != tri.rows.rend(); ++it) {
    if (it->converged) return it->test_date;
  }
  return std::nullopt;
}

// Empirical rates collapse to a point when counts are small or the lag has
// fully converged; keep the fitted prior proper and close to that point.
BetaBinomialParams fit_rates(MeanVariance mv, double epsilon) {
  constexpr double kEdge = 1e-3;
  double m = std::clamp(mv.mean, kEdge, 1.0 - kEdge);
  double v = std::max(mv.variance, kEdge * m * (1.0 - m));
  return moment_match_beta(m, v, epsilon);
}

}  // namespace

LagPriorTable build_prior_table(const std::vector<ReportTriangle>& triangles, const AdjacencyGraph* graph,
                                const PriorConfig& config) {
  std::map<std::string, const ReportTriangle*> by_area;
  for (const auto& t : triangles) by_area[t.area_id] = &t;

  LagPriorTable table;
  for (const auto& tri : triangles) {
    auto end = last_converged(tri);
    for (int lag = 1; lag <= config.max_lag; ++lag) {
      LagPrior prior;
      prior.area_id = tri.area_id;
      prior.lag = lag;
      prior.params = config.fallback;
      prior.source = PriorSource::kFallback;

      if (end) {
        Date start = add_days(*end, -(config.window_days - 1));
        auto rates = converged_rates(tri, lag, start, *end);
        if (config.exclude_date) rates.erase(*config.exclude_date);
        std::vector<double> values;
        for (auto& [d, r] : rates) values.push_back(r);
        if (values.size() >= 2) {
          prior.params = fit_rates(temporal_theta_estimate(values), config.epsilon);
          prior.source = PriorSource::kTemporal;
          prior.window_start = start;
          prior.window_end = *end;
          table.set(std::move(prior));
          continue;
        }
      }

      if (graph && graph->contains(tri.area_id)) {
        auto hood = graph->neighbourhood(tri.area_id, config.hops);
        std::optional<Date> hood_end;
        for (const auto& nb : hood) {
          auto it = by_area.find(nb);
          if (it == by_area.end()) continue;
          if (auto e = last_converged(*it->second); e && (!hood_end || *e > *hood_end)) hood_end = e;
        }
        if (hood_end && !hood.empty()) {
          Date start = add_days(*hood_end, -(config.window_days - 1));
          std::map<std::string, std::map<Date, double>> nb_rates;
          for (const auto& nb : hood) {
            if (auto it = by_area.find(nb); it != by_area.end()) {
              nb_rates[nb] = converged_rates(*it->second, lag, start, *hood_end);
            }
          }
          std::vector<double> estimates;
          for (Date d = start; d <= *hood_end; d = add_days(d, 1)) {
            std::map<std::string, double> on_day;
            for (const auto& [nb, rates] : nb_rates) {
              if (auto r = rates.find(d); r != rates.end()) on_day[nb] = r->second;
            }
            try {
              estimates.push_back(spatial_theta_estimate(*graph, tri.area_id, config.hops, on_day));
            } catch (const InsufficientData&) {
            }
          }
          if (estimates.size() >= 2) {
            prior.params = fit_rates(temporal_theta_estimate(estimates), config.epsilon);
            prior.source = PriorSource::kSpatial;
            prior.window_start = start;
            prior.window_end = *hood_end;
          }
        }
      }
      table.set(std::move(prior));
    }
  }
  return table;
}

void write_prior_table_csv(std::ostream& out, const LagPriorTable& table) {
  out << "area_id,lag,alpha,beta,source,window_start,window_end\n";
  for (const auto& [key, p] : table.entries()) {
    out << p.area_id << ',' << p.lag << ',' << io::format_real(p.params.alpha) << ','
        << io::format_real(p.params.beta) << ',' << to_string(p.source) << ','
        << (p.window_start ? format_date(*p.window_start) : "") << ','
        << (p.window_end ? format_date(*p.window_end) : "") << '\n';
  }
}

LagPriorTable read_prior_table_csv(std::istream& in) {
  LagPriorTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = io::split_csv(line);
    if (line_no == 1 && !f.empty() && f[0] == "area_id") continue;
    if (f.size() != 7) throw DataError("prior line " + std::to_string(line_no) + ": expected 7 fields");
    LagPrior p;
    p.area_id = f[0];
    try {
      p.lag = std::stoi(f[1]);
      p.params = {std::stod(f[2]), std::stod(f[3])};
    } catch (const std::exception&) {
      throw DataError("prior line " + std::to_string(line_no) + ": bad number");
    }
    p.source = parse_prior_source(f[4]);
    if (!f[5].empty()) p.window_start = parse_date(f[5]);
    if (!f[6].empty()) p.window_end = parse_date(f[6]);
    if (!(p.params.alpha > 0.0 && p.params.beta > 0.0)) {
      throw DataError("prior line " + std::to_string(line_no) + ": shapes must be positive");
    }
    table.set(std::move(p));
  }
  return table;
}

}  // namespace nowcast
