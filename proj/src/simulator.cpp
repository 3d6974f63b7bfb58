#include "nowcast/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include "nowcast/distribution.hpp"
#include "nowcast/io.hpp"

namespace nowcast {

namespace {

constexpr double kLambdaFloor = 1e-3;

}  // namespace

void ScenarioConfig::validate() const {
  if (days < 1) throw std::invalid_argument("scenario needs at least one day");
  if (!(sigma_true >= 0.0)) throw std::invalid_argument("sigma_true must be non-negative");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda0 must be positive");
  if (!kappa_path.empty() && static_cast<int>(kappa_path.size()) != days) {
    throw std::invalid_argument("kappa_path must have one entry per day");
  }
  if (weekend_z && !(*weekend_z >= 0.0 && *weekend_z <= 1.0)) throw std::invalid_argument("weekend_z must lie in [0,1]");
  for (const auto& p : theta_schedule) {
    if (!(p.alpha > 0.0 && p.beta > 0.0)) throw std::invalid_argument("theta shapes must be positive");
  }
  for (const auto& f : faults) {
    if (!(f.fraction >= 0.0 && f.fraction < 1.0)) throw std::invalid_argument("fault fraction must lie in [0,1)");
  }
  if (extra_report_days < 0) throw std::invalid_argument("extra_report_days must be non-negative");
}

Count Simulation::report(std::size_t t, int lag) const {
  if (lag < 1) throw std::out_of_range("reports start at lag 1");
  const auto& row = reports.at(t);
  return row[std::min<std::size_t>(static_cast<std::size_t>(lag), row.size()) - 1];
}

Simulation simulate(const ScenarioConfig& s) {
  s.validate();
  Rng rng(mix_seed(s.seed, 0x51a));
  std::normal_distribution<double> noise(0.0, 1.0);
  const int tau = s.tau();

  Simulation sim;
  sim.truth.reserve(static_cast<std::size_t>(s.days));
  double lambda = s.lambda0;
  double kappa = s.kappa0;
  for (int t = 0; t < s.days; ++t) {
    TruthRow row;
    row.date = add_days(s.start, t);
    if (t > 0) {
      kappa = s.kappa_path.empty() ? kappa + s.sigma_true * noise(rng) : s.kappa_path[static_cast<std::size_t>(t)];
      lambda = std::max(lambda + kappa, kLambdaFloor);
    } else if (!s.kappa_path.empty()) {
      kappa = s.kappa_path[0];
    }
    row.lambda = lambda;
    row.kappa = kappa;
    if (is_weekend(row.date)) {
      row.z = s.weekend_z ? *s.weekend_z : sample_beta(rng, s.weekend_prior.alpha, s.weekend_prior.beta);
    }
    std::poisson_distribution<Count> pois(std::max(row.z * lambda, 1e-12));
    row.x = pois(rng);

    std::vector<double> theta(static_cast<std::size_t>(tau));
    for (int j = 0; j < tau; ++j) {
      const auto& p = s.theta_schedule[static_cast<std::size_t>(j)];
      theta[static_cast<std::size_t>(j)] = sample_beta(rng, p.alpha, p.beta);
    }
    std::sort(theta.begin(), theta.end());

    // Monotone increments: y(j) - y(j-1) ~ Bin(x - y(j-1), (theta_j - theta_{j-1}) / (1 - theta_{j-1})),
    // so y(j) ~ Bin(x, theta_j) marginally.
    std::vector<Count> cum(static_cast<std::size_t>(tau) + 1);
    Count y = 0;
    double prev = 0.0;
    for (int j = 0; j < tau; ++j) {
      double th = theta[static_cast<std::size_t>(j)];
      double p = prev < 1.0 ? std::clamp((th - prev) / (1.0 - prev), 0.0, 1.0) : 0.0;
      std::binomial_distribution<Count> bin(row.x - y, p);
      y += bin(rng);
      cum[static_cast<std::size_t>(j)] = y;
      prev = th;
    }
    cum[static_cast<std::size_t>(tau)] = row.x;

    sim.truth.push_back(row);
    sim.reports.push_back(std::move(cum));
    sim.theta.push_back(std::move(theta));
  }

  const int report_days = s.days + s.extra_report_days;
  for (int r = 1; r <= report_days; ++r) {
    ReportSnapshot snap;
    snap.report_date = add_days(s.start, r);
    for (int t = 0; t < std::min(r, s.days); ++t) {
      snap.entries[{s.area_id, sim.truth[static_cast<std::size_t>(t)].date}] =
          sim.report(static_cast<std::size_t>(t), r - t);
    }
    sim.snapshots.push_back(std::move(snap));
  }
  for (const auto& f : s.faults) sim.snapshots = inject_fault(std::move(sim.snapshots), f.first, f.last, f.fraction);
  return sim;
}

std::vector<ReportSnapshot> inject_fault(std::vector<ReportSnapshot> snapshots, Date first, Date last, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("fault fraction must lie in [0,1)");
  for (auto& snap : snapshots) {
    if (snap.report_date < first || snap.report_date > last) continue;
    for (auto& [key, count] : snap.entries) {
      count = static_cast<Count>(std::floor(static_cast<double>(count) * fraction));
    }
  }
  return snapshots;
}

void write_truth_csv(std::ostream& out, const std::vector<TruthRow>& truth) {
  out << "date,lambda,kappa,z,x\n";
  for (const auto& r : truth) {
    out << format_date(r.date) << ',' << io::format_real(r.lambda) << ',' << io::format_real(r.kappa) << ','
        << io::format_real(r.z) << ',' << r.x << '\n';
  }
}

}  // namespace nowcast
