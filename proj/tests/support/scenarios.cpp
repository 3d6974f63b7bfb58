#include "scenarios.hpp"

namespace scenarios {

using namespace nowcast;

Area simulate_area(const ScenarioConfig& config) {
  Area a;
  a.sim = simulate(config);
  a.triangle = mark_convergence(build_triangle(a.sim.snapshots, config.area_id));
  return a;
}

std::vector<Observation> exact_observations(const Simulation& sim) {
  std::vector<Observation> out;
  for (const auto& r : sim.truth) {
    Observation o;
    o.date = r.date;
    o.weekend = is_weekend(r.date);
    o.count = r.x;
    o.lag = 7;
    out.push_back(o);
  }
  return out;
}

BetaBinomialParams near_one() { return {1e6, 1.0}; }

RunConfig quick_config(double sigma, std::uint64_t seed, int particles) {
  RunConfig c;
  c.sigma = sigma;
  c.n_particles = particles;
  c.m_smooth = particles;
  c.burn_in = 300;
  c.seed = seed;
  return c;
}

}  // namespace scenarios
