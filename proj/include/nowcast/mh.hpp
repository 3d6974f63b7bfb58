#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "nowcast/distribution.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

struct MHConfig {
  int steps = 20000;
  int burn_in = 2000;
  int thin = 5;
  double proposal_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (steps <= 0 || burn_in < 0 || steps <= burn_in || thin < 1 || !(proposal_scale > 0.0)) {
      throw std::invalid_argument("MHConfig: need steps > burn_in >= 0, thin >= 1, proposal_scale > 0");
    }
  }
  /// Number of atoms mh_sample returns.
  int atoms() const { return (steps - burn_in) / thin; }
};

/// Random-walk Metropolis with symmetric normal proposals on a scalar.
/// Returns every `thin`-th state after `burn_in`; a log potential of -inf
/// marks states outside the support, so proposals there are always rejected.
template <typename LogPotential>
std::vector<double> mh_sample(LogPotential&& log_potential, double init, const MHConfig& config) {
  config.validate();
  double current = init;
  double current_lp = log_potential(current);
  if (!std::isfinite(current_lp)) throw DegenerateState("log potential is not finite at the initial state");

  Rng rng(config.seed);
  std::normal_distribution<double> step(0.0, config.proposal_scale);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> atoms;
  atoms.reserve(static_cast<std::size_t>(config.atoms()));
  for (int i = 0; i < config.steps; ++i) {
    double proposal = current + step(rng);
    double lp = log_potential(proposal);
    if (lp > -INFINITY && std::log(unif(rng)) < lp - current_lp) {
      current = proposal;
      current_lp = lp;
    }
    int kept = i + 1 - config.burn_in;
    if (kept > 0 && kept % config.thin == 0) atoms.push_back(current);
  }
  return atoms;
}

}  // namespace nowcast
