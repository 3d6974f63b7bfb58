#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nowcast/date.hpp"
#include "nowcast/distribution.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/kernels.hpp"

namespace nowcast {

/// What is known about one test date: its latest cumulative report (if any)
/// and the reporting-rate prior at that report's lag. A report without a
/// thinning prior is treated as the converged, exact count.
struct Observation {
  Date date{};
  std::optional<Count> count;
  std::optional<BetaBinomialParams> thinning;
  int lag = 0;
  bool weekend = false;

  EmissionKernel kernel(const TruncationRule& trunc = {}) const;
};

struct RunConfig {
  double sigma = 5.0;  // random-walk scale of the drift
  int n_particles = 2000;
  int m_smooth = 2000;
  bool weekend_effects = true;
  double weekend_a = 1.0;
  double weekend_b = 1.0;
  double lambda0_shape = 0.0;  // <= 0: taken from the data
  double lambda0_rate = 1.0;
  int burn_in = 1000;  // MH iterations discarded per time step
  int thin = 2;        // chain length per step is burn_in + n_particles * thin
  double proposal_scale = 0.0;  // <= 0: automatic
  double z_proposal_scale = 0.15;
  bool independence_moves = true;  // also propose (ancestor, kappa) straight from the transition
  int evidence_draws = 0;  // <= 0: one per particle
  TruncationRule truncation;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Filtering atoms at one time step. Atoms are MH draws and carry equal weight.
struct ParticleState {
  int t = 0;
  Eigen::ArrayXd lambda;
  Eigen::ArrayXd kappa;
  Eigen::ArrayXd z;           // 1 on weekdays
  Eigen::ArrayXi ancestor;    // index into the previous step's atoms; -1 at t = 0
  double acceptance = 0.0;    // fraction of accepted emission-changing moves

  Eigen::Index size() const { return lambda.size(); }
};

struct ForwardResult {
  std::vector<ParticleState> states;
  std::vector<double> step_log_evidence;  // log p(y_t | y_0:t-1), t = 0 is log p(y_0)

  double log_evidence() const;
};

struct SmoothingResult {
  std::vector<Eigen::ArrayXd> lambda;
  std::vector<Eigen::ArrayXd> kappa;
  std::vector<Eigen::ArrayXd> z;
  std::vector<Eigen::ArrayXi> source;  // filtering atom each smoothing atom was drawn from
  std::vector<int> degenerate_steps;   // steps that fell back to filtering atoms
  double log_evidence = 0.0;

  std::size_t steps() const { return lambda.size(); }
};

/// Gamma(shape, rate) prior on the initial intensity, resolved from the
/// config or, when unset, from the data: the mean of the last seven exact
/// counts (or of reports scaled by their prior mean rate), with rate 1.
std::pair<double, double> resolve_lambda0_prior(std::span<const Observation> observations, const RunConfig& config);

/// MH draws from p(lambda_0, z_0 | y_0) with kappa_0 ~ N(0, sigma^2).
ParticleState filter_init(const Observation& y0, const RunConfig& config, std::pair<double, double> lambda0_prior);

/// One forward step: MH on the mixture potential
///   p(y_t | lambda_t z_t) p(z_t) (1/N) sum_i delta(lambda_t - kappa_t - Lambda_i) N(kappa_t; K_i, sigma^2),
/// with the chain state (kappa_t, ancestor i, z_t).
ParticleState filter_step(const ParticleState& prev, const Observation& y, const RunConfig& config);

/// Monte Carlo estimate of log p(y_t | y_0:t-1) from the previous step's
/// atoms; `prev == nullptr` gives log p(y_0) under the initial prior.
double step_log_evidence(const ParticleState* prev, const Observation& y, const RunConfig& config,
                         std::pair<double, double> lambda0_prior);

ForwardResult run_forward(std::span<const Observation> observations, const RunConfig& config);

/// Sum of the per-step terms.
double log_evidence(const ForwardResult& forward);

/// Backward pass: smoothing atoms at T are the filtering atoms; earlier steps
/// multinomially resample filtering atoms with weights
/// (1/M) sum_j 1[ancestor(j) = i] N(kappa_{t+1}^j; K_t^i, sigma^2) / w_*j.
SmoothingResult backward_smooth(const ForwardResult& forward, const RunConfig& config);

/// p(x_t | y_0:T) for every t from the smoothing atoms.
std::vector<CountDistribution> smooth_counts(const SmoothingResult& smoothing, std::span<const Observation> observations,
                                             const RunConfig& config);

/// Discretised posterior of a weekend multiplier.
struct WeekendPosterior {
  Eigen::VectorXd grid;
  Eigen::VectorXd probs;

  double mean() const { return grid.dot(probs); }
};

/// p(z_t | y_0:T) averaged over the smoothing atoms of lambda_t; a point mass
/// at 1 on weekdays or when weekend effects are off.
WeekendPosterior weekend_posterior(const SmoothingResult& smoothing, std::size_t t, const Observation& y,
                                   const RunConfig& config, int grid_size = 100);

/// One-step-ahead count predictive p(x_{t+1} | y_0:t) from filtering atoms.
CountDistribution predictive_counts(const ParticleState& state, bool next_weekend, const RunConfig& config);

}  // namespace nowcast
