#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "nowcast/distribution.hpp"

namespace nowcast {

/// Beta prior on a reporting rate; both shapes strictly positive.
struct BetaBinomialParams {
  double alpha = 1.0;
  double beta = 1.0;

  double mean() const { return alpha / (alpha + beta); }
  double variance() const {
    double s = alpha + beta;
    return alpha * beta / (s * s * (s + 1.0));
  }
};

/// Prior over the true count on a finite support; flat unless weights given.
struct CountPrior {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  Eigen::VectorXd weights;  // empty means flat

  static CountPrior flat(std::int64_t lo, std::int64_t hi);
  double weight(std::int64_t x) const;
};

double log_beta_fn(double a, double b);
double log_poisson_pmf(std::int64_t x, double mean);

/// log C(x,y) B(y+a, x-y+b) / B(a,b); -inf when y > x.
double log_beta_binomial_pmf(std::int64_t y, std::int64_t x, const BetaBinomialParams& params);
double beta_binomial_pmf(std::int64_t y, std::int64_t x, const BetaBinomialParams& params);

/// Exact posterior p(x | y) over the prior support. Throws InfeasibleObservation
/// when no supported count can produce `y`.
CountDistribution posterior_x_given_y(std::int64_t y, const BetaBinomialParams& params, const CountPrior& prior);
/// Same with a known reporting rate: binomial thinning.
CountDistribution posterior_x_given_y(std::int64_t y, double theta, const CountPrior& prior);

/// log C(x,y) theta^y (1-theta)^(x-y).
double log_binomial_pmf(std::int64_t y, std::int64_t x, double theta);

/// Window of true counts summed over for a Poisson mean `mu`. The upper end
/// ceil(mu + 10 sqrt(mu)) + 50 leaves tail mass below 1e-12; the lower end
/// mirrors it and only skips terms that are equally negligible.
struct TruncationRule {
  double sd_multiple = 10.0;
  std::int64_t pad = 50;

  std::int64_t upper(double mu) const {
    return static_cast<std::int64_t>(std::ceil(mu + sd_multiple * std::sqrt(mu))) + pad;
  }
  std::int64_t lower(double mu) const {
    auto v = static_cast<std::int64_t>(std::floor(mu - sd_multiple * std::sqrt(mu))) - pad;
    return v < 0 ? 0 : v;
  }
};

/// Likelihood of a single cumulative report given the Poisson intensity,
/// p(y | mu) = sum_x Poisson(x; mu) p(y | x), with p(y | x) beta-binomial for
/// a thinned report or an indicator for an exact (converged) one. Per-count
/// terms are cached, so one kernel serves every evaluation for a given report.
class EmissionKernel {
 public:
  /// No report: the likelihood is identically 1.
  EmissionKernel() = default;
  /// Thinned report when `thinning` is set, exact count otherwise.
  EmissionKernel(std::int64_t y, std::optional<BetaBinomialParams> thinning, TruncationRule trunc = {});

  bool observed() const { return observed_; }
  bool exact() const { return observed_ && !thinning_; }
  std::int64_t report() const { return y_; }
  const std::optional<BetaBinomialParams>& thinning() const { return thinning_; }
  const TruncationRule& truncation() const { return trunc_; }

  /// log p(y | mu); 0 when unobserved, -inf for mu <= 0 with y > 0.
  double log_likelihood(double mu) const;
  /// log p(y | x) for a single true count.
  double log_count_likelihood(std::int64_t x) const;

  /// Fills `out` with log p(y | x) for x in [lo, lo + out.size()).
  void log_count_likelihoods(std::int64_t lo, Eigen::Ref<Eigen::ArrayXd> out) const;

 private:
  void ensure(std::int64_t hi) const;

  bool observed_ = false;
  std::int64_t y_ = 0;
  std::optional<BetaBinomialParams> thinning_;
  TruncationRule trunc_;
  // base_[k] = log p(y | x) - lgamma(x + 1) for x = y + k.
  mutable Eigen::ArrayXd base_;
  mutable Eigen::ArrayXd xs_;
};

/// Truncation-controlled p(y | lambda): a fresh kernel per call, for one-off use.
double poisson_bb_likelihood(double lambda, std::int64_t y, const BetaBinomialParams& params,
                             const TruncationRule& trunc = {});
double log_poisson_bb_likelihood(double lambda, std::int64_t y, const BetaBinomialParams& params,
                                 const TruncationRule& trunc = {});

}  // namespace nowcast
