#pragma once

#include <cstdint>
#include <vector>

// Brute-force reference computations, written without the library.
namespace oracle {

/// p(x | y(1..J)) on [0, x_max] under a flat prior, from the full multinomial
/// likelihood of the increments y(j) - y(j-1) with cell probabilities
/// theta_j - theta_{j-1} and the unreported remainder 1 - theta_J.
std::vector<double> multinomial_increment_posterior(const std::vector<std::int64_t>& cumulative,
                                                    const std::vector<double>& theta, std::int64_t x_max);

/// p(x | y) on [0, x_max] under a flat prior with binomial thinning, by direct
/// evaluation of C(x,y) theta^y (1-theta)^(x-y).
std::vector<double> binomial_posterior(std::int64_t y, double theta, std::int64_t x_max);

/// sum_x Poisson(x; lambda) BetaBinomial(y | x, a, b), summed until the
/// Poisson tail is negligible.
double poisson_beta_binomial(double lambda, std::int64_t y, double a, double b);

/// log of int Gamma(lambda; shape, rate) p(y | lambda) d lambda by Simpson's
/// rule on a fine grid covering the prior mass.
double log_evidence_quadrature(std::int64_t y, double a, double b, double shape, double rate);

/// Mean and variance of Beta(a, b) from the closed forms.
double beta_mean(double a, double b);
double beta_variance(double a, double b);

/// Exact Gamma-Poisson posterior mean of lambda after one exact count.
inline double gamma_poisson_posterior_mean(double shape, double rate, std::int64_t x) {
  return (shape + static_cast<double>(x)) / (rate + 1.0);
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace oracle
