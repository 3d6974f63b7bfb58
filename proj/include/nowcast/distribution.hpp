#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace nowcast {

/// Probability mass over the contiguous integer support [lo, lo + size).
struct CountDistribution {
  std::int64_t lo = 0;
  Eigen::VectorXd probs;

  static CountDistribution point_mass(std::int64_t x);

  std::int64_t hi() const { return lo + static_cast<std::int64_t>(probs.size()) - 1; }
  double pmf(std::int64_t x) const;
  double mean() const;
  double variance() const;
  /// Smallest x with P(X <= x) >= q.
  std::int64_t quantile(double q) const;
  std::int64_t mode() const;
  double total() const { return probs.sum(); }
  void normalize();
};

/// Empirical quantile of a sample (linear interpolation between order
/// statistics, same convention as numpy's default).
double sample_quantile(std::vector<double> values, double q);

/// Derives independent 64-bit seeds from a base seed and stream labels.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

using Rng = std::mt19937_64;

/// Draws from Beta(a, b) by the ratio of gammas.
double sample_beta(Rng& rng, double a, double b);

}  // namespace nowcast
