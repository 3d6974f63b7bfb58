#include "nowcast/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nowcast {

CountDistribution CountDistribution::point_mass(std::int64_t x) {
  CountDistribution d;
  d.lo = x;
  d.probs = Eigen::VectorXd::Ones(1);
  return d;
}

double CountDistribution::pmf(std::int64_t x) const {
  if (x < lo || x > hi()) return 0.0;
  return probs[x - lo];
}

double CountDistribution::mean() const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) m += probs[k] * static_cast<double>(lo + k);
  return m;
}

double CountDistribution::variance() const {
  double m = mean();
  double v = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    double d = static_cast<double>(lo + k) - m;
    v += probs[k] * d * d;
  }
  return v;
}

std::int64_t CountDistribution::quantile(double q) const {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (acc >= q - 1e-12) return lo + k;
  }
  return hi();
}

std::int64_t CountDistribution::mode() const {
  Eigen::Index best = 0;
  probs.maxCoeff(&best);
  return lo + best;
}

void CountDistribution::normalize() {
  double s = probs.sum();
  if (s > 0.0) probs /= s;
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  auto below = static_cast<std::size_t>(std::floor(pos));
  auto above = std::min(below + 1, values.size() - 1);
  double frac = pos - static_cast<double>(below);
  return values[below] + frac * (values[above] - values[below]);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0x632be59bd9b4e019ull));
}

double sample_beta(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng);
  double y = gb(rng);
  if (x + y <= 0.0) return a / (a + b);
  return x / (x + y);
}

}  // namespace nowcast
