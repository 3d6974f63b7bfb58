#include "nowcast/kernels.hpp"

#include <algorithm>
#include <limits>

#include "nowcast/error.hpp"

namespace nowcast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::ArrayXd& terms) {
  double m = terms.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((terms - m).exp().sum());
}

}  // namespace

CountPrior CountPrior::flat(std::int64_t lo, std::int64_t hi) {
  if (lo < 0 || hi < lo) throw std::invalid_argument("count prior needs 0 <= lo <= hi");
  return CountPrior{lo, hi, {}};
}

double CountPrior::weight(std::int64_t x) const {
  if (x < lo || x > hi) return 0.0;
  if (weights.size() == 0) return 1.0 / static_cast<double>(hi - lo + 1);
  return weights[x - lo];
}

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double log_poisson_pmf(std::int64_t x, double mean) {
  if (x < 0) return kNegInf;
  if (mean <= 0.0) return x == 0 ? 0.0 : kNegInf;
  auto xd = static_cast<double>(x);
  return (x == 0 ? 0.0 : xd * std::log(mean)) - mean - std::lgamma(xd + 1.0);
}

double log_beta_binomial_pmf(std::int64_t y, std::int64_t x, const BetaBinomialParams& p) {
  if (y < 0 || y > x) return kNegInf;
  auto xd = static_cast<double>(x);
  auto yd = static_cast<double>(y);
  double log_choose = std::lgamma(xd + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(xd - yd + 1.0);
  return log_choose + log_beta_fn(yd + p.alpha, xd - yd + p.beta) - log_beta_fn(p.alpha, p.beta);
}

double beta_binomial_pmf(std::int64_t y, std::int64_t x, const BetaBinomialParams& params) {
  return std::exp(log_beta_binomial_pmf(y, x, params));
}

double log_binomial_pmf(std::int64_t y, std::int64_t x, double theta) {
  if (y < 0 || y > x) return kNegInf;
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::domain_error("binomial rate outside [0,1]");
  auto xd = static_cast<double>(x);
  auto yd = static_cast<double>(y);
  double lp = std::lgamma(xd + 1.0) - std::lgamma(yd + 1.0) - std::lgamma(xd - yd + 1.0);
  if (y > 0) lp += theta > 0.0 ? yd * std::log(theta) : kNegInf;
  if (x > y) lp += theta < 1.0 ? (xd - yd) * std::log1p(-theta) : kNegInf;
  return lp;
}

namespace {

template <typename LogLik>
CountDistribution count_posterior(std::int64_t y, const CountPrior& prior, LogLik&& log_lik) {
  std::int64_t lo = std::max(prior.lo, y);
  if (lo > prior.hi) throw InfeasibleObservation("report exceeds every supported count");
  Eigen::ArrayXd logw(prior.hi - lo + 1);
  for (std::int64_t x = lo; x <= prior.hi; ++x) {
    double w = prior.weight(x);
    logw[x - lo] = w > 0.0 ? std::log(w) + log_lik(x) : kNegInf;
  }
  double m = logw.maxCoeff();
  if (!std::isfinite(m)) throw InfeasibleObservation("zero posterior mass");
  CountDistribution post;
  post.lo = lo;
  post.probs = (logw - m).exp().matrix();
  post.normalize();
  return post;
}

}  // namespace

CountDistribution posterior_x_given_y(std::int64_t y, const BetaBinomialParams& params, const CountPrior& prior) {
  return count_posterior(y, prior, [&](std::int64_t x) { return log_beta_binomial_pmf(y, x, params); });
}

CountDistribution posterior_x_given_y(std::int64_t y, double theta, const CountPrior& prior) {
  return count_posterior(y, prior, [&](std::int64_t x) { return log_binomial_pmf(y, x, theta); });
}

EmissionKernel::EmissionKernel(std::int64_t y, std::optional<BetaBinomialParams> thinning, TruncationRule trunc)
    : observed_(true), y_(y), thinning_(thinning), trunc_(trunc) {
  if (y < 0) throw std::invalid_argument("negative report");
  if (thinning_ && !(thinning_->alpha > 0.0 && thinning_->beta > 0.0)) {
    throw std::invalid_argument("beta-binomial shapes must be positive");
  }
}

void EmissionKernel::ensure(std::int64_t hi) const {
  auto have = static_cast<std::int64_t>(base_.size());
  auto need = hi - y_ + 1;
  if (need <= have) return;
  need = std::max<std::int64_t>(need, have * 3 / 2 + 16);
  Eigen::ArrayXd base(need), xs(need);
  base.head(have) = base_;
  xs.head(have) = xs_;
  for (std::int64_t k = have; k < need; ++k) {
    std::int64_t x = y_ + k;
    auto xd = static_cast<double>(x);
    xs[k] = xd;
    base[k] = log_beta_binomial_pmf(y_, x, *thinning_) - std::lgamma(xd + 1.0);
  }
  base_ = std::move(base);
  xs_ = std::move(xs);
}

double EmissionKernel::log_likelihood(double mu) const {
  if (!observed_) return 0.0;
  if (!(mu > 0.0)) return kNegInf;
  if (!thinning_) return log_poisson_pmf(y_, mu);
  std::int64_t lo = std::max(y_, trunc_.lower(mu));
  std::int64_t hi = std::max(y_, trunc_.upper(mu));
  ensure(hi);
  auto n = static_cast<Eigen::Index>(hi - lo + 1);
  auto off = static_cast<Eigen::Index>(lo - y_);
  Eigen::ArrayXd terms = xs_.segment(off, n) * std::log(mu) + base_.segment(off, n);
  return log_sum_exp(terms) - mu;
}

double EmissionKernel::log_count_likelihood(std::int64_t x) const {
  if (!observed_) return 0.0;
  if (!thinning_) return x == y_ ? 0.0 : kNegInf;
  return log_beta_binomial_pmf(y_, x, *thinning_);
}

void EmissionKernel::log_count_likelihoods(std::int64_t lo, Eigen::Ref<Eigen::ArrayXd> out) const {
  if (!observed_) {
    out.setZero();
    return;
  }
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = log_count_likelihood(lo + k);
}

double log_poisson_bb_likelihood(double lambda, std::int64_t y, const BetaBinomialParams& params,
                                 const TruncationRule& trunc) {
  EmissionKernel kernel(y, params, trunc);
  return kernel.log_likelihood(lambda);
}

double poisson_bb_likelihood(double lambda, std::int64_t y, const BetaBinomialParams& params,
                             const TruncationRule& trunc) {
  return std::exp(log_poisson_bb_likelihood(lambda, y, params, trunc));
}

}  // namespace nowcast
