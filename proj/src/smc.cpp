#include "nowcast/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nowcast/error.hpp"

namespace nowcast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// RNG stream labels.
constexpr std::uint64_t kFilterStream = 1;
constexpr std::uint64_t kEvidenceStream = 2;
constexpr std::uint64_t kSmoothStream = 3;
constexpr std::uint64_t kPredictStream = 4;

double log_beta_density(double z, double a, double b) {
  if (z <= 0.0 || z >= 1.0) return kNegInf;
  double lp = -log_beta_fn(a, b);
  if (a != 1.0) lp += (a - 1.0) * std::log(z);
  if (b != 1.0) lp += (b - 1.0) * std::log1p(-z);
  return lp;
}

// Symmetric random walk on [0,1] with reflection at the edges.
double reflect_unit(double z) {
  while (z < 0.0 || z > 1.0) z = z < 0.0 ? -z : 2.0 - z;
  return z;
}

double log_mean_exp(const std::vector<double>& terms) {
  if (terms.empty()) return kNegInf;
  double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s / static_cast<double>(terms.size()));
}

bool weekend_active(const Observation& y, const RunConfig& config) { return config.weekend_effects && y.weekend; }

// Distinct values with multiplicities.
std::vector<std::pair<double, double>> group_values(const Eigen::ArrayXd& values) {
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  for (double x : v) {
    if (!out.empty() && out.back().first == x) {
      out.back().second += 1.0;
    } else {
      out.emplace_back(x, 1.0);
    }
  }
  return out;
}

// sum_k w_k Poisson(x; mu_k) p(y | x), normalised, for (mu_k, log w_k) pairs.
CountDistribution poisson_mixture(const std::vector<std::pair<double, double>>& components, const EmissionKernel& em,
                                  const TruncationRule& trunc) {
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = 0;
  double shift = kNegInf;
  for (auto [mu, lw] : components) {
    if (!std::isfinite(lw)) continue;
    lo = std::min(lo, trunc.lower(mu));
    hi = std::max(hi, trunc.upper(mu));
    shift = std::max(shift, lw);
  }
  if (!std::isfinite(shift)) throw DegenerateState("no admissible intensity for the count posterior");
  if (em.observed()) {
    lo = std::max(lo, em.report());
    hi = std::max(hi, lo);
  }

  auto n = static_cast<Eigen::Index>(hi - lo + 1);
  Eigen::ArrayXd xs = Eigen::ArrayXd::LinSpaced(n, static_cast<double>(lo), static_cast<double>(hi));
  Eigen::ArrayXd log_fact = xs.unaryExpr([](double x) { return std::lgamma(x + 1.0); });
  Eigen::ArrayXd mass = Eigen::ArrayXd::Zero(n);
  for (auto [mu, lw] : components) {
    if (!std::isfinite(lw)) continue;
    std::int64_t a = std::max(lo, trunc.lower(mu));
    std::int64_t b = std::min(hi, trunc.upper(mu));
    if (b < a) continue;
    auto off = static_cast<Eigen::Index>(a - lo);
    auto len = static_cast<Eigen::Index>(b - a + 1);
    double log_mu = mu > 0.0 ? std::log(mu) : kNegInf;
    if (mu <= 0.0) {
      if (a == 0) mass[0] += std::exp(lw - shift);
      continue;
    }
    mass.segment(off, len) +=
        (xs.segment(off, len) * log_mu - mu - log_fact.segment(off, len) + (lw - shift)).exp();
  }

  if (em.observed()) {
    Eigen::ArrayXd ll(n);
    em.log_count_likelihoods(lo, ll);
    double top = kNegInf;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (mass[k] > 0.0) top = std::max(top, ll[k]);
    }
    if (!std::isfinite(top)) throw InfeasibleObservation("report has zero probability under every count");
    mass *= (ll - top).exp();
  }

  Eigen::Index first = 0, last = n - 1;
  double total = mass.sum();
  if (!(total > 0.0)) throw DegenerateState("count posterior has no mass");
  const double tiny = total * 1e-15;
  while (first < last && mass[first] <= tiny) ++first;
  while (last > first && mass[last] <= tiny) --last;

  CountDistribution out;
  out.lo = lo + first;
  out.probs = mass.segment(first, last - first + 1).matrix();
  out.normalize();
  return out;
}

}  // namespace

EmissionKernel Observation::kernel(const TruncationRule& trunc) const {
  if (!count) return EmissionKernel{};
  return EmissionKernel(*count, thinning, trunc);
}

void RunConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
  if (n_particles < 100) throw std::invalid_argument("need at least 100 particles");
  if (m_smooth < 100) throw std::invalid_argument("need at least 100 smoothing atoms");
  if (burn_in < 0 || thin < 1) throw std::invalid_argument("need burn_in >= 0 and thin >= 1");
  if (!(weekend_a > 0.0 && weekend_b > 0.0)) throw std::invalid_argument("weekend prior shapes must be positive");
  if (!(lambda0_rate > 0.0)) throw std::invalid_argument("initial intensity rate must be positive");
  if (!(z_proposal_scale > 0.0)) throw std::invalid_argument("z proposal scale must be positive");
}

double ForwardResult::log_evidence() const {
  return std::accumulate(step_log_evidence.begin(), step_log_evidence.end(), 0.0);
}

double log_evidence(const ForwardResult& forward) { return forward.log_evidence(); }

std::pair<double, double> resolve_lambda0_prior(std::span<const Observation> observations, const RunConfig& config) {
  if (config.lambda0_shape > 0.0) return {config.lambda0_shape, config.lambda0_rate};
  double sum = 0.0;
  int n = 0;
  for (const auto& y : observations) {
    if (!y.count) continue;
    double scale = y.thinning ? y.thinning->mean() : 1.0;
    sum += static_cast<double>(*y.count) / scale;
    if (++n == 7) break;
  }
  double mean = n > 0 ? std::max(sum / n, 1.0) : 1.0;
  return {mean * config.lambda0_rate, config.lambda0_rate};
}

ParticleState filter_init(const Observation& y0, const RunConfig& config, std::pair<double, double> lambda0_prior) {
  config.validate();
  auto [a, b] = lambda0_prior;
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("initial intensity prior shapes must be positive");
  const EmissionKernel em = y0.kernel(config.truncation);
  const bool wk = weekend_active(y0, config);

  auto log_target = [&](double lam, double z) {
    if (!(lam > 0.0)) return kNegInf;
    double lp = (a - 1.0) * std::log(lam) - b * lam + em.log_likelihood(lam * z);
    if (wk) lp += log_beta_density(z, config.weekend_a, config.weekend_b);
    return lp;
  };

  double lam = a / b;
  double z = wk ? config.weekend_a / (config.weekend_a + config.weekend_b) : 1.0;
  double cur = log_target(lam, z);
  if (!std::isfinite(cur)) throw DegenerateState("initial state has zero density");

  const double scale =
      config.proposal_scale > 0.0 ? config.proposal_scale : 1.5 * std::min(std::sqrt(a) / b, std::sqrt(a / b + 1.0));
  const int n = config.n_particles;
  Rng rng(mix_seed(config.seed, kFilterStream, 0));
  std::normal_distribution<double> step(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ParticleState out;
  out.t = 0;
  out.lambda.resize(n);
  out.kappa.resize(n);
  out.z.resize(n);
  out.ancestor = Eigen::ArrayXi::Constant(n, -1);

  long accepted = 0, proposed = 0;
  const long total = config.burn_in + static_cast<long>(n) * config.thin;
  int kept = 0;
  for (long it = 0; it < total; ++it) {
    double prop = lam + scale * step(rng);
    double lp = log_target(prop, z);
    ++proposed;
    if (lp > kNegInf && std::log(unif(rng)) < lp - cur) {
      lam = prop;
      cur = lp;
      ++accepted;
    }
    if (wk) {
      double zp = reflect_unit(z + config.z_proposal_scale * step(rng));
      double lz = log_target(lam, zp);
      if (lz > kNegInf && std::log(unif(rng)) < lz - cur) {
        z = zp;
        cur = lz;
      }
    }
    long after = it + 1 - config.burn_in;
    if (after > 0 && after % config.thin == 0 && kept < n) {
      out.lambda[kept] = lam;
      out.z[kept] = z;
      ++kept;
    }
  }

  std::normal_distribution<double> drift(0.0, config.sigma);
  Rng krng(mix_seed(config.seed, kFilterStream, 1u << 31));
  for (int i = 0; i < n; ++i) out.kappa[i] = drift(krng);
  out.acceptance = static_cast<double>(accepted) / static_cast<double>(proposed);
  return out;
}

ParticleState filter_step(const ParticleState& prev, const Observation& y, const RunConfig& config) {
  config.validate();
  const Eigen::Index np = prev.size();
  if (np == 0) throw DegenerateState("no atoms to propagate");
  const EmissionKernel em = y.kernel(config.truncation);
  const bool wk = weekend_active(y, config);
  const double sigma = config.sigma;
  const double inv2s2 = 0.5 / (sigma * sigma);
  const Eigen::ArrayXd& big_lambda = prev.lambda;
  const Eigen::ArrayXd& big_kappa = prev.kappa;

  auto log_trans = [&](double kappa, Eigen::Index i) {
    double d = kappa - big_kappa[i];
    return -d * d * inv2s2;
  };
  auto log_z = [&](double z) { return wk ? log_beta_density(z, config.weekend_a, config.weekend_b) : 0.0; };

  Rng rng(mix_seed(config.seed, kFilterStream, static_cast<std::uint64_t>(prev.t + 1)));
  std::normal_distribution<double> step(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, np - 1);

  // Start from the predictive mean of a random ancestor with positive intensity.
  Eigen::Index i = pick(rng);
  double kappa = big_kappa[i];
  for (int tries = 0; big_lambda[i] + kappa <= 0.0 && tries < 4 * np; ++tries) {
    i = pick(rng);
    kappa = big_kappa[i];
  }
  if (big_lambda[i] + kappa <= 0.0) kappa = -big_lambda[i] + 1e-6;
  double z = wk ? config.weekend_a / (config.weekend_a + config.weekend_b) : 1.0;
  double lam = big_lambda[i] + kappa;
  double cur_em = em.log_likelihood(lam * z);
  double cur_tr = log_trans(kappa, i);
  double cur_z = log_z(z);
  if (!std::isfinite(cur_em + cur_tr + cur_z)) throw DegenerateState("no admissible starting state");

  const double scale = config.proposal_scale > 0.0
                           ? config.proposal_scale
                           : (em.observed() ? std::min(sigma, std::sqrt(std::max(big_lambda.mean(), 0.0) + 1.0)) : sigma);

  const int n = config.n_particles;
  ParticleState out;
  out.t = prev.t + 1;
  out.lambda.resize(n);
  out.kappa.resize(n);
  out.z.resize(n);
  out.ancestor.resize(n);

  long accepted = 0, proposed = 0;
  const long total = config.burn_in + static_cast<long>(n) * config.thin;
  int kept = 0;
  for (long it = 0; it < total; ++it) {
    // Fresh draw from the transition mixture; its density cancels against the
    // prior term, leaving the emission ratio.
    if (config.independence_moves) {
      Eigen::Index ip = pick(rng);
      double kp = big_kappa[ip] + sigma * step(rng);
      double lp_lam = big_lambda[ip] + kp;
      ++proposed;
      if (lp_lam > 0.0) {
        double e = em.log_likelihood(lp_lam * z);
        if (e > kNegInf && std::log(unif(rng)) < e - cur_em) {
          i = ip;
          kappa = kp;
          lam = lp_lam;
          cur_em = e;
          cur_tr = log_trans(kp, ip);
          ++accepted;
        }
      }
    }
    // Drift random walk, with a fresh uniform ancestor on every other proposal.
    {
      Eigen::Index ip = (it % 2 == 0) ? pick(rng) : i;
      double kp = kappa + scale * step(rng);
      double lp_lam = big_lambda[ip] + kp;
      ++proposed;
      if (lp_lam > 0.0) {
        double e = em.log_likelihood(lp_lam * z);
        double tr = log_trans(kp, ip);
        if (e > kNegInf && std::log(unif(rng)) < (e + tr) - (cur_em + cur_tr)) {
          i = ip;
          kappa = kp;
          lam = lp_lam;
          cur_em = e;
          cur_tr = tr;
          ++accepted;
        }
      }
    }
    // Ancestor swap holding the intensity fixed; the emission term cancels.
    {
      Eigen::Index ip = pick(rng);
      double kp = lam - big_lambda[ip];
      double tr = log_trans(kp, ip);
      if (std::log(unif(rng)) < tr - cur_tr) {
        i = ip;
        kappa = kp;
        cur_tr = tr;
      }
    }
    if (wk) {
      double zp = reflect_unit(z + config.z_proposal_scale * step(rng));
      double e = em.log_likelihood(lam * zp);
      double lz = log_z(zp);
      if (e > kNegInf && std::log(unif(rng)) < (e + lz) - (cur_em + cur_z)) {
        z = zp;
        cur_em = e;
        cur_z = lz;
      }
    }
    long after = it + 1 - config.burn_in;
    if (after > 0 && after % config.thin == 0 && kept < n) {
      out.lambda[kept] = lam;
      out.kappa[kept] = kappa;
      out.z[kept] = z;
      out.ancestor[kept] = static_cast<int>(i);
      ++kept;
    }
  }
  out.acceptance = static_cast<double>(accepted) / static_cast<double>(proposed);
  return out;
}

double step_log_evidence(const ParticleState* prev, const Observation& y, const RunConfig& config,
                         std::pair<double, double> lambda0_prior) {
  if (!y.count) return 0.0;
  const EmissionKernel em = y.kernel(config.truncation);
  const bool wk = weekend_active(y, config);
  const int draws = config.evidence_draws > 0 ? config.evidence_draws : config.n_particles;
  const int t = prev ? prev->t + 1 : 0;
  Rng rng(mix_seed(config.seed, kEvidenceStream, static_cast<std::uint64_t>(t)));
  std::normal_distribution<double> drift(0.0, config.sigma);

  std::vector<double> terms(static_cast<std::size_t>(draws));
  for (int s = 0; s < draws; ++s) {
    double lam;
    if (prev) {
      Eigen::Index i = s % prev->size();
      lam = prev->lambda[i] + prev->kappa[i] + drift(rng);
    } else {
      std::gamma_distribution<double> g(lambda0_prior.first, 1.0 / lambda0_prior.second);
      lam = g(rng);
    }
    double z = wk ? sample_beta(rng, config.weekend_a, config.weekend_b) : 1.0;
    terms[static_cast<std::size_t>(s)] = lam > 0.0 ? em.log_likelihood(lam * z) : kNegInf;
  }
  return log_mean_exp(terms);
}

ForwardResult run_forward(std::span<const Observation> observations, const RunConfig& config) {
  config.validate();
  if (observations.empty()) throw InsufficientData("no time steps to filter");
  auto prior = resolve_lambda0_prior(observations, config);
  ForwardResult out;
  out.states.reserve(observations.size());
  out.step_log_evidence.reserve(observations.size());
  out.step_log_evidence.push_back(step_log_evidence(nullptr, observations[0], config, prior));
  out.states.push_back(filter_init(observations[0], config, prior));
  for (std::size_t t = 1; t < observations.size(); ++t) {
    out.step_log_evidence.push_back(step_log_evidence(&out.states.back(), observations[t], config, prior));
    out.states.push_back(filter_step(out.states.back(), observations[t], config));
  }
  return out;
}

SmoothingResult backward_smooth(const ForwardResult& forward, const RunConfig& config) {
  config.validate();
  const auto& states = forward.states;
  if (states.empty()) throw InsufficientData("nothing to smooth");
  const std::size_t steps = states.size();
  const int m = config.m_smooth;
  const double inv2s2 = 0.5 / (config.sigma * config.sigma);

  SmoothingResult out;
  out.lambda.resize(steps);
  out.kappa.resize(steps);
  out.z.resize(steps);
  out.source.resize(steps);
  out.log_evidence = forward.log_evidence();

  Rng rng(mix_seed(config.seed, kSmoothStream, 0));
  auto take = [&](std::size_t t, const Eigen::ArrayXi& src) {
    const auto& s = states[t];
    out.source[t] = src;
    out.lambda[t] = s.lambda(src);
    out.kappa[t] = s.kappa(src);
    out.z[t] = s.z(src);
  };
  auto uniform_draw = [&](Eigen::Index n) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
    Eigen::ArrayXi src(m);
    for (int j = 0; j < m; ++j) src[j] = pick(rng);
    return src;
  };

  const std::size_t last = steps - 1;
  if (states[last].size() == m) {
    take(last, Eigen::ArrayXi::LinSpaced(m, 0, m - 1));
  } else {
    take(last, uniform_draw(states[last].size()));
  }

  for (std::size_t t = last; t-- > 0;) {
    const auto& next = states[t + 1];
    const auto& cur = states[t];
    const Eigen::ArrayXi& src_next = out.source[t + 1];
    std::vector<double> weight(static_cast<std::size_t>(cur.size()), 0.0);
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
      int k = src_next[j];
      int a = next.ancestor[k];
      if (a < 0 || a >= cur.size()) continue;
      // w_ij is non-zero only for the recorded ancestor, so w_ij / w_*j is
      // 1 whenever the transition density is representable.
      double d = next.kappa[k] - cur.kappa[a];
      double lw = -d * d * inv2s2;
      if (!std::isfinite(lw)) continue;
      weight[static_cast<std::size_t>(a)] += 1.0 / m;
      total += 1.0 / m;
    }
    if (!(total > 0.0)) {
      out.degenerate_steps.push_back(static_cast<int>(t));
      take(t, uniform_draw(cur.size()));
      continue;
    }
    std::discrete_distribution<int> pick(weight.begin(), weight.end());
    Eigen::ArrayXi src(m);
    for (int j = 0; j < m; ++j) src[j] = pick(rng);
    take(t, src);
  }
  return out;
}

std::vector<CountDistribution> smooth_counts(const SmoothingResult& smoothing, std::span<const Observation> observations,
                                             const RunConfig& config) {
  if (observations.size() != smoothing.steps()) {
    throw std::invalid_argument("observations and smoothing atoms differ in length");
  }
  std::vector<CountDistribution> out;
  out.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    const auto& y = observations[t];
    if (y.count && !y.thinning) {
      out.push_back(CountDistribution::point_mass(*y.count));
      continue;
    }
    const EmissionKernel em = y.kernel(config.truncation);
    Eigen::ArrayXd mu = smoothing.lambda[t] * smoothing.z[t];
    auto groups = group_values(mu);
    std::vector<std::pair<double, double>> comps;
    comps.reserve(groups.size());
    for (auto [value, count] : groups) {
      // Atoms are draws from p(lambda | y); dividing by p(y | mu) leaves the
      // prior over mu, and p(y | x) is applied per count.
      double ly = em.log_likelihood(value);
      comps.emplace_back(value, std::isfinite(ly) ? std::log(count) - ly : kNegInf);
    }
    out.push_back(poisson_mixture(comps, em, config.truncation));
  }
  return out;
}

WeekendPosterior weekend_posterior(const SmoothingResult& smoothing, std::size_t t, const Observation& y,
                                   const RunConfig& config, int grid_size) {
  if (t >= smoothing.steps()) throw std::out_of_range("time index outside the smoothing range");
  if (grid_size < 2) throw std::invalid_argument("grid needs at least two points");
  WeekendPosterior out;
  if (!weekend_active(y, config)) {
    out.grid = Eigen::VectorXd::Ones(1);
    out.probs = Eigen::VectorXd::Ones(1);
    return out;
  }
  const EmissionKernel em = y.kernel(config.truncation);
  out.grid = (Eigen::VectorXd::LinSpaced(grid_size, 0, grid_size - 1).array() + 0.5) / grid_size;
  Eigen::ArrayXd log_prior(grid_size);
  for (int k = 0; k < grid_size; ++k) log_prior[k] = log_beta_density(out.grid[k], config.weekend_a, config.weekend_b);

  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(grid_size);
  Eigen::ArrayXd lp(grid_size);
  for (auto [lam, count] : group_values(smoothing.lambda[t])) {
    for (int k = 0; k < grid_size; ++k) lp[k] = log_prior[k] + em.log_likelihood(lam * out.grid[k]);
    double top = lp.maxCoeff();
    if (!std::isfinite(top)) continue;
    Eigen::ArrayXd p = (lp - top).exp();
    acc += count * p / p.sum();
  }
  if (!(acc.sum() > 0.0)) throw DegenerateState("weekend posterior has no mass");
  out.probs = (acc / acc.sum()).matrix();
  return out;
}

CountDistribution predictive_counts(const ParticleState& state, bool next_weekend, const RunConfig& config) {
  const Eigen::Index n = state.size();
  if (n == 0) throw DegenerateState("no atoms for the predictive");
  const bool wk = config.weekend_effects && next_weekend;
  Rng rng(mix_seed(config.seed, kPredictStream, static_cast<std::uint64_t>(state.t)));
  std::normal_distribution<double> drift(0.0, config.sigma);
  std::vector<std::pair<double, double>> comps;
  comps.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double base = state.lambda[i] + state.kappa[i];
    double lam = base + drift(rng);
    for (int tries = 0; lam <= 0.0 && tries < 100; ++tries) lam = base + drift(rng);
    if (lam <= 0.0) lam = 1e-9;
    double z = wk ? sample_beta(rng, config.weekend_a, config.weekend_b) : 1.0;
    comps.emplace_back(lam * z, 0.0);
  }
  return poisson_mixture(comps, EmissionKernel{}, config.truncation);
}

}  // namespace nowcast
