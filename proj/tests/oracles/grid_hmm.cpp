#include "grid_hmm.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

double log_pois(std::int64_t x, double mu) {
  return static_cast<double>(x) * std::log(mu) - mu - std::lgamma(static_cast<double>(x) + 1.0);
}

double log_bb(std::int64_t y, std::int64_t x, double a, double b) {
  double xd = static_cast<double>(x), yd = static_cast<double>(y);
  auto lbeta = [](double p, double q) { return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q); };
  return std::lgamma(xd + 1) - std::lgamma(yd + 1) - std::lgamma(xd - yd + 1) + lbeta(yd + a, xd - yd + b) -
         lbeta(a, b);
}

double emission(std::optional<std::int64_t> y, double lambda, const GridModel& m) {
  if (!y) return 1.0;
  if (!m.alpha) return std::exp(log_pois(*y, lambda));
  double s = 0.0;
  auto upper = static_cast<std::int64_t>(lambda + 20.0 * std::sqrt(lambda) + 100.0);
  for (std::int64_t x = *y; x <= std::max(upper, *y); ++x) {
    s += std::exp(log_pois(x, lambda) + log_bb(*y, x, *m.alpha, *m.beta));
  }
  return s;
}

}  // namespace

GridResult grid_forward_backward(const std::vector<std::optional<std::int64_t>>& y, const GridModel& model,
                                 const GridSpec& grid) {
  if (y.empty()) throw std::invalid_argument("empty series");
  const int L = grid.lambda_points;
  const int K = 2 * grid.kappa_half + 1;
  const double h = grid.h;
  const std::size_t T = y.size();
  auto lam = [&](int k) { return (k + 1) * h; };
  auto kap = [&](int m) { return (m - grid.kappa_half) * h; };
  auto idx = [&](int k, int m) { return static_cast<std::size_t>(k) * K + m; };

  // Transition weights between kappa indices.
  std::vector<double> trans(static_cast<std::size_t>(K) * K);
  const double s2 = model.sigma * model.sigma;
  const double norm = h / std::sqrt(2.0 * M_PI * s2);
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) {
      double d = kap(b) - kap(a);
      trans[static_cast<std::size_t>(a) * K + b] = norm * std::exp(-0.5 * d * d / s2);
    }
  }

  std::vector<std::vector<double>> emit(T, std::vector<double>(L));
  for (std::size_t t = 0; t < T; ++t) {
    for (int k = 0; k < L; ++k) emit[t][k] = emission(y[t], lam(k), model);
  }

  std::vector<std::vector<double>> alpha(T, std::vector<double>(static_cast<std::size_t>(L) * K, 0.0));
  GridResult out;
  {
    double a0 = model.lambda0_shape, b0 = model.lambda0_rate;
    double total = 0.0;
    for (int k = 0; k < L; ++k) {
      double l = lam(k);
      double prior = std::exp(a0 * std::log(b0) - std::lgamma(a0) + (a0 - 1) * std::log(l) - b0 * l) * h;
      for (int m = 0; m < K; ++m) {
        double kp = norm * std::exp(-0.5 * kap(m) * kap(m) / s2);
        double v = prior * kp * emit[0][k];
        alpha[0][idx(k, m)] = v;
        total += v;
      }
    }
    out.log_evidence = std::log(total);
    for (auto& v : alpha[0]) v /= total;
  }
  for (std::size_t t = 1; t < T; ++t) {
    auto& cur = alpha[t];
    const auto& prev = alpha[t - 1];
    for (int k = 0; k < L; ++k) {
      for (int m = 0; m < K; ++m) {
        double p = prev[idx(k, m)];
        if (p == 0.0) continue;
        const double* row = &trans[static_cast<std::size_t>(m) * K];
        for (int m2 = 0; m2 < K; ++m2) {
          int k2 = k + m2 - grid.kappa_half;
          if (k2 < 0 || k2 >= L) continue;
          cur[idx(k2, m2)] += p * row[m2];
        }
      }
    }
    double total = 0.0;
    for (int k = 0; k < L; ++k) {
      for (int m = 0; m < K; ++m) {
        cur[idx(k, m)] *= emit[t][k];
        total += cur[idx(k, m)];
      }
    }
    out.log_evidence += std::log(total);
    for (auto& v : cur) v /= total;
  }

  std::vector<std::vector<double>> beta(T, std::vector<double>(static_cast<std::size_t>(L) * K, 1.0));
  for (std::size_t t = T - 1; t-- > 0;) {
    auto& cur = beta[t];
    const auto& next = beta[t + 1];
    double total = 0.0;
    for (int k = 0; k < L; ++k) {
      for (int m = 0; m < K; ++m) {
        const double* row = &trans[static_cast<std::size_t>(m) * K];
        double s = 0.0;
        for (int m2 = 0; m2 < K; ++m2) {
          int k2 = k + m2 - grid.kappa_half;
          if (k2 < 0 || k2 >= L) continue;
          s += row[m2] * emit[t + 1][k2] * next[idx(k2, m2)];
        }
        cur[idx(k, m)] = s;
        total += s;
      }
    }
    for (auto& v : cur) v /= total;
  }

  for (std::size_t t = 0; t < T; ++t) {
    double fl = 0, fk = 0, sl = 0, sk = 0, sz = 0;
    for (int k = 0; k < L; ++k) {
      for (int m = 0; m < K; ++m) {
        double a = alpha[t][idx(k, m)];
        double p = a * beta[t][idx(k, m)];
        fl += a * lam(k);
        fk += a * kap(m);
        sl += p * lam(k);
        sk += p * kap(m);
        sz += p;
      }
    }
    out.filter_lambda_mean.push_back(fl);
    out.filter_kappa_mean.push_back(fk);
    out.smooth_lambda_mean.push_back(sl / sz);
    out.smooth_kappa_mean.push_back(sk / sz);
  }
  return out;
}

}  // namespace oracle
