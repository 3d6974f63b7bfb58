#include <cmath>
#include <random>

#include "doctest.h"
#include "enumeration.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/mh.hpp"

using namespace nowcast;

TEST_SUITE("kernels") {
  TEST_CASE("beta-binomial pmf values") {
    for (int y = 0; y <= 3; ++y) CHECK(beta_binomial_pmf(y, 3, {1, 1}) == doctest::Approx(0.25));
    CHECK(beta_binomial_pmf(1, 1, {2, 2}) == doctest::Approx(0.5));
    CHECK(beta_binomial_pmf(0, 0, {0.3, 7}) == 1.0);
    CHECK(beta_binomial_pmf(4, 3, {1, 1}) == 0.0);
  }

  TEST_CASE("beta-binomial reflects under swapped shapes") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.05, 30.0);
    for (int rep = 0; rep < 200; ++rep) {
      double a = u(rng), b = u(rng);
      std::int64_t x = rep % 60, y = rep % (x + 1);
      CHECK(beta_binomial_pmf(y, x, {a, b}) == doctest::Approx(beta_binomial_pmf(x - y, x, {b, a})).epsilon(1e-10));
    }
  }

  TEST_CASE("beta-binomial mean is x times the Beta mean") {
    for (double a : {0.5, 2.0, 9.0}) {
      for (double b : {0.3, 4.0}) {
        double m = 0.0;
        for (int y = 0; y <= 50; ++y) m += y * beta_binomial_pmf(y, 50, {a, b});
        CHECK(m == doctest::Approx(50.0 * a / (a + b)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("posterior over counts") {
    CountPrior only{10, 10, {}};
    auto pm = posterior_x_given_y(10, BetaBinomialParams{3, 2}, only);
    CHECK(pm.pmf(10) == 1.0);

    auto post = posterior_x_given_y(10, BetaBinomialParams{1, 1}, CountPrior::flat(0, 50));
    double z = 0.0;
    for (int x = 10; x <= 50; ++x) z += 1.0 / (x + 1);
    CHECK(post.lo == 10);
    CHECK(post.total() == doctest::Approx(1.0).epsilon(1e-12));
    for (int x = 10; x <= 50; ++x) CHECK(post.pmf(x) == doctest::Approx(1.0 / (x + 1) / z).epsilon(1e-10));
    CHECK(post.pmf(9) == 0.0);

    CHECK_THROWS_AS(posterior_x_given_y(60, BetaBinomialParams{1, 1}, CountPrior::flat(0, 50)), InfeasibleObservation);
  }

  TEST_CASE("binomial posterior matches direct evaluation") {
    for (double th : {0.05, 0.4, 0.95}) {
      for (int y : {0, 3, 17}) {
        auto post = posterior_x_given_y(y, th, CountPrior::flat(0, 80));
        auto ref = oracle::binomial_posterior(y, th, 80);
        for (int x = 0; x <= 80; ++x) CHECK(post.pmf(x) == doctest::Approx(ref[static_cast<std::size_t>(x)]).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("MH over the count posterior agrees with enumeration") {
    auto post = posterior_x_given_y(10, BetaBinomialParams{1, 1}, CountPrior::flat(0, 50));
    auto lp = [&](double v) {
      auto x = static_cast<std::int64_t>(std::lround(v));
      double p = post.pmf(x);
      return p > 0.0 && v > -0.5 && v < 50.5 ? std::log(p) : -INFINITY;
    };
    MHConfig cfg;
    cfg.steps = 200000;
    cfg.burn_in = 2000;
    cfg.thin = 1;
    cfg.proposal_scale = 12.0;
    cfg.seed = 9;
    auto atoms = mh_sample(lp, 15.0, cfg);
    std::vector<double> hist(51, 0.0);
    for (double v : atoms) hist[static_cast<std::size_t>(std::lround(v))] += 1.0 / static_cast<double>(atoms.size());
    std::vector<double> exact(51, 0.0);
    for (int x = 0; x <= 50; ++x) exact[static_cast<std::size_t>(x)] = post.pmf(x);
    CHECK(oracle::total_variation(hist, exact) < 0.02);
  }

  TEST_CASE("MH recovers standard normal moments") {
    MHConfig cfg;
    cfg.steps = 100000;
    cfg.burn_in = 1000;
    cfg.thin = 1;
    cfg.proposal_scale = 2.4;
    auto atoms = mh_sample([](double v) { return -0.5 * v * v; }, 0.0, cfg);
    double m = 0, s2 = 0;
    for (double v : atoms) m += v;
    m /= atoms.size();
    for (double v : atoms) s2 += (v - m) * (v - m);
    s2 /= atoms.size();
    CHECK(std::abs(m) < 0.05);
    CHECK(std::abs(s2 - 1.0) < 0.1);
    CHECK(static_cast<int>(atoms.size()) == cfg.atoms());
  }

  TEST_CASE("MH never leaves the support and is reproducible") {
    MHConfig cfg;
    cfg.steps = 5000;
    cfg.burn_in = 0;
    cfg.proposal_scale = 5.0;
    auto lp = [](double l) { return l > 0.0 ? 2.0 * std::log(l) - l : -INFINITY; };
    auto a = mh_sample(lp, 0.5, cfg);
    auto b = mh_sample(lp, 0.5, cfg);
    CHECK(a == b);
    for (double v : a) CHECK(v > 0.0);
    CHECK_THROWS_AS(mh_sample(lp, -1.0, cfg), DegenerateState);
  }

  TEST_CASE("Poisson beta-binomial likelihood") {
    for (int y : {0, 4, 30}) {
      for (double lam : {2.0, 25.0}) {
        double p = poisson_bb_likelihood(lam, y, {1e6, 1});
        CHECK(p == doctest::Approx(std::exp(log_poisson_pmf(y, lam))).epsilon(1e-4));
        CHECK(p == doctest::Approx(oracle::poisson_beta_binomial(lam, y, 1e6, 1)).epsilon(1e-9));
      }
    }
    double total = 0.0;
    for (int y = 0; y <= 200; ++y) total += poisson_bb_likelihood(5.0, y, {1, 1});
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(poisson_bb_likelihood(1e-8, 0, {2, 3}) == doctest::Approx(1.0).epsilon(1e-7));
  }

  TEST_CASE("truncated emission agrees with the untruncated sum") {
    for (double lam : {0.5, 40.0, 900.0}) {
      for (double frac : {0.2, 0.6}) {
        auto y = static_cast<std::int64_t>(lam * frac);
        double ours = log_poisson_bb_likelihood(lam, y, {3, 2});
        double ref = std::log(oracle::poisson_beta_binomial(lam, y, 3, 2));
        CHECK(ours == doctest::Approx(ref).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("emission kernel of a missing report is flat") {
    EmissionKernel none;
    CHECK_FALSE(none.observed());
    CHECK(none.log_likelihood(12.0) == 0.0);
    EmissionKernel exact(7, std::nullopt);
    CHECK(exact.exact());
    CHECK(exact.log_likelihood(3.0) == doctest::Approx(log_poisson_pmf(7, 3.0)));
    CHECK(exact.log_count_likelihood(6) == -INFINITY);
  }
}
