#pragma once

#include <cstdint>
#include <optional>
#include <vector>

// Exhaustive forward-backward over a discretised (lambda, kappa) state space.
// Both axes share the spacing h so lambda_{t-1} + kappa_t lands on the grid.
// The emission is an exact Poisson count, or a Poisson count thinned by a
// beta-binomial when alpha/beta are given. States with lambda <= 0 carry no
// mass, and the transition is left unnormalised after that truncation.
namespace oracle {

struct GridSpec {
  double h = 0.5;
  int lambda_points = 200;  // lambda_k = (k + 1) h
  int kappa_half = 100;     // kappa_m = m h, |m| <= kappa_half
};

struct GridModel {
  double sigma = 2.0;
  double lambda0_shape = 20.0;
  double lambda0_rate = 1.0;
  std::optional<double> alpha, beta;  // beta-binomial thinning, none for exact counts
};

struct GridResult {
  std::vector<double> filter_lambda_mean;
  std::vector<double> smooth_lambda_mean;
  std::vector<double> filter_kappa_mean;
  std::vector<double> smooth_kappa_mean;
  double log_evidence = 0.0;  // of the discretised model
};

GridResult grid_forward_backward(const std::vector<std::optional<std::int64_t>>& y, const GridModel& model,
                                 const GridSpec& grid = {});

}  // namespace oracle
