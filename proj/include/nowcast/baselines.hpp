#pragma once

#include <span>
#include <vector>

namespace nowcast {

struct KalmanParams {
  double mu = 0.0;        // prior mean of the state before the first observation
  double sigma2 = 1.0;    // transition variance
  double sigma_y2 = 1.0;  // observation variance
};

struct KalmanStep {
  double mean = 0.0;
  double variance = 0.0;
  double gain = 0.0;
};

/// Random-walk Kalman filter without drift. The state before the first
/// observation is N(mu, sigma2).
std::vector<KalmanStep> kalman_filter(std::span<const double> y, const KalmanParams& params);

/// Weights w_i = K_i prod_{j=i+1}^{t} (1 - K_j) of y_0..y_t in the filtering
/// mean at t; the prior mean carries the remaining prod_{j=0}^{t} (1 - K_j).
std::vector<double> kalman_weights(std::span<const KalmanStep> steps, std::size_t t);

/// Filtering mean at t written as the weighted sum of observations.
double kalman_weighted_sum(std::span<const double> y, std::span<const KalmanStep> steps, double mu, std::size_t t);

enum class MovingAverageWeights { kUniform, kLinear };

/// Trailing weighted mean; the first window-1 outputs use the available prefix.
/// Linear weights are 1..k with the newest value weighted k.
std::vector<double> moving_average(std::span<const double> y, int window = 7,
                                   MovingAverageWeights weights = MovingAverageWeights::kUniform);

enum class WindowForm {
  kLiteral,   // values T-7..T (eight terms) divided by 7
  kSevenDay,  // values T-6..T divided by 7
};

/// Windowed average ending at index T. Throws std::out_of_range if the window
/// starts before the series.
double windowed_average(std::span<const double> values, std::size_t T, WindowForm form = WindowForm::kLiteral);

/// |wa - windowed_average(converged, T)|.
double windowed_average_error(double wa, std::span<const double> converged, std::size_t T,
                              WindowForm form = WindowForm::kLiteral);

}  // namespace nowcast
