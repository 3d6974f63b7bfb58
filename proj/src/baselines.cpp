#include "nowcast/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace nowcast {

std::vector<KalmanStep> kalman_filter(std::span<const double> y, const KalmanParams& params) {
  if (!(params.sigma2 > 0.0 && params.sigma_y2 > 0.0)) throw std::invalid_argument("Kalman variances must be positive");
  std::vector<KalmanStep> out;
  out.reserve(y.size());
  double mean = params.mu;
  double var = params.sigma2;
  for (double obs : y) {
    double pred_var = params.sigma2 + var;
    double gain = pred_var / (pred_var + params.sigma_y2);
    mean = gain * obs + (1.0 - gain) * mean;
    var = (1.0 - gain) * pred_var;
    out.push_back({mean, var, gain});
  }
  return out;
}

std::vector<double> kalman_weights(std::span<const KalmanStep> steps, std::size_t t) {
  if (t >= steps.size()) throw std::out_of_range("Kalman weight index past the series");
  std::vector<double> w(t + 1);
  double tail = 1.0;
  for (std::size_t i = t + 1; i-- > 0;) {
    w[i] = steps[i].gain * tail;
    tail *= 1.0 - steps[i].gain;
  }
  return w;
}

double kalman_weighted_sum(std::span<const double> y, std::span<const KalmanStep> steps, double mu, std::size_t t) {
  auto w = kalman_weights(steps, t);
  double s = 0.0;
  double prior = 1.0;
  for (std::size_t i = 0; i <= t; ++i) {
    s += w[i] * y[i];
    prior *= 1.0 - steps[i].gain;
  }
  return s + prior * mu;
}

std::vector<double> moving_average(std::span<const double> y, int window, MovingAverageWeights weights) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  std::vector<double> out(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(window), t + 1);
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      // r = 0 is the oldest value in the window.
      double w = weights == MovingAverageWeights::kLinear ? static_cast<double>(r + 1) : 1.0;
      num += w * y[t + 1 - k + r];
      den += w;
    }
    out[t] = num / den;
  }
  return out;
}

double windowed_average(std::span<const double> values, std::size_t T, WindowForm form) {
  std::size_t back = form == WindowForm::kLiteral ? 7 : 6;
  if (T >= values.size() || T < back) throw std::out_of_range("windowed average needs values T-" +
                                                              std::to_string(back) + "..T");
  double s = 0.0;
  for (std::size_t t = T - back; t <= T; ++t) s += values[t];
  return s / 7.0;
}

double windowed_average_error(double wa, std::span<const double> converged, std::size_t T, WindowForm form) {
  return std::abs(wa - windowed_average(converged, T, form));
}

}  // namespace nowcast
