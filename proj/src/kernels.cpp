#include "dirspglm/kernels.hpp"

#include <cmath>
#include <limits>

#include "dirspglm/error.hpp"
#include "dirspglm/tilt.hpp"

namespace dirspglm::kernel {

namespace {

// One observation; false when the solve is infeasible.
bool solve_one(std::span<const double> scores, std::span<const double> probs, double mu,
               double& theta, double& log_norm, double& variance) noexcept {
  try {
    const double start = std::isfinite(theta) ? theta : 0.0;
    theta = solve_theta(scores, probs, mu, start);
    const TiltMoments m = tilt_moments(scores, probs, theta);
    log_norm = m.log_norm;
    variance = m.variance;
    return true;
  } catch (const Error&) {
    theta = log_norm = variance = std::numeric_limits<double>::quiet_NaN();
    return false;
  }
}

}  // namespace

std::size_t solve_thetas_serial(std::span<const double> scores, std::span<const double> probs,
                                std::span<const double> mu, ThetaBatch out) {
  std::size_t failures = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (!solve_one(scores, probs, mu[i], out.theta[i], out.log_norm[i], out.variance[i]))
      ++failures;
  return failures;
}

std::size_t solve_thetas_parallel(std::span<const double> scores, std::span<const double> probs,
                                  std::span<const double> mu, ThetaBatch out) {
  const auto n = static_cast<std::ptrdiff_t>(mu.size());
  std::size_t failures = 0;
#pragma omp parallel for schedule(static) reduction(+ : failures)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    if (!solve_one(scores, probs, mu[i], out.theta[i], out.log_norm[i], out.variance[i]))
      ++failures;
  return failures;
}

}  // namespace dirspglm::kernel
