#pragma once

// Data-parallel inner loops. Each kernel has a serial reference version and
// an OpenMP version; tests check they agree and bench/ compares their speed.

#include <cstddef>
#include <span>

namespace dirspglm {

enum class Execution { serial, parallel };

namespace kernel {

/// Output of a batch of per-observation tilt solves.
struct ThetaBatch {
  std::span<double> theta;  // in: warm start, out: solution
  std::span<double> log_norm;
  std::span<double> variance;
};

/// Solves b'(theta_i) = mu_i for every i against one baseline. Returns the
/// number of observations whose solve failed (boundary or degenerate); the
/// outputs for those entries are NaN.
std::size_t solve_thetas_serial(std::span<const double> scores, std::span<const double> probs,
                                std::span<const double> mu, ThetaBatch out);
std::size_t solve_thetas_parallel(std::span<const double> scores, std::span<const double> probs,
                                  std::span<const double> mu, ThetaBatch out);

inline std::size_t solve_thetas(std::span<const double> scores, std::span<const double> probs,
                                std::span<const double> mu, ThetaBatch out, Execution exec) {
  return exec == Execution::parallel ? solve_thetas_parallel(scores, probs, mu, out)
                                     : solve_thetas_serial(scores, probs, mu, out);
}

}  // namespace kernel
}  // namespace dirspglm
