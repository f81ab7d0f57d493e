#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dirspglm/tilt.hpp"

namespace dirspglm {

/// Seedable random stream. Identical (seed, stream_id) pairs replay the same
/// sequence; distinct stream ids are decorrelated through SplitMix64 seeding.
/// Single-owner: move between threads, never share.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Stream id for replicate r, chain c.
  static constexpr std::uint64_t stream_for(std::uint64_t replicate, std::uint64_t chain) {
    return (replicate << 16) + chain;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  double uniform();  // (0, 1)
  double normal();
  /// log of a Gamma(shape, 1) variate; stays finite for tiny shapes.
  double log_gamma(double shape);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Concentration vector of a Dirichlet law (alpha * H in the prior).
class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> conc);
  std::span<const double> conc() const noexcept { return conc_; }
  std::size_t size() const noexcept { return conc_.size(); }
  double total() const noexcept;

 private:
  std::vector<double> conc_;
};

struct TiltedDirichletSpec {
  DirichletParams conc;
  double mu;
  SupportPtr support;
};

/// Simplex draw via normalized independent Gamma(conc_l, 1) variates.
std::vector<double> sample_dirichlet(const DirichletParams& params, RngStream& rng);
BaselineDistribution sample_dirichlet(const DirichletParams& params, const SupportPtr& support,
                                      RngStream& rng);

/// Dirichlet draw exponentially tilted to score-weighted mean `spec.mu`.
TiltedDistribution sample_tdir(const TiltedDirichletSpec& spec, RngStream& rng);

/// mean + chol_cov * z with z standard normal.
Eigen::VectorXd sample_normal_vector(const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& chol_cov, RngStream& rng);

/// Beta(a, b) variate built from log-Gamma draws.
double sample_beta(double a, double b, RngStream& rng);

// Log densities used in Hastings ratios.
double log_dirichlet_density(std::span<const double> x, std::span<const double> conc);
double log_beta_density(double x, double a, double b);

}  // namespace dirspglm
