#pragma once

// Exponential tilting of a discrete baseline distribution on an ordered
// score support: log-normalizer b(theta), tilted mean/variance, inversion of
// the mean map, and the reference-mean tilt used for identifiability.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dirspglm {

class Support {
 public:
  explicit Support(std::vector<double> scores);

  std::size_t size() const noexcept { return scores_.size(); }
  std::span<const double> scores() const noexcept { return scores_; }
  double operator[](std::size_t i) const { return scores_[i]; }
  double front() const noexcept { return scores_.front(); }
  double back() const noexcept { return scores_.back(); }
  double range() const noexcept { return scores_.back() - scores_.front(); }

  /// Half-width of the excluded band at each end of the support interval.
  double boundary_eps() const noexcept { return 1e-8 * range(); }
  /// True when `mu` lies in (s_1 + eps, s_k - eps).
  bool is_interior(double mu) const noexcept;

  /// Index of the score exactly equal to `y`, if any.
  std::optional<std::size_t> index_of(double y) const noexcept;

  friend bool operator==(const Support&, const Support&) = default;

 private:
  std::vector<double> scores_;
};

using SupportPtr = std::shared_ptr<const Support>;

inline SupportPtr make_support(std::vector<double> scores) {
  return std::make_shared<const Support>(std::move(scores));
}

/// A point on the (k-1)-simplex over a support.
class BaselineDistribution {
 public:
  /// Validates: k entries in [0,1] summing to 1 within 1e-12.
  BaselineDistribution(SupportPtr support, std::vector<double> probs);

  /// Normalizes an arbitrary non-negative weight vector onto the simplex.
  static BaselineDistribution from_weights(SupportPtr support,
                                           std::span<const double> weights);

  const Support& support() const noexcept { return *support_; }
  const SupportPtr& support_ptr() const noexcept { return support_; }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const noexcept { return probs_.size(); }

  double mean() const noexcept;
  /// Fewer than two support points carry positive mass.
  bool is_degenerate() const noexcept;

 private:
  SupportPtr support_;
  std::vector<double> probs_;
};

struct TiltedDistribution {
  double theta = 0.0;
  std::vector<double> weights;
  double log_norm = 0.0;  // b(theta)
  double mean = 0.0;      // b'(theta)
  double variance = 0.0;  // b''(theta)
};

class ReferenceMean {
 public:
  ReferenceMean(const Support& support, double mu0);
  double value() const noexcept { return mu0_; }

 private:
  double mu0_;
};

/// b, b', b'' evaluated together.
struct TiltMoments {
  double log_norm;
  double mean;
  double variance;
};

// Span-level kernels; the hot paths in the likelihood call these directly.
namespace kernel {

TiltMoments tilt_moments(std::span<const double> scores,
                         std::span<const double> probs, double theta);

/// Root of b'(theta) = mu. `theta_start` is a warm start.
double solve_theta(std::span<const double> scores,
                   std::span<const double> probs, double mu,
                   double theta_start = 0.0);

/// Writes exp(theta*s - b(theta)) * p into `out` (renormalized).
void tilt_weights(std::span<const double> scores, std::span<const double> probs,
                  double theta, std::span<double> out);

/// Tail mass sum_{s_l >= y0} of the baseline tilted to mean `mu`.
double exceedance(std::span<const double> scores, std::span<const double> probs, double mu,
                  double y0);

}  // namespace kernel

double log_norm_const(const BaselineDistribution& f0, double theta);
double tilted_mean(const BaselineDistribution& f0, double theta);
double tilted_variance(const BaselineDistribution& f0, double theta);
double solve_theta(const BaselineDistribution& f0, double mu);
TiltedDistribution tilt_distribution(const BaselineDistribution& f0,
                                     double theta);
BaselineDistribution tilt_to_mean(const BaselineDistribution& f,
                                  const ReferenceMean& mu0);

/// Largest |theta| the root finder will search.
inline constexpr double kThetaCap = 500.0;

}  // namespace dirspglm
