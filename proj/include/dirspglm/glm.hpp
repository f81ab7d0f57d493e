#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dirspglm/kernels.hpp"
#include "dirspglm/tilt.hpp"

namespace dirspglm {

enum class LinkKind { log, identity };

class LinkSpec {
 public:
  constexpr explicit LinkSpec(LinkKind kind = LinkKind::log) : kind_(kind) {}
  static LinkSpec parse(std::string_view name);

  LinkKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;

  double g(double mu) const noexcept;
  double g_inv(double eta) const noexcept;
  double g_prime(double mu) const noexcept;

 private:
  LinkKind kind_;
};

/// n rows of (x_i, y_i) with every y_i on the support.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> level;  // index of y_i in the support
  SupportPtr support;

  Eigen::Index n() const noexcept { return X.rows(); }
  Eigen::Index p() const noexcept { return X.cols(); }
  /// Counts per support point.
  std::vector<double> counts() const;
  Dataset subset(std::span<const Eigen::Index> rows) const;
};

/// Validates shapes, finiteness, and that each response is a support score.
Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y, SupportPtr support);

struct RegressionModel {
  Eigen::VectorXd beta;
  LinkSpec link;
  BaselineDistribution f0;
  std::optional<ReferenceMean> mu0;
};

double conditional_mean(const RegressionModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double observation_theta(const RegressionModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Sum of per-observation log densities; -inf when some f0(y_i) = 0.
double log_likelihood(const RegressionModel& model, const Dataset& data);
/// Gradient of log_likelihood in beta with f0 held fixed.
Eigen::VectorXd score(const RegressionModel& model, const Dataset& data);
Eigen::MatrixXd fisher_information(const RegressionModel& model, const Dataset& data);

/// Per-observation quantities at one (beta, f0), reused by the sampler and
/// the ML fit. `theta` doubles as the warm start for the next evaluation.
struct ObservationState {
  Eigen::VectorXd eta, mu, theta, log_norm, variance;
  double loglik = 0.0;
  bool feasible = false;
};

/// Evaluates mu_i, theta_i, b(theta_i), b''(theta_i) and the log-likelihood.
/// Returns false (leaving `state.feasible == false`) when some mean leaves
/// the support interval or a theta solve fails.
bool evaluate_observations(const Dataset& data, const LinkSpec& link,
                           const Eigen::VectorXd& beta, std::span<const double> f0,
                           ObservationState& state, Execution exec = Execution::serial);

Eigen::VectorXd score_from_state(const Dataset& data, const LinkSpec& link,
                                 const ObservationState& state);
Eigen::MatrixXd fisher_from_state(const Dataset& data, const LinkSpec& link,
                                  const ObservationState& state);

/// Every fitted mean strictly inside (s_1 + eps, s_k - eps).
bool in_constraint_set(const Dataset& data, const LinkSpec& link, const Eigen::VectorXd& beta);

}  // namespace dirspglm
