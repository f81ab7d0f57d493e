#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dirspglm/glm.hpp"

namespace dirspglm {

struct MlOptions {
  int max_iter = 500;
  double grad_tol = 1e-6;
  double logit_cap = 30.0;
  Eigen::VectorXd initial_beta;       // empty: intercept at g(mean y), rest 0
  std::vector<double> initial_logits;  // k entries; empty: log(count + 0.5)
  Execution exec = Execution::serial;
};

struct MlFit {
  LinkSpec link;
  Eigen::VectorXd beta_hat;
  BaselineDistribution f0_hat;  // tilted to the reference mean
  std::vector<double> f0_raw;   // argmax before the reference tilt
  Eigen::MatrixXd vcov;         // inverse Fisher information at the MLE, f0 fixed
  double loglik = 0.0;
  bool converged = false;
  int n_iters = 0;
  double grad_max_norm = 0.0;
};

/// Joint MLE of (beta, f0) with f0 = softmax(logits).
MlFit fit_ml(const Dataset& data, const LinkSpec& link, const ReferenceMean& mu0,
             const MlOptions& opts = {});

/// Gradient of the log-likelihood in (beta, all k logits) at a point.
/// Returns false if the likelihood is undefined there.
bool ml_gradient(const Dataset& data, const LinkSpec& link, const Eigen::VectorXd& beta,
                 std::span<const double> logits, double& loglik, Eigen::VectorXd& grad);

struct WaldInterval {
  double estimate;
  double lower;
  double upper;
};

/// beta_hat_j +- z_{(1+level)/2} sqrt(vcov_jj). Refuses non-converged fits.
std::vector<WaldInterval> wald_ci(const MlFit& fit, double level = 0.95);

/// p(y >= y0 | x) at the fitted (beta, f0).
double exceedance_plugin(const MlFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x, double y0);

}  // namespace dirspglm
