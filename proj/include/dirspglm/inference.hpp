#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dirspglm/kernels.hpp"
#include "dirspglm/mcmc.hpp"

namespace dirspglm {

struct ExceedanceQuery {
  double y0;
  Eigen::VectorXd x;
};

/// A scalar functional evaluated at every posterior draw.
struct FunctionalPosterior {
  std::vector<double> samples;
  double point = 0.0;  // posterior mean of the samples
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  /// Draws whose fitted mean left the support interval; they contribute the
  /// limiting exceedance (0 or 1).
  std::size_t boundary_draws = 0;

  double boundary_fraction() const noexcept {
    return samples.empty() ? 0.0
                           : static_cast<double>(boundary_draws) / static_cast<double>(samples.size());
  }
  bool needs_warning() const noexcept { return boundary_fraction() > 0.01; }
};

/// p(y >= y0 | x, beta, f0) for one parameter value; `mu` outside the open
/// support interval yields the limiting value and sets `at_boundary`.
double draw_exceedance(std::span<const double> scores, const LinkSpec& link,
                       const Eigen::Ref<const Eigen::RowVectorXd>& beta,
                       const Eigen::Ref<const Eigen::RowVectorXd>& f0,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double y0, bool& at_boundary);

namespace kernel {

/// Per-draw exceedance over the chain; returns the boundary-draw count.
std::size_t exceedance_draws_serial(const PosteriorChain& chain, const Eigen::MatrixXd& rows,
                                    double y0, std::span<double> out);
std::size_t exceedance_draws_parallel(const PosteriorChain& chain, const Eigen::MatrixXd& rows,
                                      double y0, std::span<double> out);

}  // namespace kernel

FunctionalPosterior exceedance_posterior(const PosteriorChain& chain, const ExceedanceQuery& query,
                                         double level = 0.95, Execution exec = Execution::serial);

/// Per draw, the average exceedance over the rows of `group_rows` (design
/// held fixed).
FunctionalPosterior group_exceedance(const PosteriorChain& chain, double y0,
                                     const Eigen::MatrixXd& group_rows, double level = 0.95,
                                     Execution exec = Execution::serial);

/// Rows of X whose column `col` equals `value`.
Eigen::MatrixXd select_group(const Eigen::MatrixXd& X, Eigen::Index col, double value);

/// Mann-Whitney AUC; ties count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace dirspglm
