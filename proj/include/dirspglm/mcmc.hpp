#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dirspglm/glm.hpp"
#include "dirspglm/rng.hpp"

namespace dirspglm {

enum class BetaUpdate { joint, one_at_a_time };
enum class FisherMode { frozen_at_init, recomputed };
enum class WeightScale { sum_to_one, sum_to_n };
enum class F0Move { componentwise, whole_vector };
// redraw: resample until the proposal is feasible (no truncation-mass term).
// reject: an infeasible proposal is a rejected move.
enum class BetaTruncation { reject, redraw };

enum class CenteringMode { empirical, uniform };

/// Centering distribution H. The empirical mode adds half a pseudo-count to
/// every cell so that unobserved scores keep positive prior concentration.
std::vector<double> centering_distribution(const Dataset& data, CenteringMode mode);

struct McmcConfig {
  int n_iter = 5000;
  int burn_in = 2000;
  double rho = 1.0;
  double alpha = 1.0;
  std::vector<double> H;  // empty: centering_distribution(data, empirical)
  BetaUpdate beta_update = BetaUpdate::joint;
  FisherMode fisher_mode = FisherMode::frozen_at_init;
  WeightScale f0_weight_scale = WeightScale::sum_to_one;
  F0Move f0_move = F0Move::componentwise;
  BetaTruncation beta_truncation = BetaTruncation::reject;
  std::optional<double> mu0;  // reporting reference mean; default mean(y)
  Execution exec = Execution::serial;

  // Test-harness switches. With update_beta = false and zero_tilt = true the
  // likelihood reduces to prod f0(y_i), whose posterior is conjugate.
  bool update_beta = true;
  bool zero_tilt = false;
  // false: store the chain's own f0 state instead of its mu0 representative.
  bool report_tilt = true;

  void validate() const;
};

struct BlockStats {
  long proposed = 0;
  long accepted = 0;
  double rate() const noexcept {
    return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  }
};

struct ChainInit {
  Eigen::VectorXd beta;
  std::vector<double> f0;  // empty: counts + alpha * H, normalized
};

/// Post-burn-in draws; row b of `beta` and `f0` is draw b. Stored f0 rows
/// are tilted to `mu0`.
struct PosteriorChain {
  SupportPtr support;
  LinkSpec link;
  double mu0 = 0.0;
  McmcConfig config;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  Eigen::MatrixXd beta;
  Eigen::MatrixXd f0;
  std::vector<int> beta_accepted;  // accepted beta moves in each stored iteration
  std::vector<int> f0_accepted;
  Eigen::RowVectorXd f0_before_first;  // f0 (tilted) entering the first stored iteration

  BlockStats beta_stats;
  BlockStats f0_stats;

  Eigen::Index size() const noexcept { return beta.rows(); }
  BaselineDistribution f0_draw(Eigen::Index b) const;
};

// ---------------------------------------------------------------------------
// Building blocks

struct BetaProposal {
  Eigen::VectorXd beta;
  double log_q_ratio = 0.0;
};

/// Lower Cholesky factor of rho * fisher^{-1}, ridging fisher by
/// 1e-6 * trace / p when it is not positive definite.
Eigen::MatrixXd proposal_cholesky(const Eigen::MatrixXd& fisher, double rho);

/// Draws from N(current, rho * fisher^{-1}) restricted to `in_A` by
/// rejection. The kernel is symmetric, so log_q_ratio is 0.
BetaProposal propose_beta(const Eigen::VectorXd& current, const Eigen::MatrixXd& fisher,
                          double rho, const std::function<bool(const Eigen::VectorXd&)>& in_A,
                          RngStream& rng);

/// log q(current | proposal) - log q(proposal | current) for the Gaussian
/// kernel whose covariance is recomputed at each point (truncation mass
/// ignored).
double gaussian_log_q_ratio(const Eigen::VectorXd& current, const Eigen::MatrixXd& fisher_current,
                            const Eigen::VectorXd& proposal,
                            const Eigen::MatrixXd& fisher_proposal, double rho);

/// Concentration alpha*H + sum_i omega_i 1{y_i = s_l} of the weighted
/// empirical Dirichlet proposal, with c_i = exp(-(theta_i y_i - b(theta_i))).
std::vector<double> f0_proposal_concentration(const Dataset& data,
                                              std::span<const double> theta,
                                              std::span<const double> log_norm, double alpha,
                                              std::span<const double> H, WeightScale scale);

struct F0Proposal {
  std::vector<double> probs;
  std::vector<double> conc;
  double log_q = 0.0;  // log density of the proposal at `probs`
};

F0Proposal propose_f0(const Dataset& data, std::span<const double> theta,
                      std::span<const double> log_norm, double alpha, std::span<const double> H,
                      WeightScale scale, RngStream& rng);

bool mh_accept(double log_target_new, double log_target_old, double log_q_ratio, RngStream& rng);

/// Log prior: N(0, I) on beta and Dir(alpha H) on f0, up to constants.
double log_prior(const Eigen::VectorXd& beta, std::span<const double> f0, double alpha,
                 std::span<const double> H);

Eigen::VectorXd default_initial_beta(const Dataset& data, const LinkSpec& link);

PosteriorChain run_chain(const Dataset& data, const LinkSpec& link, const McmcConfig& config,
                         RngStream& rng, const std::optional<ChainInit>& init = std::nullopt);

// ---------------------------------------------------------------------------
// Summaries

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Equal-tailed intervals at (1 +- level)/2, type-7 quantiles. f0 rows are
/// already tilted to the chain's reference mean.
std::vector<ParameterSummary> posterior_summaries(const PosteriorChain& chain, double level = 0.95);

}  // namespace dirspglm
