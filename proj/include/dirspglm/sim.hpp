#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dirspglm/glm.hpp"
#include "dirspglm/mcmc.hpp"
#include "dirspglm/ml_fit.hpp"
#include "dirspglm/rng.hpp"

namespace dirspglm {

enum class ScenarioId { trunc_poisson = 1, zero_infl_trunc_poisson = 2 };

/// Simulation design: support {0,...,5}, x = (1, N(0,1)), log link,
/// beta = (-0.7, 0.2), and a (zero-inflated) right-truncated Poisson(1)
/// baseline.
struct SimScenario {
  ScenarioId id = ScenarioId::trunc_poisson;
  double lambda = 1.0;
  double inflation_factor = 3.0;  // scenario 2 only
  SupportPtr support = make_support({0, 1, 2, 3, 4, 5});
  Eigen::VectorXd beta_true = (Eigen::VectorXd(2) << -0.7, 0.2).finished();
  LinkSpec link{LinkKind::log};

  static SimScenario from_id(int id);
};

/// Baseline from the scenario formula, before any reference tilt.
BaselineDistribution scenario_f0(const SimScenario& scenario);
/// Common reference mean for reporting f0: the mean of the truncated
/// Poisson baseline, shared by both scenarios.
double scenario_reference_mean(const SimScenario& scenario);
/// Truth for f0 as reported: scenario_f0 tilted to the reference mean.
BaselineDistribution scenario_truth_f0(const SimScenario& scenario);

Dataset simulate_dataset(int n, const SimScenario& scenario, RngStream& rng);

enum class RelativeRule { ratio_of_medians, median_of_ratios };

struct ReplicationConfig {
  int R = 200;
  int n = 25;
  SimScenario scenario;
  bool dir_spglm = true;
  bool ml_spglm = true;
  McmcConfig mcmc = [] {
    McmcConfig c;
    c.n_iter = 2500;
    c.burn_in = 1000;
    return c;
  }();
  std::uint64_t seed = 20240101;
  int jobs = 1;
  double level = 0.95;
  RelativeRule relative_rule = RelativeRule::ratio_of_medians;
};

/// One row of the per-replicate record file.
struct ReplicateRecord {
  int rep = 0;
  std::string method;  // "ml_spglm" or "dir_spglm"
  std::string param;   // "beta_0", "f0_3", ...
  double estimate = 0.0;
  double lower = 0.0;  // NaN when the method gives no interval
  double upper = 0.0;
  int covered = -1;    // -1: no interval
};

struct MetricsRow {
  std::string param;
  std::string method;
  double truth = 0.0;
  double est_a = 0.0;
  double est_m = 0.0;
  double rrmse_a = 0.0;
  double rrmse_m = 0.0;
  double rl_a = 0.0;
  double rl_m = 0.0;
  double cp = 0.0;  // NaN without intervals
  int n_reps = 0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  const MetricsRow& at(const std::string& param, const std::string& method) const;
};

struct ReplicationResult {
  std::vector<ReplicateRecord> records;
  MetricsTable metrics;
  int failures = 0;
  int attempted = 0;
};

/// Parameter name -> truth for the scenario.
std::vector<std::pair<std::string, double>> scenario_truths(const SimScenario& scenario);

MetricsTable metrics_from_records(const std::vector<ReplicateRecord>& records,
                                  const std::vector<std::pair<std::string, double>>& truths,
                                  RelativeRule rule = RelativeRule::ratio_of_medians);

ReplicationResult run_replication(const ReplicationConfig& config);

void write_records_csv(std::ostream& os, const std::vector<ReplicateRecord>& records);
std::vector<ReplicateRecord> read_records_csv(std::istream& is);
void write_metrics_csv(std::ostream& os, const MetricsTable& table);

enum class FitMethod { dir_spglm, ml_spglm };

struct HeldoutOptions {
  LinkSpec link{LinkKind::log};
  std::optional<double> mu0;  // default: mean of training y
  McmcConfig mcmc;
  std::uint64_t seed = 1;
  int max_draws = 0;  // evenly thinned posterior draws used for scoring; 0 = all
};

/// Fits on `train`, scores `test` rows by plug-in (ML) or posterior-predictive
/// (Dir) exceedance of y0, and returns the AUC against 1{y >= y0}.
double heldout_auc(const Dataset& train, const Dataset& test, double y0, FitMethod method,
                   const HeldoutOptions& opts);

}  // namespace dirspglm
