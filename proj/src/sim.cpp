#include "dirspglm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "dirspglm/error.hpp"
#include "dirspglm/inference.hpp"
#include "dirspglm/stats.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "sim_harness";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, kOrigin, msg); }

std::vector<double> poisson_pmf(double lambda, std::size_t k) {
  std::vector<double> p(k);
  for (std::size_t s = 0; s < k; ++s)
    p[s] = std::exp(-lambda + static_cast<double>(s) * std::log(lambda) -
                    std::lgamma(static_cast<double>(s) + 1.0));
  return p;
}

std::size_t draw_category(std::span<const double> weights, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    acc += weights[l];
    if (u < acc) return l;
  }
  // Rounding left u above the last partial sum: take the last positive cell.
  for (std::size_t l = weights.size(); l-- > 0;)
    if (weights[l] > 0.0) return l;
  return weights.size() - 1;
}

}  // namespace

SimScenario SimScenario::from_id(int id) {
  SimScenario s;
  if (id == 1)
    s.id = ScenarioId::trunc_poisson;
  else if (id == 2)
    s.id = ScenarioId::zero_infl_trunc_poisson;
  else
    fail(ErrorKind::invalid_input, "scenario must be 1 or 2");
  return s;
}

BaselineDistribution scenario_f0(const SimScenario& scenario) {
  auto p = poisson_pmf(scenario.lambda, scenario.support->size());
  if (scenario.id == ScenarioId::zero_infl_trunc_poisson) p[0] *= scenario.inflation_factor;
  return BaselineDistribution::from_weights(scenario.support, p);
}

double scenario_reference_mean(const SimScenario& scenario) {
  SimScenario base = scenario;
  base.id = ScenarioId::trunc_poisson;
  return scenario_f0(base).mean();
}

BaselineDistribution scenario_truth_f0(const SimScenario& scenario) {
  const auto& support = *scenario.support;
  return tilt_to_mean(scenario_f0(scenario), ReferenceMean(support, scenario_reference_mean(scenario)));
}

Dataset simulate_dataset(int n, const SimScenario& scenario, RngStream& rng) {
  if (n < 1) fail(ErrorKind::invalid_input, "sample size must be at least 1");
  const BaselineDistribution f0 = scenario_f0(scenario);
  const Support& support = *scenario.support;
  const auto scores = support.scores();
  const Eigen::Index p = scenario.beta_true.size();

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  std::vector<double> w(support.size());
  for (int i = 0; i < n; ++i) {
    double mu = 0.0;
    Eigen::VectorXd x(p);
    do {
      x[0] = 1.0;
      for (Eigen::Index j = 1; j < p; ++j) x[j] = rng.normal();
      mu = scenario.link.g_inv(x.dot(scenario.beta_true));
    } while (!support.is_interior(mu));
    const double theta = kernel::solve_theta(scores, f0.probs(), mu, 0.0);
    kernel::tilt_weights(scores, f0.probs(), theta, w);
    X.row(i) = x.transpose();
    y[i] = scores[draw_category(w, rng)];
  }
  return make_dataset(std::move(X), std::move(y), scenario.support);
}

// ---------------------------------------------------------------------------
// Replication

const MetricsRow& MetricsTable::at(const std::string& param, const std::string& method) const {
  for (const auto& r : rows)
    if (r.param == param && r.method == method) return r;
  fail(ErrorKind::invalid_input, "no metrics row for " + param + "/" + method);
}

std::vector<std::pair<std::string, double>> scenario_truths(const SimScenario& scenario) {
  std::vector<std::pair<std::string, double>> out;
  for (Eigen::Index j = 0; j < scenario.beta_true.size(); ++j)
    out.emplace_back("beta_" + std::to_string(j), scenario.beta_true[j]);
  const auto f0 = scenario_truth_f0(scenario);
  for (std::size_t l = 0; l < f0.size(); ++l) out.emplace_back("f0_" + std::to_string(l), f0[l]);
  return out;
}

namespace {

struct Column {
  std::vector<double> est, abs_err, length;
  int covered = 0;
  int with_interval = 0;
};

double safe_ratio(double a, double b) { return b > 0.0 ? a / b : kNaN; }

double root_mean_square(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

MetricsTable metrics_from_records(const std::vector<ReplicateRecord>& records,
                                  const std::vector<std::pair<std::string, double>>& truths,
                                  RelativeRule rule) {
  // (param, method) -> column, replicate order preserved.
  std::map<std::pair<std::string, std::string>, Column> cols;
  std::map<std::string, double> truth_of(truths.begin(), truths.end());
  for (const auto& rec : records) {
    auto it = truth_of.find(rec.param);
    if (it == truth_of.end()) fail(ErrorKind::invalid_input, "record for unknown parameter " + rec.param);
    Column& c = cols[{rec.param, rec.method}];
    c.est.push_back(rec.estimate);
    c.abs_err.push_back(std::abs(rec.estimate - it->second));
    if (rec.covered >= 0) {
      c.length.push_back(rec.upper - rec.lower);
      c.covered += rec.covered;
      ++c.with_interval;
    }
  }

  MetricsTable table;
  for (const auto& [param, truth] : truths) {
    for (const std::string method : {"ml_spglm", "dir_spglm"}) {
      auto it = cols.find({param, method});
      if (it == cols.end()) continue;
      const Column& c = it->second;
      MetricsRow row;
      row.param = param;
      row.method = method;
      row.truth = truth;
      row.n_reps = static_cast<int>(c.est.size());
      row.est_a = stats::mean(c.est);
      row.est_m = stats::median(c.est);
      row.cp = c.with_interval > 0 ? static_cast<double>(c.covered) / c.with_interval : kNaN;

      if (method == "ml_spglm") {
        row.rrmse_a = row.rrmse_m = row.rl_a = row.rl_m = 1.0;
      } else {
        auto ml = cols.find({param, "ml_spglm"});
        row.rrmse_a = row.rrmse_m = row.rl_a = row.rl_m = kNaN;
        if (ml != cols.end()) {
          const Column& m = ml->second;
          row.rrmse_a = safe_ratio(root_mean_square(c.abs_err), root_mean_square(m.abs_err));
          if (rule == RelativeRule::ratio_of_medians) {
            row.rrmse_m = safe_ratio(stats::median(c.abs_err), stats::median(m.abs_err));
          } else {
            std::vector<double> r;
            for (std::size_t i = 0; i < std::min(c.abs_err.size(), m.abs_err.size()); ++i)
              if (m.abs_err[i] > 0.0) r.push_back(c.abs_err[i] / m.abs_err[i]);
            row.rrmse_m = r.empty() ? kNaN : stats::median(r);
          }
          if (!c.length.empty() && !m.length.empty()) {
            row.rl_a = safe_ratio(stats::mean(c.length), stats::mean(m.length));
            if (rule == RelativeRule::ratio_of_medians) {
              row.rl_m = safe_ratio(stats::median(c.length), stats::median(m.length));
            } else {
              std::vector<double> r;
              for (std::size_t i = 0; i < std::min(c.length.size(), m.length.size()); ++i)
                if (m.length[i] > 0.0) r.push_back(c.length[i] / m.length[i]);
              row.rl_m = r.empty() ? kNaN : stats::median(r);
            }
          }
        }
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

namespace {

std::vector<ReplicateRecord> one_replicate(const ReplicationConfig& cfg, int rep,
                                           const std::vector<std::pair<std::string, double>>& truths) {
  RngStream data_rng(cfg.seed, RngStream::stream_for(static_cast<std::uint64_t>(rep), 0));
  const Dataset data = simulate_dataset(cfg.n, cfg.scenario, data_rng);
  const Support& support = *cfg.scenario.support;
  const double mu0 = scenario_reference_mean(cfg.scenario);
  const std::size_t p = static_cast<std::size_t>(data.p());

  std::vector<ReplicateRecord> out;
  auto covered = [&](std::size_t idx, double lo, double hi) {
    const double t = truths[idx].second;
    return (lo <= t && t <= hi) ? 1 : 0;
  };

  const MlFit ml = fit_ml(data, cfg.scenario.link, ReferenceMean(support, mu0));
  if (!ml.converged) fail(ErrorKind::not_converged, "ML fit did not converge");
  if (cfg.ml_spglm) {
    const auto ci = wald_ci(ml, cfg.level);
    for (std::size_t j = 0; j < p; ++j)
      out.push_back({rep, "ml_spglm", truths[j].first, ci[j].estimate, ci[j].lower, ci[j].upper,
                     covered(j, ci[j].lower, ci[j].upper)});
    for (std::size_t l = 0; l < support.size(); ++l)
      out.push_back({rep, "ml_spglm", truths[p + l].first, ml.f0_hat[l], kNaN, kNaN, -1});
  }

  if (cfg.dir_spglm) {
    McmcConfig mc = cfg.mcmc;
    mc.mu0 = mu0;
    RngStream chain_rng(cfg.seed, RngStream::stream_for(static_cast<std::uint64_t>(rep), 1));
    const PosteriorChain chain = run_chain(data, cfg.scenario.link, mc, chain_rng, ChainInit{ml.beta_hat, {}});
    const auto summary = posterior_summaries(chain, cfg.level);
    for (std::size_t idx = 0; idx < summary.size(); ++idx) {
      const auto& s = summary[idx];
      out.push_back({rep, "dir_spglm", truths[idx].first, s.mean, s.lower, s.upper,
                     covered(idx, s.lower, s.upper)});
    }
  }
  return out;
}

}  // namespace

ReplicationResult run_replication(const ReplicationConfig& config) {
  if (config.R < 1) fail(ErrorKind::invalid_input, "R must be at least 1");
  if (!config.dir_spglm && !config.ml_spglm) fail(ErrorKind::invalid_input, "no methods selected");
  config.mcmc.validate();
  const auto truths = scenario_truths(config.scenario);

  std::vector<std::vector<ReplicateRecord>> per_rep(static_cast<std::size_t>(config.R));
  std::vector<char> failed(static_cast<std::size_t>(config.R), 0);
  const int jobs = std::max(1, config.jobs);

#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (int r = 0; r < config.R; ++r) {
    try {
      per_rep[static_cast<std::size_t>(r)] = one_replicate(config, r, truths);
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(r)] = 1;
    }
  }

  ReplicationResult result;
  result.attempted = config.R;
  for (int r = 0; r < config.R; ++r) {
    if (failed[static_cast<std::size_t>(r)]) {
      ++result.failures;
      continue;
    }
    auto& recs = per_rep[static_cast<std::size_t>(r)];
    result.records.insert(result.records.end(), recs.begin(), recs.end());
  }
  if (result.failures > 0.02 * config.R) {
    std::ostringstream os;
    os << result.failures << " of " << config.R << " replicates failed (more than 2%)";
    fail(ErrorKind::sampler, os.str());
  }
  result.metrics = metrics_from_records(result.records, truths, config.relative_rule);
  return result;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt_full(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double parse_num(const std::string& s) {
  if (s == "NA" || s.empty()) return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) fail(ErrorKind::invalid_input, "malformed number '" + s + "'");
  return v;
}

std::string fmt6(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

void write_records_csv(std::ostream& os, const std::vector<ReplicateRecord>& records) {
  os << "rep,method,param,estimate,lower,upper,covered\n";
  for (const auto& r : records) {
    os << r.rep << ',' << r.method << ',' << r.param << ',' << fmt_full(r.estimate) << ','
       << fmt_full(r.lower) << ',' << fmt_full(r.upper) << ',';
    if (r.covered >= 0)
      os << r.covered;
    else
      os << "NA";
    os << '\n';
  }
}

std::vector<ReplicateRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "rep,method,param,estimate,lower,upper,covered")
    fail(ErrorKind::invalid_input, "unexpected record file header");
  std::vector<ReplicateRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) fail(ErrorKind::invalid_input, "record row with " + std::to_string(f.size()) + " fields");
    ReplicateRecord r;
    r.rep = std::stoi(f[0]);
    r.method = f[1];
    r.param = f[2];
    r.estimate = parse_num(f[3]);
    r.lower = parse_num(f[4]);
    r.upper = parse_num(f[5]);
    r.covered = f[6] == "NA" ? -1 : std::stoi(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_metrics_csv(std::ostream& os, const MetricsTable& table) {
  os << "param,method,truth,est_a,rrmse_a,rl_a,est_m,rrmse_m,rl_m,cp,reps\n";
  for (const auto& r : table.rows) {
    os << r.param << ',' << r.method << ',' << fmt6(r.truth) << ',' << fmt6(r.est_a) << ','
       << fmt6(r.rrmse_a) << ',' << fmt6(r.rl_a) << ',' << fmt6(r.est_m) << ',' << fmt6(r.rrmse_m)
       << ',' << fmt6(r.rl_m) << ',' << fmt6(r.cp) << ',' << r.n_reps << '\n';
  }
}

// ---------------------------------------------------------------------------
// Held-out prediction

double heldout_auc(const Dataset& train, const Dataset& test, double y0, FitMethod method,
                   const HeldoutOptions& opts) {
  if (train.n() == 0 || test.n() == 0) fail(ErrorKind::invalid_input, "train and test sets must be non-empty");
  const Support& support = *train.support;
  const auto scores = support.scores();
  const double mu0 = opts.mu0.value_or(train.y.mean());
  const MlFit ml = fit_ml(train, opts.link, ReferenceMean(support, mu0));

  std::vector<int> labels(static_cast<std::size_t>(test.n()));
  for (Eigen::Index i = 0; i < test.n(); ++i) labels[static_cast<std::size_t>(i)] = test.y[i] >= y0 ? 1 : 0;
  std::vector<double> pred(static_cast<std::size_t>(test.n()));

  if (method == FitMethod::ml_spglm) {
    const Eigen::RowVectorXd beta = ml.beta_hat.transpose();
    const Eigen::Map<const Eigen::RowVectorXd> f0(ml.f0_hat.probs().data(),
                                                  static_cast<Eigen::Index>(ml.f0_hat.size()));
    for (Eigen::Index i = 0; i < test.n(); ++i) {
      bool hit = false;
      pred[static_cast<std::size_t>(i)] =
          draw_exceedance(scores, opts.link, beta, f0, test.X.row(i).transpose(), y0, hit);
    }
  } else {
    McmcConfig mc = opts.mcmc;
    mc.mu0 = mu0;
    RngStream rng(opts.seed, RngStream::stream_for(0, 1));
    const auto init = ml.converged ? std::optional<ChainInit>(ChainInit{ml.beta_hat, {}}) : std::nullopt;
    const PosteriorChain chain = run_chain(train, opts.link, mc, rng, init);
    std::vector<Eigen::Index> draws;
    const Eigen::Index B = chain.size();
    const Eigen::Index keep = opts.max_draws > 0 ? std::min<Eigen::Index>(opts.max_draws, B) : B;
    for (Eigen::Index t = 0; t < keep; ++t) draws.push_back((t * B) / keep);
    const auto n_test = test.n();
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n_test; ++i) {
      double total = 0.0;
      for (Eigen::Index b : draws) {
        bool hit = false;
        total += draw_exceedance(scores, opts.link, chain.beta.row(b), chain.f0.row(b),
                                 test.X.row(i).transpose(), y0, hit);
      }
      pred[static_cast<std::size_t>(i)] = total / static_cast<double>(draws.size());
    }
  }
  return roc_auc(pred, labels);
}

}  // namespace dirspglm
