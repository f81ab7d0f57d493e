// Acceptance suite: one PASS/FAIL line per criterion. With no arguments
// every criterion runs; `acceptance 3 5` runs a subset. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/beta.hpp>

#include "dirspglm/glm.hpp"
#include "dirspglm/mcmc.hpp"
#include "dirspglm/ml_fit.hpp"
#include "dirspglm/rng.hpp"
#include "dirspglm/sim.hpp"
#include "dirspglm/stats.hpp"
#include "dirspglm/tilt.hpp"
#include "oracles.hpp"

using namespace dirspglm;

namespace {

// Tolerances and sizes, pinned.
constexpr double kRoundTripTol = 1e-8;
constexpr double kClosedFormTol = 1e-12;
constexpr double kTruthTol1 = 0.001;
constexpr double kTruthTol2 = 0.002;
constexpr double kScoreRelTol = 1e-5;
constexpr double kFisherRelTol = 1e-4;
constexpr double kKsMax = 0.02;
constexpr double kTvMax = 0.03;
constexpr double kBetaMeanTol = 0.03;
constexpr double kCpLow = 0.91, kCpHigh = 0.99;
constexpr double kRrmseLow = 0.65, kRrmseHigh = 1.0;
constexpr double kF0CpLow = 0.85, kF0CpHigh = 0.99;
constexpr double kAucSlack = 0.02;
constexpr double kAucShare = 0.80;
constexpr double kSkewMax = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

SupportPtr six() { return make_support({0, 1, 2, 3, 4, 5}); }

// ---------------------------------------------------------------------------

Outcome criterion1() {
  std::mt19937_64 gen(101);
  std::gamma_distribution<double> g(0.8, 1.0);
  std::uniform_int_distribution<int> kd(2, 8);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst_theta = 0, worst_w = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int k = kd(gen);
    std::vector<double> scores(static_cast<std::size_t>(k)), w(static_cast<std::size_t>(k));
    for (int l = 0; l < k; ++l) scores[static_cast<std::size_t>(l)] = l;
    for (auto& v : w) v = g(gen) + 1e-4;
    const auto f0 = BaselineDistribution::from_weights(make_support(scores), w);
    // |theta| up to 5 per unit of score range keeps the target mean interior.
    const double theta = 5.0 * u(gen);
    const auto t = tilt_distribution(f0, theta);
    const double back = solve_theta(f0, t.mean);
    const auto t2 = tilt_distribution(f0, back);
    worst_theta = std::max(worst_theta, std::abs(back - theta));
    for (int l = 0; l < k; ++l)
      worst_w = std::max(worst_w, std::abs(t.weights[static_cast<std::size_t>(l)] - t2.weights[static_cast<std::size_t>(l)]));
  }
  BaselineDistribution half(make_support({0, 1}), {0.5, 0.5});
  const auto b = tilt_distribution(half, std::log(7.0 / 3.0));
  const double closed = std::max({std::abs(solve_theta(half, 0.7) - std::log(7.0 / 3.0)), std::abs(b.weights[0] - 0.3),
                                  std::abs(b.weights[1] - 0.7), std::abs(b.log_norm - std::log(5.0 / 3.0))});
  Outcome o;
  o.pass = worst_theta < kRoundTripTol && worst_w < kRoundTripTol && closed < kClosedFormTol;
  o.detail = "max|dtheta|=" + fmt(worst_theta) + " max|dw|=" + fmt(worst_w) + " binary closed-form err=" + fmt(closed);
  return o;
}

Outcome criterion2() {
  const std::vector<double> table1{0.367, 0.368, 0.185, 0.062, 0.015, 0.003};
  const std::vector<double> table2{0.471, 0.232, 0.172, 0.085, 0.031, 0.009};
  const auto s1 = scenario_f0(SimScenario::from_id(1));
  const auto s2 = scenario_f0(SimScenario::from_id(2));
  const auto t2 = tilt_to_mean(s2, ReferenceMean(*s2.support_ptr(), 0.99691));
  // Diagnostic only: the same scenario-1 law expressed at reference mean 1.
  const auto s1_at_one = tilt_to_mean(s1, ReferenceMean(*s1.support_ptr(), 1.0));
  double e1 = 0, e2 = 0, e1_at_one = 0;
  for (std::size_t l = 0; l < 6; ++l) {
    e1 = std::max(e1, std::abs(s1[l] - table1[l]));
    e2 = std::max(e2, std::abs(t2[l] - table2[l]));
    e1_at_one = std::max(e1_at_one, std::abs(s1_at_one[l] - table1[l]));
  }
  return {e1 <= kTruthTol1 && e2 <= kTruthTol2, "scenario1 max err=" + fmt(e1) + " scenario2 max err=" + fmt(e2) +
                                                    " (scenario1 tilted to mean 1: max err=" + fmt(e1_at_one) + ")"};
}

// Random well-posed regression problem on support 0..5.
std::pair<Dataset, RegressionModel> random_problem(std::mt19937_64& gen, LinkKind kind) {
  std::normal_distribution<double> z(0, 1);
  std::gamma_distribution<double> g(1.5, 1.0);
  std::uniform_int_distribution<int> cell(0, 5);
  const int n = 40, p = 3;
  std::vector<double> w(6);
  for (auto& v : w) v = g(gen) + 0.05;
  const auto f0 = BaselineDistribution::from_weights(six(), w);
  const LinkSpec link(kind);
  Eigen::VectorXd beta(p);
  Eigen::MatrixXd X(n, p);
  for (bool ok = false; !ok;) {
    beta << (kind == LinkKind::log ? std::log(2.0) : 2.0) + 0.2 * z(gen), 0.2 * z(gen), 0.2 * z(gen);
    ok = true;
    for (int i = 0; i < n; ++i) {
      X.row(i) << 1.0, z(gen), z(gen);
      const double mu = link.g_inv(X.row(i).dot(beta));
      ok = ok && mu > 0.2 && mu < 4.8;
    }
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = cell(gen);
  return {make_dataset(X, y, six()), RegressionModel{beta, link, f0, std::nullopt}};
}

Outcome criterion3() {
  std::mt19937_64 gen(303);
  double worst_score = 0, worst_fisher = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto [data, model] = random_problem(gen, rep % 2 ? LinkKind::log : LinkKind::identity);
    const Eigen::VectorXd s = score(model, data);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      RegressionModel up = model, dn = model;
      up.beta[j] += h;
      dn.beta[j] -= h;
      const double fd = (log_likelihood(up, data) - log_likelihood(dn, data)) / (2 * h);
      worst_score = std::max(worst_score, std::abs(fd - s[j]) / std::max(1.0, std::abs(s[j])));
    }

    // Negative Hessian of the expected log-likelihood, whose expectation is
    // taken under the model at the evaluation point.
    std::vector<std::vector<double>> w;
    for (Eigen::Index i = 0; i < data.n(); ++i)
      w.push_back(tilt_distribution(model.f0, observation_theta(model, data.X.row(i).transpose())).weights);
    auto expected = [&](const Eigen::VectorXd& b) {
      RegressionModel e = model;
      e.beta = b;
      double total = 0;
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double th = observation_theta(e, data.X.row(i).transpose());
        const double bn = log_norm_const(e.f0, th);
        for (std::size_t l = 0; l < 6; ++l)
          total += w[static_cast<std::size_t>(i)][l] * (th * static_cast<double>(l) - bn + std::log(e.f0[l]));
      }
      return total;
    };
    const Eigen::MatrixXd I = fisher_information(model, data);
    const Eigen::Index p = I.rows();
    const double hh = 1e-4;
    Eigen::MatrixXd H(p, p);
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b) {
        auto at = [&](double da, double db) {
          Eigen::VectorXd v = model.beta;
          v[a] += da;
          v[b] += db;
          return expected(v);
        };
        H(a, b) = (at(hh, hh) - at(hh, -hh) - at(-hh, hh) + at(-hh, -hh)) / (4 * hh * hh);
      }
    worst_fisher = std::max(worst_fisher, (I + H).norm() / I.norm());
  }
  return {worst_score < kScoreRelTol && worst_fisher < kFisherRelTol,
          "score rel err=" + fmt(worst_score) + " Fisher rel err=" + fmt(worst_fisher)};
}

Outcome criterion4() {
  RngStream data_rng(404, 0);
  const Dataset sim = simulate_dataset(25, SimScenario::from_id(1), data_rng);
  const Dataset data = make_dataset(Eigen::MatrixXd::Ones(sim.n(), 1), sim.y, sim.support);

  McmcConfig cfg;
  cfg.n_iter = 11000;
  cfg.burn_in = 1000;
  cfg.update_beta = false;
  cfg.zero_tilt = true;
  cfg.f0_weight_scale = WeightScale::sum_to_n;
  cfg.H = centering_distribution(data, CenteringMode::empirical);
  RngStream rng(404, 1);
  const PosteriorChain chain = run_chain(data, LinkSpec(LinkKind::identity), cfg, rng);

  const auto counts = data.counts();
  double A = 0;
  std::vector<double> a(6);
  for (std::size_t l = 0; l < 6; ++l) A += (a[l] = cfg.alpha * chain.config.H[l] + counts[l]);
  double worst = 0;
  for (Eigen::Index l = 0; l < 6; ++l) {
    const std::vector<double> draws(chain.f0.col(l).data(), chain.f0.col(l).data() + chain.size());
    boost::math::beta_distribution<double> marg(a[static_cast<std::size_t>(l)], A - a[static_cast<std::size_t>(l)]);
    worst = std::max(worst, oracle::ks_distance(draws, [&](double x) { return boost::math::cdf(marg, std::clamp(x, 0.0, 1.0)); }));
  }
  return {worst < kKsMax && chain.size() == 10000, "max KS=" + fmt(worst) + " over " + std::to_string(chain.size()) + " draws"};
}

double total_variation(const std::vector<double>& draws, const std::vector<double>& edges,
                       const std::vector<double>& probs) {
  std::vector<double> hist(probs.size(), 0.0);
  for (double x : draws) {
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    std::size_t bin = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - edges.begin() - 1));
    hist[std::min(bin, probs.size() - 1)] += 1.0;
  }
  double tv = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) tv += std::abs(hist[j] / static_cast<double>(draws.size()) - probs[j]);
  return 0.5 * tv;
}

Outcome criterion5() {
  auto s = make_support({0, 1});
  Eigen::VectorXd y(3);
  y << 0, 1, 1;
  const Dataset data = make_dataset(Eigen::MatrixXd::Ones(3, 1), y, s);
  McmcConfig cfg;
  cfg.n_iter = 101000;
  cfg.burn_in = 1000;
  cfg.report_tilt = false;
  RngStream rng(505, 0);
  const PosteriorChain chain = run_chain(data, LinkSpec(LinkKind::identity), cfg, rng);

  // Exact posterior: the two-point tilt is fixed by the mean, so the
  // likelihood is mu^2 (1 - mu) and f0 keeps its Beta prior.
  const int bins = 20;
  std::vector<double> edges(bins + 1);
  for (int j = 0; j <= bins; ++j) edges[static_cast<std::size_t>(j)] = static_cast<double>(j) / bins;

  const int grid = 200000;  // midpoint rule per bin
  std::vector<double> beta_probs(bins, 0.0);
  double total = 0;
  for (int g = 0; g < grid; ++g) {
    const double m = (g + 0.5) / grid;
    const double dens = std::exp(-0.5 * m * m) * m * m * (1 - m);
    beta_probs[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(m * bins)))] += dens;
    total += dens;
  }
  for (auto& v : beta_probs) v /= total;

  const auto& H = chain.config.H;
  boost::math::beta_distribution<double> prior(cfg.alpha * H[0], cfg.alpha * H[1]);
  std::vector<double> f0_probs(bins);
  for (int j = 0; j < bins; ++j)
    f0_probs[static_cast<std::size_t>(j)] = boost::math::cdf(prior, edges[static_cast<std::size_t>(j + 1)]) -
                                            boost::math::cdf(prior, edges[static_cast<std::size_t>(j)]);

  const std::vector<double> beta_draws(chain.beta.col(0).data(), chain.beta.col(0).data() + chain.size());
  const std::vector<double> f0_draws(chain.f0.col(0).data(), chain.f0.col(0).data() + chain.size());
  const double tv_beta = total_variation(beta_draws, edges, beta_probs);
  const double tv_f0 = total_variation(f0_draws, edges, f0_probs);
  return {tv_beta < kTvMax && tv_f0 < kTvMax, "TV(beta)=" + fmt(tv_beta) + " TV(f0(s1))=" + fmt(tv_f0)};
}

// Criteria 6-8 share replication runs.
std::map<int, ReplicationResult> replication_cache;

const ReplicationResult& replication(int n) {
  auto it = replication_cache.find(n);
  if (it != replication_cache.end()) return it->second;
  ReplicationConfig rc;
  rc.n = n;
  rc.R = 200;
  rc.scenario = SimScenario::from_id(1);
  rc.seed = 20240101 + static_cast<std::uint64_t>(n);
  // Full-length chains at n = 25; shortened chains at n = 250.
  rc.mcmc.n_iter = n == 25 ? 5000 : 2500;
  rc.mcmc.burn_in = n == 25 ? 2000 : 1000;
  rc.jobs = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  return replication_cache.emplace(n, run_replication(rc)).first->second;
}

Outcome criterion6() {
  const auto& res = replication(250);
  const auto& m = res.metrics;
  const double t0 = -0.71, t1 = 0.20;
  bool pass = true;
  std::ostringstream os;
  for (const std::string method : {"ml_spglm", "dir_spglm"}) {
    const auto& b0 = m.at("beta_0", method);
    const auto& b1 = m.at("beta_1", method);
    pass = pass && std::abs(b0.est_a - t0) <= kBetaMeanTol && std::abs(b1.est_a - t1) <= kBetaMeanTol;
    pass = pass && b0.cp >= kCpLow && b0.cp <= kCpHigh && b1.cp >= kCpLow && b1.cp <= kCpHigh;
    os << method << ": Est_a=(" << fmt(b0.est_a) << "," << fmt(b1.est_a) << ") CP=(" << fmt(b0.cp) << ","
       << fmt(b1.cp) << ") ";
  }
  os << "failures=" << res.failures << "/" << res.attempted;
  return {pass, os.str()};
}

Outcome criterion7() {
  const auto& res = replication(25);
  const auto& d = res.metrics.at("beta_1", "dir_spglm");
  const bool pass = d.rrmse_m < 1.0 && d.rrmse_m >= kRrmseLow && d.rrmse_m <= kRrmseHigh && d.rl_m < 1.0;
  return {pass, "beta_1 RRMSE_m=" + fmt(d.rrmse_m) + " RL_m=" + fmt(d.rl_m) + " (RRMSE_a=" + fmt(d.rrmse_a) +
                    " RL_a=" + fmt(d.rl_a) + ") failures=" + std::to_string(res.failures) + "/" +
                    std::to_string(res.attempted)};
}

Outcome criterion8() {
  const auto& res = replication(25);
  const auto& m = res.metrics;
  bool pass = true;
  std::ostringstream os;
  for (const std::string cell : {"f0_4", "f0_5"}) {
    const auto& ml = m.at(cell, "ml_spglm");
    const auto& dir = m.at(cell, "dir_spglm");
    // "0.000" at three decimals.
    pass = pass && ml.est_m < 0.0005 && dir.est_m > 0.0;
    os << cell << " ML Est_m=" << fmt(ml.est_m, 3) << " Dir Est_m=" << fmt(dir.est_m, 3) << "; ";
  }
  os << "Dir CP:";
  for (int l = 0; l < 6; ++l) {
    const auto& dir = m.at("f0_" + std::to_string(l), "dir_spglm");
    pass = pass && dir.cp >= kF0CpLow && dir.cp <= kF0CpHigh;
    os << " " << fmt(dir.cp, 3);
  }
  return {pass, os.str()};
}

Outcome criterion9() {
  const int seeds = 50;
  int ok = 0;
  double mean_ml = 0, mean_dir = 0;
  const auto scenario = SimScenario::from_id(1);
  for (int s = 0; s < seeds; ++s) {
    RngStream train_rng(909 + static_cast<std::uint64_t>(s), 0), test_rng(909 + static_cast<std::uint64_t>(s), 1);
    const Dataset train = simulate_dataset(100, scenario, train_rng);
    const Dataset test = simulate_dataset(5000, scenario, test_rng);
    HeldoutOptions opts;
    opts.mcmc.n_iter = 2500;
    opts.mcmc.burn_in = 1000;
    opts.max_draws = 500;
    opts.seed = 909 + static_cast<std::uint64_t>(s);
    const double ml = heldout_auc(train, test, 4.0, FitMethod::ml_spglm, opts);
    const double dir = heldout_auc(train, test, 4.0, FitMethod::dir_spglm, opts);
    mean_ml += ml / seeds;
    mean_dir += dir / seeds;
    if (dir >= ml - kAucSlack) ++ok;
  }
  const double share = static_cast<double>(ok) / seeds;
  return {share >= kAucShare, "Dir >= ML - 0.02 in " + std::to_string(ok) + "/" + std::to_string(seeds) +
                                  " seeds; mean AUC ML=" + fmt(mean_ml) + " Dir=" + fmt(mean_dir)};
}

Outcome criterion10() {
  const int N = 100000;
  RngStream rng(1010, 0);
  const auto support = six();
  const auto H = scenario_f0(SimScenario::from_id(1));
  const DirichletParams prior(std::vector<double>(H.probs().begin(), H.probs().end()));
  const ReferenceMean mu0(*support, 1.0);
  const double c = 0.01 / std::sqrt(2.0);
  std::vector<double> theta(N);
  for (int i = 0; i < N; ++i) {
    const double eta = c * rng.normal() + c * rng.normal();
    const auto f0 = tilt_to_mean(sample_dirichlet(prior, support, rng), mu0);
    theta[static_cast<std::size_t>(i)] = solve_theta(f0, std::exp(eta));
  }
  const double m = stats::mean(theta);
  double m2 = 0, m3 = 0;
  for (double t : theta) {
    m2 += (t - m) * (t - m) / N;
    m3 += (t - m) * (t - m) * (t - m) / N;
  }
  const double se = std::sqrt(m2 / N);
  const double skew = m3 / std::pow(m2, 1.5);
  return {std::abs(m) < 3 * se && std::abs(skew) < kSkewMax,
          "mean=" + fmt(m) + " (3 SE=" + fmt(3 * se) + ") skewness=" + fmt(skew)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> all{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& [id, fn] : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures;
}
