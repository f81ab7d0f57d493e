#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dirspglm/error.hpp"
#include "dirspglm/sim.hpp"
#include "oracles.hpp"

using namespace dirspglm;

TEST_CASE("scenario baselines") {
  const auto s1 = scenario_f0(SimScenario::from_id(1));
  const auto s2 = scenario_f0(SimScenario::from_id(2));
  const auto p1 = oracle::trunc_poisson(1.0, 6);
  const auto p2 = oracle::trunc_poisson(1.0, 6, 3.0);
  for (std::size_t l = 0; l < 6; ++l) {
    CHECK(s1[l] == doctest::Approx(p1[l]).epsilon(1e-12));
    CHECK(s2[l] == doctest::Approx(p2[l]).epsilon(1e-12));
  }
  const double m1 = scenario_reference_mean(SimScenario::from_id(1));
  CHECK(scenario_reference_mean(SimScenario::from_id(2)) == m1);
  CHECK(std::abs(m1 - 0.99691) < 5e-5);
  const auto truth2 = scenario_truth_f0(SimScenario::from_id(2));
  const auto oracle2 = oracle::tilt({0, 1, 2, 3, 4, 5}, p2, oracle::solve_theta({0, 1, 2, 3, 4, 5}, p2, m1));
  for (std::size_t l = 0; l < 6; ++l) CHECK(std::abs(truth2[l] - oracle2[l]) < 1e-9);
  CHECK_THROWS_AS(SimScenario::from_id(3), Error);

  const auto truths = scenario_truths(SimScenario::from_id(1));
  REQUIRE(truths.size() == 8);
  CHECK(truths[0].first == "beta_0");
  CHECK(truths[0].second == -0.7);
  CHECK(truths[7].first == "f0_5");
}

TEST_CASE("simulated data") {
  const auto sc = SimScenario::from_id(1);
  RngStream a(1, 0), b(1, 0);
  const auto d1 = simulate_dataset(500, sc, a);
  const auto d2 = simulate_dataset(500, sc, b);
  CHECK(d1.y == d2.y);
  CHECK(d1.X == d2.X);
  CHECK((d1.X.col(0).array() == 1.0).all());
  // Marginal mean near E exp(-0.7 + 0.2 z) = exp(-0.68).
  CHECK(std::abs(d1.y.mean() - std::exp(-0.68)) < 0.12);
}

TEST_CASE("metrics from records") {
  std::vector<ReplicateRecord> rec;
  const double nan = std::nan("");
  // Three replicates of one parameter with truth 1.
  const double ml_est[] = {1.2, 0.7, 1.1};
  const double dir_est[] = {1.1, 0.9, 1.0};
  for (int r = 0; r < 3; ++r) {
    rec.push_back({r, "ml_spglm", "beta_0", ml_est[r], ml_est[r] - 0.5, ml_est[r] + 0.5, 1});
    rec.push_back({r, "dir_spglm", "beta_0", dir_est[r], dir_est[r] - 0.25, dir_est[r] + 0.25, r != 1});
    rec.push_back({r, "ml_spglm", "f0_0", 0.5, nan, nan, -1});
    rec.push_back({r, "dir_spglm", "f0_0", 0.4, 0.3, 0.6, 1});
  }
  const std::vector<std::pair<std::string, double>> truth{{"beta_0", 1.0}, {"f0_0", 0.5}};
  const auto t = metrics_from_records(rec, truth);
  const auto& ml = t.at("beta_0", "ml_spglm");
  const auto& dir = t.at("beta_0", "dir_spglm");
  CHECK(ml.rrmse_a == 1.0);
  CHECK(ml.rl_m == 1.0);
  CHECK(ml.est_a == doctest::Approx(1.0));
  CHECK(ml.est_m == doctest::Approx(1.1));
  CHECK(ml.cp == 1.0);
  CHECK(dir.cp == doctest::Approx(2.0 / 3.0));
  CHECK(dir.n_reps == 3);
  // Root mean squared errors: ML sqrt((.04+.09+.01)/3), Dir sqrt((.01+.01+0)/3).
  CHECK(dir.rrmse_a == doctest::Approx(std::sqrt(0.02 / 0.14)));
  // Median absolute errors: ML 0.2, Dir 0.1.
  CHECK(dir.rrmse_m == doctest::Approx(0.5));
  CHECK(dir.rl_a == doctest::Approx(0.5));
  CHECK(dir.rl_m == doctest::Approx(0.5));
  CHECK(std::isnan(t.at("f0_0", "ml_spglm").cp));
  CHECK(t.at("f0_0", "dir_spglm").cp == 1.0);

  SUBCASE("csv round trip recomputes identical metrics") {
    std::ostringstream os;
    write_records_csv(os, rec);
    std::istringstream is(os.str());
    const auto back = read_records_csv(is);
    REQUIRE(back.size() == rec.size());
    const auto t2 = metrics_from_records(back, truth);
    std::ostringstream m1, m2;
    write_metrics_csv(m1, t);
    write_metrics_csv(m2, t2);
    CHECK(m1.str() == m2.str());
    CHECK(m1.str().rfind("param,method,truth,", 0) == 0);
  }
}

TEST_CASE("small replication runs") {
  ReplicationConfig rc;
  rc.R = 3;
  rc.n = 40;
  rc.mcmc.n_iter = 300;
  rc.mcmc.burn_in = 100;
  rc.seed = 77;

  SUBCASE("deterministic and independent of the job count") {
    const auto a = run_replication(rc);
    rc.jobs = 2;
    const auto b = run_replication(rc);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].param == b.records[i].param);
      CHECK(a.records[i].estimate == b.records[i].estimate);
    }
    CHECK(a.attempted == 3);
    CHECK(a.metrics.at("beta_1", "dir_spglm").n_reps + a.failures == 3);
  }
  SUBCASE("ML only") {
    rc.dir_spglm = false;
    const auto r = run_replication(rc);
    for (const auto& row : r.metrics.rows) CHECK(row.method == "ml_spglm");
    CHECK(r.metrics.at("beta_0", "ml_spglm").rrmse_m == 1.0);
  }
  SUBCASE("a single replicate") {
    rc.R = 1;
    const auto r = run_replication(rc);
    CHECK(r.attempted == 1);
  }
}

TEST_CASE("held-out scoring") {
  SimScenario sc = SimScenario::from_id(1);
  sc.beta_true << -0.7, 0.8;
  RngStream a(5, 0), b(5, 1);
  const auto train = simulate_dataset(100, sc, a);
  const auto test = simulate_dataset(400, sc, b);
  HeldoutOptions o;
  o.mcmc.n_iter = 600;
  o.mcmc.burn_in = 200;
  o.max_draws = 100;
  const double ml = heldout_auc(train, test, 2.0, FitMethod::ml_spglm, o);
  const double dir = heldout_auc(train, test, 2.0, FitMethod::dir_spglm, o);
  CHECK(ml > 0.5);
  CHECK(dir > 0.5);
  CHECK(heldout_auc(train, test, 2.0, FitMethod::dir_spglm, o) == dir);
}
