#include <doctest.h>

#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>

#include "dirspglm/error.hpp"
#include "dirspglm/rng.hpp"
#include "oracles.hpp"

using namespace dirspglm;

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(5, 0), b(5, 0), c(5, 1), d(6, 0);
  for (int i = 0; i < 10; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x != c.uniform());
    CHECK(x != d.uniform());
  }
  CHECK(RngStream::stream_for(3, 2) == 3 * 65536 + 2);
}

TEST_CASE("uniform stays in the open unit interval") {
  RngStream r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("dirichlet draws") {
  SUBCASE("single cell") {
    RngStream r(2, 0);
    CHECK(sample_dirichlet(DirichletParams({3.0}), r) == std::vector<double>{1.0});
  }
  SUBCASE("symmetric mean") {
    RngStream r(3, 0);
    const int N = 100000;
    std::vector<double> sum(3, 0.0);
    for (int i = 0; i < N; ++i) {
      const auto d = sample_dirichlet(DirichletParams({2, 2, 2}), r);
      CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0) - 1.0) < 1e-12);
      for (int l = 0; l < 3; ++l) sum[l] += d[l];
    }
    // Marginal Beta(2,4): variance 8/252.
    const double se = std::sqrt(8.0 / 252.0 / N);
    for (int l = 0; l < 3; ++l) CHECK(std::abs(sum[l] / N - 1.0 / 3.0) < 3 * se);
  }
  SUBCASE("lopsided mean") {
    RngStream r(4, 0);
    const int N = 100000;
    double sum = 0.0;
    for (int i = 0; i < N; ++i) sum += sample_dirichlet(DirichletParams({1000, 1}), r)[0];
    const double m = 1000.0 / 1001.0;
    const double se = std::sqrt(m * (1 - m) / 1002.0 / N);
    CHECK(std::abs(sum / N - m) < 3 * se);
  }
  SUBCASE("tiny concentrations stay on the simplex") {
    RngStream r(5, 0);
    for (int i = 0; i < 1000; ++i) {
      const auto d = sample_dirichlet(DirichletParams({1e-3, 1e-3, 1e-3, 1e-3}), r);
      double t = 0;
      for (double v : d) {
        CHECK(v >= 0.0);
        t += v;
      }
      CHECK(std::abs(t - 1.0) < 1e-12);
    }
  }
  SUBCASE("invalid concentrations") {
    CHECK_THROWS_AS(DirichletParams({1.0, 0.0}), Error);
    CHECK_THROWS_AS(DirichletParams({1.0, -1.0}), Error);
    CHECK_THROWS_AS(DirichletParams({}), Error);
  }
}

TEST_CASE("beta draws match the Beta CDF") {
  RngStream r(6, 0);
  for (auto [a, b] : {std::pair{0.3, 2.0}, std::pair{2.5, 1.5}, std::pair{0.2, 0.2}}) {
    std::vector<double> x(20000);
    for (auto& v : x) v = sample_beta(a, b, r);
    boost::math::beta_distribution<double> dist(a, b);
    const double ks = oracle::ks_distance(x, [&](double v) { return boost::math::cdf(dist, std::clamp(v, 0.0, 1.0)); });
    CHECK(ks < 0.015);
  }
}

TEST_CASE("tilted dirichlet draws") {
  auto s2 = make_support({0, 1});
  SUBCASE("binary draws are deterministic") {
    RngStream r(7, 0);
    for (int i = 0; i < 100; ++i) {
      const auto t = sample_tdir({DirichletParams({0.7, 3.0}), 0.7, s2}, r);
      CHECK(std::abs(t.weights[0] - 0.3) < 1e-10);
      CHECK(std::abs(t.weights[1] - 0.7) < 1e-10);
    }
  }
  SUBCASE("mean constraint holds on every draw") {
    auto s = make_support({0, 1, 2, 3, 4, 5});
    RngStream r(8, 0);
    for (int i = 0; i < 2000; ++i) {
      const auto t = sample_tdir({DirichletParams({1, 1, 1, 1, 1, 1}), 1.7, s}, r);
      double m = 0, tot = 0;
      for (int l = 0; l < 6; ++l) {
        m += l * t.weights[l];
        tot += t.weights[l];
      }
      CHECK(std::abs(m - 1.7) < 1e-8);
      CHECK(std::abs(tot - 1.0) < 1e-12);
    }
  }
  SUBCASE("symmetric case and non-Dirichlet moments") {
    auto s = make_support({0, 1, 2});
    RngStream r(9, 0);
    const int N = 100000;
    std::vector<double> m1(3, 0), m2(3, 0);
    for (int i = 0; i < N; ++i) {
      const auto t = sample_tdir({DirichletParams({1, 1, 1}), 1.0, s}, r);
      for (int l = 0; l < 3; ++l) {
        m1[l] += t.weights[l];
        m2[l] += t.weights[l] * t.weights[l];
      }
    }
    for (int l = 0; l < 3; ++l) {
      m1[l] /= N;
      m2[l] /= N;
    }
    const double sd0 = std::sqrt(m2[0] - m1[0] * m1[0]);
    CHECK(std::abs(m1[0] - m1[2]) < 3 * std::sqrt(2.0) * sd0 / std::sqrt(N));

    // Method-of-moments Dirichlet fit from the first cell, then compare the
    // implied second moment of the middle cell. A Dirichlet law would agree.
    const double a0 = m1[0] * (1 - m1[0]) / (m2[0] - m1[0] * m1[0]) - 1;
    const double var1_dir = m1[1] * (1 - m1[1]) / (a0 + 1);
    const double var1 = m2[1] - m1[1] * m1[1];
    // Crude MC SE of the sample variance: sqrt(2/N) * var (normal approx),
    // inflated by 2 for the non-normal shape.
    CHECK(std::abs(var1 - var1_dir) > 5 * 2 * std::sqrt(2.0 / N) * var1);
  }
}

TEST_CASE("multivariate normal draws") {
  RngStream r(10, 0);
  Eigen::VectorXd mean(2);
  mean << 1.5, -2;
  CHECK(sample_normal_vector(mean, Eigen::MatrixXd::Zero(2, 2), r) == mean);

  const int N = 100000;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd z = sample_normal_vector(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), r);
    cov += z * z.transpose();
  }
  cov /= N;
  // SE of a variance estimate ~ sqrt(2/N), of a covariance ~ sqrt(1/N).
  CHECK(std::abs(cov(0, 0) - 1) < 4 * std::sqrt(2.0 / N));
  CHECK(std::abs(cov(1, 1) - 1) < 4 * std::sqrt(2.0 / N));
  CHECK(std::abs(cov(0, 1)) < 4 * std::sqrt(1.0 / N));

  RngStream a(11, 3), b(11, 3);
  CHECK(sample_normal_vector(mean, Eigen::MatrixXd::Identity(2, 2), a) ==
        sample_normal_vector(mean, Eigen::MatrixXd::Identity(2, 2), b));
}

TEST_CASE("log densities") {
  CHECK(log_beta_density(0.3, 1, 1) == doctest::Approx(0.0));
  CHECK(log_beta_density(0.3, 2, 3) ==
        doctest::Approx(std::log(boost::math::pdf(boost::math::beta_distribution<double>(2, 3), 0.3))));
  const std::vector<double> x{0.2, 0.3, 0.5}, a{2, 3, 4};
  const double expect = std::lgamma(9) - std::lgamma(2) - std::lgamma(3) - std::lgamma(4) + std::log(0.2) +
                        2 * std::log(0.3) + 3 * std::log(0.5);
  CHECK(log_dirichlet_density(x, a) == doctest::Approx(expect));
}
