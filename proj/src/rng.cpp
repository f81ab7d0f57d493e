#include "dirspglm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dirspglm/error.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "rng_dist";

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t state = seed ^ splitmix64(stream_id);
  std::vector<std::uint32_t> words(8);
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t v = splitmix64(state);
    words[i] = static_cast<std::uint32_t>(v);
    words[i + 1] = static_cast<std::uint32_t>(v >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(seeded_engine(seed, stream_id)) {}

double RngStream::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are excluded.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::log_gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw Error(ErrorKind::domain, kOrigin, "gamma shape must be positive and finite");
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(g(engine_));
  }
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  return log_gamma(shape + 1.0) + std::log(uniform()) / shape;
}

DirichletParams::DirichletParams(std::vector<double> conc) : conc_(std::move(conc)) {
  if (conc_.empty()) throw Error(ErrorKind::domain, kOrigin, "empty Dirichlet concentration");
  for (double c : conc_)
    if (!(c > 0.0) || !std::isfinite(c))
      throw Error(ErrorKind::domain, kOrigin, "Dirichlet concentrations must be positive and finite");
}

double DirichletParams::total() const noexcept {
  return std::accumulate(conc_.begin(), conc_.end(), 0.0);
}

std::vector<double> sample_dirichlet(const DirichletParams& params, RngStream& rng) {
  const auto conc = params.conc();
  std::vector<double> out(conc.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < conc.size(); ++i) {
      out[i] = rng.log_gamma(conc[i]);
      max_log = std::max(max_log, out[i]);
    }
    if (!std::isfinite(max_log)) continue;
    double total = 0.0;
    for (double& v : out) {
      v = std::exp(v - max_log);
      total += v;
    }
    if (!(total > 0.0) || !std::isfinite(total)) continue;
    for (double& v : out) v /= total;
    return out;
  }
  throw Error(ErrorKind::sampler, kOrigin, "Dirichlet draw underflowed in 100 consecutive attempts");
}

BaselineDistribution sample_dirichlet(const DirichletParams& params, const SupportPtr& support,
                                      RngStream& rng) {
  if (!support || support->size() != params.size())
    throw Error(ErrorKind::domain, kOrigin, "Dirichlet dimension does not match support");
  return BaselineDistribution(support, sample_dirichlet(params, rng));
}

TiltedDistribution sample_tdir(const TiltedDirichletSpec& spec, RngStream& rng) {
  const BaselineDistribution raw = sample_dirichlet(spec.conc, spec.support, rng);
  const double theta = solve_theta(raw, spec.mu);
  return tilt_distribution(raw, theta);
}

Eigen::VectorXd sample_normal_vector(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_cov,
                                     RngStream& rng) {
  const auto p = mean.size();
  if (chol_cov.rows() != p || chol_cov.cols() != p)
    throw Error(ErrorKind::domain, kOrigin, "Cholesky factor dimension mismatch");
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z[i] = rng.normal();
  return mean + chol_cov.triangularView<Eigen::Lower>() * z;
}

double sample_beta(double a, double b, RngStream& rng) {
  const double la = rng.log_gamma(a);
  const double lb = rng.log_gamma(b);
  return 1.0 / (1.0 + std::exp(lb - la));
}

double log_dirichlet_density(std::span<const double> x, std::span<const double> conc) {
  double total = 0.0;
  double out = 0.0;
  for (std::size_t i = 0; i < conc.size(); ++i) {
    total += conc[i];
    out -= std::lgamma(conc[i]);
    if (conc[i] != 1.0) {
      if (x[i] <= 0.0) return conc[i] > 1.0 ? -std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::infinity();
      out += (conc[i] - 1.0) * std::log(x[i]);
    }
  }
  return out + std::lgamma(total);
}

double log_beta_density(double x, double a, double b) {
  const double xs[2] = {x, 1.0 - x};
  const double cs[2] = {a, b};
  return log_dirichlet_density(xs, cs);
}

}  // namespace dirspglm
