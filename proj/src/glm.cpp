#include "dirspglm/glm.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dirspglm/error.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "glm_model";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, kOrigin, msg); }

}  // namespace

// ---------------------------------------------------------------------------
// Links

LinkSpec LinkSpec::parse(std::string_view name) {
  if (name == "log") return LinkSpec(LinkKind::log);
  if (name == "identity") return LinkSpec(LinkKind::identity);
  fail(ErrorKind::invalid_input, "unknown link '" + std::string(name) + "' (expected log or identity)");
}

std::string_view LinkSpec::name() const noexcept {
  return kind_ == LinkKind::log ? "log" : "identity";
}

double LinkSpec::g(double mu) const noexcept { return kind_ == LinkKind::log ? std::log(mu) : mu; }

double LinkSpec::g_inv(double eta) const noexcept {
  return kind_ == LinkKind::log ? std::exp(eta) : eta;
}

double LinkSpec::g_prime(double mu) const noexcept {
  return kind_ == LinkKind::log ? 1.0 / mu : 1.0;
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<double> Dataset::counts() const {
  std::vector<double> c(support->size(), 0.0);
  for (int l : level) c[static_cast<std::size_t>(l)] += 1.0;
  return c;
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.support = support;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), p());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.level.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    out.X.row(i) = X.row(rows[r]);
    out.y[i] = y[rows[r]];
    out.level[r] = level[static_cast<std::size_t>(rows[r])];
  }
  return out;
}

Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd y, SupportPtr support) {
  if (!support) fail(ErrorKind::invalid_input, "dataset without a support");
  if (X.rows() != y.size()) fail(ErrorKind::invalid_input, "design and response lengths differ");
  if (!X.allFinite()) fail(ErrorKind::invalid_input, "design contains non-finite entries");
  Dataset d;
  d.level.resize(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    auto idx = support->index_of(y[i]);
    if (!idx) {
      std::ostringstream os;
      os << "response " << y[i] << " at row " << i << " is not a support score";
      fail(ErrorKind::invalid_input, os.str());
    }
    d.level[static_cast<std::size_t>(i)] = static_cast<int>(*idx);
  }
  d.X = std::move(X);
  d.y = std::move(y);
  d.support = std::move(support);
  return d;
}

// ---------------------------------------------------------------------------
// Single-model API

double conditional_mean(const RegressionModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.beta.size()) fail(ErrorKind::domain, "covariate length does not match beta");
  const double mu = model.link.g_inv(x.dot(model.beta));
  if (!model.f0.support().is_interior(mu)) {
    std::ostringstream os;
    os << "conditional mean " << mu << " outside the open support interval";
    fail(ErrorKind::boundary, os.str());
  }
  return mu;
}

double observation_theta(const RegressionModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return solve_theta(model.f0, conditional_mean(model, x));
}

namespace {

ObservationState checked_state(const RegressionModel& model, const Dataset& data) {
  if (data.p() != model.beta.size()) fail(ErrorKind::design, "design width does not match beta");
  ObservationState state;
  // Surface the specific error for the first offending row.
  for (Eigen::Index i = 0; i < data.n(); ++i) observation_theta(model, data.X.row(i).transpose());
  if (!evaluate_observations(data, model.link, model.beta, model.f0.probs(), state))
    fail(ErrorKind::boundary, "likelihood undefined at this parameter");
  return state;
}

}  // namespace

double log_likelihood(const RegressionModel& model, const Dataset& data) {
  if (data.n() == 0) return 0.0;
  return checked_state(model, data).loglik;
}

Eigen::VectorXd score(const RegressionModel& model, const Dataset& data) {
  if (data.n() == 0) return Eigen::VectorXd::Zero(model.beta.size());
  return score_from_state(data, model.link, checked_state(model, data));
}

Eigen::MatrixXd fisher_information(const RegressionModel& model, const Dataset& data) {
  if (data.n() == 0) return Eigen::MatrixXd::Zero(model.beta.size(), model.beta.size());
  return fisher_from_state(data, model.link, checked_state(model, data));
}

// ---------------------------------------------------------------------------
// Batch evaluation

bool evaluate_observations(const Dataset& data, const LinkSpec& link, const Eigen::VectorXd& beta,
                           std::span<const double> f0, ObservationState& state, Execution exec) {
  const Eigen::Index n = data.n();
  const Support& support = *data.support;
  state.feasible = false;
  state.eta.noalias() = data.X * beta;
  state.mu.resize(n);
  if (state.theta.size() != n) state.theta = Eigen::VectorXd::Zero(n);
  state.log_norm.resize(n);
  state.variance.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    state.mu[i] = link.g_inv(state.eta[i]);
    if (!support.is_interior(state.mu[i])) {
      state.loglik = -std::numeric_limits<double>::infinity();
      return false;
    }
  }

  const auto un = static_cast<std::size_t>(n);
  kernel::ThetaBatch batch{{state.theta.data(), un}, {state.log_norm.data(), un},
                           {state.variance.data(), un}};
  const std::size_t failures =
      kernel::solve_thetas(support.scores(), f0, {state.mu.data(), un}, batch, exec);
  if (failures > 0) {
    state.theta.setZero();
    state.loglik = -std::numeric_limits<double>::infinity();
    return false;
  }

  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = f0[static_cast<std::size_t>(data.level[static_cast<std::size_t>(i)])];
    if (p <= 0.0) {
      ll = -std::numeric_limits<double>::infinity();
      break;
    }
    ll += state.theta[i] * data.y[i] - state.log_norm[i] + std::log(p);
  }
  state.loglik = ll;
  state.feasible = true;
  return true;
}

Eigen::VectorXd score_from_state(const Dataset& data, const LinkSpec& link,
                                 const ObservationState& state) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(data.p());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double denom = link.g_prime(state.mu[i]) * state.variance[i];
    g.noalias() += ((data.y[i] - state.mu[i]) / denom) * data.X.row(i).transpose();
  }
  return g;
}

Eigen::MatrixXd fisher_from_state(const Dataset& data, const LinkSpec& link,
                                  const ObservationState& state) {
  Eigen::VectorXd w(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (!(state.variance[i] > 0.0)) {
      std::ostringstream os;
      os << "zero conditional variance at observation " << i;
      fail(ErrorKind::singular_information, os.str());
    }
    const double gp = link.g_prime(state.mu[i]);
    w[i] = 1.0 / (gp * gp * state.variance[i]);
  }
  Eigen::MatrixXd info = data.X.transpose() * w.asDiagonal() * data.X;
  // Exact symmetry.
  return 0.5 * (info + info.transpose());
}

bool in_constraint_set(const Dataset& data, const LinkSpec& link, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = data.X * beta;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    if (!data.support->is_interior(link.g_inv(eta[i]))) return false;
  return true;
}

}  // namespace dirspglm
