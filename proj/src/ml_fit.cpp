#include "dirspglm/ml_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dirspglm/error.hpp"
#include "dirspglm/stats.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "ml_fit";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, kOrigin, msg); }

std::vector<double> softmax(std::span<const double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> f(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    f[i] = std::exp(z[i] - zmax);
    total += f[i];
  }
  for (double& v : f) v /= total;
  return f;
}

// Log-likelihood and its gradient in (beta, logits). `state` carries warm
// starts between calls.
bool evaluate_with_gradient(const Dataset& data, const LinkSpec& link, const Eigen::VectorXd& beta,
                            std::span<const double> logits, ObservationState& state,
                            Execution exec, double& loglik, Eigen::VectorXd& grad) {
  const auto f = softmax(logits);
  if (!evaluate_observations(data, link, beta, f, state, exec) || !std::isfinite(state.loglik))
    return false;
  loglik = state.loglik;

  const Eigen::Index p = data.p();
  const std::size_t k = f.size();
  const auto scores = data.support->scores();
  grad.resize(p + static_cast<Eigen::Index>(k));
  grad.head(p) = score_from_state(data, link, state);

  // d loglik / d z_m = sum_i [1{y_i = s_m} - w_im (1 + (y_i - mu_i)(s_m - mu_i) / b''_i)],
  // with w_im the tilted weight of cell m for observation i.
  std::vector<double> g(k, 0.0);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double th = state.theta[i];
    const double b = state.log_norm[i];
    const double mu = state.mu[i];
    const double resid = (data.y[i] - mu) / state.variance[i];
    for (std::size_t m = 0; m < k; ++m) {
      const double w = f[m] * std::exp(th * scores[m] - b);
      g[m] -= w * (1.0 + resid * (scores[m] - mu));
    }
    g[static_cast<std::size_t>(data.level[static_cast<std::size_t>(i)])] += 1.0;
  }
  for (std::size_t m = 0; m < k; ++m) grad[p + static_cast<Eigen::Index>(m)] = g[m];
  return true;
}

}  // namespace

bool ml_gradient(const Dataset& data, const LinkSpec& link, const Eigen::VectorXd& beta,
                 std::span<const double> logits, double& loglik, Eigen::VectorXd& grad) {
  ObservationState state;
  return evaluate_with_gradient(data, link, beta, logits, state, Execution::serial, loglik, grad);
}

MlFit fit_ml(const Dataset& data, const LinkSpec& link, const ReferenceMean& mu0,
             const MlOptions& opts) {
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const std::size_t k = data.support->size();
  if (n == 0) fail(ErrorKind::invalid_input, "cannot fit an empty dataset");
  const auto counts = data.counts();
  if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) < 2)
    fail(ErrorKind::invalid_input, "data must contain at least two distinct response values");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.X);
    if (qr.rank() < p) fail(ErrorKind::design, "design matrix is rank deficient");
  }

  // Free parameters: beta, then every logit except the reference cell (the
  // most frequent one), which stays at 0.
  const std::size_t ref = static_cast<std::size_t>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
  std::vector<double> logits(k);
  if (!opts.initial_logits.empty()) {
    if (opts.initial_logits.size() != k) fail(ErrorKind::invalid_input, "initial logits have the wrong length");
    logits = opts.initial_logits;
  } else {
    for (std::size_t l = 0; l < k; ++l) logits[l] = std::log(counts[l] + 0.5);
  }
  {
    const double shift = logits[ref];
    for (double& z : logits) z = std::clamp(z - shift, -opts.logit_cap, opts.logit_cap);
  }

  Eigen::VectorXd beta = opts.initial_beta;
  if (beta.size() == 0) {
    beta = Eigen::VectorXd::Zero(p);
    if ((data.X.col(0).array() == 1.0).all()) beta[0] = link.g(data.y.mean());
  }
  if (beta.size() != p) fail(ErrorKind::invalid_input, "initial beta has the wrong length");

  const Eigen::Index dim = p + static_cast<Eigen::Index>(k) - 1;
  std::vector<Eigen::Index> free_logit;  // position in x -> cell
  for (std::size_t l = 0; l < k; ++l)
    if (l != ref) free_logit.push_back(static_cast<Eigen::Index>(l));

  auto unpack = [&](const Eigen::VectorXd& x, Eigen::VectorXd& b, std::vector<double>& z) {
    b = x.head(p);
    z.assign(k, 0.0);
    for (std::size_t j = 0; j < free_logit.size(); ++j)
      z[static_cast<std::size_t>(free_logit[j])] = x[p + static_cast<Eigen::Index>(j)];
  };
  ObservationState state;
  const auto scores = data.support->scores();
  const double gauge_weight = static_cast<double>(n);
  double last_gauge = 0.0;
  // Objective is the negative log-likelihood plus the gauge term.
  auto objective = [&](const Eigen::VectorXd& x, double& F, Eigen::VectorXd& g) {
    Eigen::VectorXd b;
    std::vector<double> z;
    unpack(x, b, z);
    double ll = 0.0;
    Eigen::VectorXd full;
    if (!evaluate_with_gradient(data, link, b, z, state, opts.exec, ll, full)) return false;
    // The likelihood is flat along tilts of f0; a quadratic term in the
    // baseline mean pins that direction at mu0 and vanishes at the optimum.
    const auto f = softmax(z);
    double m = 0.0;
    for (std::size_t l = 0; l < k; ++l) m += f[l] * scores[l];
    const double gap = m - mu0.value();
    F = -ll + 0.5 * gauge_weight * gap * gap;
    g.resize(dim);
    g.head(p) = -full.head(p);
    for (std::size_t j = 0; j < free_logit.size(); ++j) {
      const auto l = static_cast<std::size_t>(free_logit[j]);
      g[p + static_cast<Eigen::Index>(j)] = -full[p + free_logit[j]] + gauge_weight * gap * f[l] * (scores[l] - m);
    }
    last_gauge = 0.5 * gauge_weight * gap * gap;
    return true;
  };

  Eigen::VectorXd x(dim);
  x.head(p) = beta;
  for (std::size_t j = 0; j < free_logit.size(); ++j)
    x[p + static_cast<Eigen::Index>(j)] = logits[static_cast<std::size_t>(free_logit[j])];

  double F = 0.0;
  Eigen::VectorXd g;
  if (!objective(x, F, g)) fail(ErrorKind::invalid_input, "likelihood undefined at the starting point");

  // Initial inverse-Hessian scaling: inverse Fisher for beta, 1/n for logits.
  Eigen::MatrixXd H0 = Eigen::MatrixXd::Identity(dim, dim) / static_cast<double>(n);
  {
    Eigen::LLT<Eigen::MatrixXd> llt(fisher_from_state(data, link, state));
    if (llt.info() == Eigen::Success)
      H0.topLeftCorner(p, p) = llt.solve(Eigen::MatrixXd::Identity(p, p));
  }
  Eigen::MatrixXd Hinv = H0;

  const double cap = opts.logit_cap;
  auto project = [&](Eigen::VectorXd& v) {
    for (Eigen::Index j = p; j < dim; ++j) v[j] = std::clamp(v[j], -cap, cap);
  };
  // Gradient with components blocked by an active bound zeroed.
  auto projected = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& gv) {
    Eigen::VectorXd pg = gv;
    for (Eigen::Index j = p; j < dim; ++j)
      if ((xv[j] <= -cap && gv[j] > 0.0) || (xv[j] >= cap && gv[j] < 0.0)) pg[j] = 0.0;
    return pg;
  };

  MlFit fit{link, {}, BaselineDistribution(data.support, std::vector<double>(k, 1.0 / static_cast<double>(k))),
            {}, {}, 0.0, false, 0, 0.0};
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    Eigen::VectorXd pg = projected(x, g);
    if (pg.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd d = -Hinv * pg;
    for (Eigen::Index j = p; j < dim; ++j)
      if (pg[j] == 0.0 && g[j] != 0.0) d[j] = 0.0;
    if (d.dot(pg) >= 0.0) {
      Hinv = H0;
      d = -Hinv * pg;
    }

    bool moved = false;
    Eigen::VectorXd x_new, g_new;
    double F_new = 0.0;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        x_new = x + t * d;
        project(x_new);
        if (objective(x_new, F_new, g_new) && F_new <= F + 1e-4 * g.dot(x_new - x) + 1e-13 * std::abs(F)) {
          moved = true;
          break;
        }
      }
      if (!moved) {
        Hinv = H0;
        d = -Hinv * pg;
      }
    }
    if (!moved) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double r = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
      Hinv = (I - r * s * yv.transpose()) * Hinv * (I - r * yv * s.transpose()) + r * s * s.transpose();
    }
    x = std::move(x_new);
    g = std::move(g_new);
    F = F_new;
  }

  // Re-evaluate at the final iterate so the cached state matches it.
  objective(x, F, g);
  Eigen::VectorXd b;
  std::vector<double> z;
  unpack(x, b, z);
  fit.beta_hat = b;
  fit.f0_raw = softmax(z);
  fit.f0_hat = tilt_to_mean(BaselineDistribution::from_weights(data.support, fit.f0_raw), mu0);
  fit.loglik = -(F - last_gauge);
  fit.n_iters = iter;
  fit.grad_max_norm = projected(x, g).lpNorm<Eigen::Infinity>();

  const Eigen::MatrixXd info = fisher_from_state(data, link, state);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) fail(ErrorKind::singular_information, "Fisher information at the MLE is singular");
  Eigen::MatrixXd vcov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.vcov = 0.5 * (vcov + vcov.transpose());
  return fit;
}

std::vector<WaldInterval> wald_ci(const MlFit& fit, double level) {
  if (!fit.converged) fail(ErrorKind::not_converged, "Wald intervals need a converged fit");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::domain, "level must lie in (0,1)");
  const double z = stats::normal_quantile(0.5 * (1.0 + level));
  std::vector<WaldInterval> out;
  for (Eigen::Index j = 0; j < fit.beta_hat.size(); ++j) {
    const double se = std::sqrt(fit.vcov(j, j));
    out.push_back({fit.beta_hat[j], fit.beta_hat[j] - z * se, fit.beta_hat[j] + z * se});
  }
  return out;
}

double exceedance_plugin(const MlFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x, double y0) {
  const RegressionModel model{fit.beta_hat, fit.link, fit.f0_hat, std::nullopt};
  const double mu = conditional_mean(model, x);
  return kernel::exceedance(fit.f0_hat.support().scores(), fit.f0_hat.probs(), mu, y0);
}

}  // namespace dirspglm
