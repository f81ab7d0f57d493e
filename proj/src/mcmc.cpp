#include "dirspglm/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dirspglm/error.hpp"
#include "dirspglm/stats.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "mcmc";
// Simplex coordinates are kept at or above this so Dirichlet log densities
// with shape < 1 stay finite.
constexpr double kProbFloor = 1e-300;
constexpr int kMaxRejections = 1000;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, kOrigin, msg); }

void floor_and_normalize(std::vector<double>& f) {
  double total = 0.0;
  for (double& v : f) {
    v = std::max(v, kProbFloor);
    total += v;
  }
  for (double& v : f) v /= total;
}

Eigen::VectorXd draw_truncated(const Eigen::VectorXd& current, const Eigen::MatrixXd& chol,
                               const std::function<bool(const Eigen::VectorXd&)>& in_A,
                               RngStream& rng) {
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    Eigen::VectorXd prop = sample_normal_vector(current, chol, rng);
    if (in_A(prop)) return prop;
  }
  fail(ErrorKind::sampler,
       "beta proposal left the feasible set 1000 times in a row; use a smaller rho");
}

double gaussian_log_density_kernel(const Eigen::VectorXd& d, const Eigen::MatrixXd& precision) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(precision);
  const double log_det = ldlt.vectorD().array().log().sum();
  return -0.5 * d.dot(precision * d) + 0.5 * log_det;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::vector<double> centering_distribution(const Dataset& data, CenteringMode mode) {
  const std::size_t k = data.support->size();
  std::vector<double> h(k, 1.0 / static_cast<double>(k));
  if (mode == CenteringMode::empirical) {
    const auto counts = data.counts();
    const double total = static_cast<double>(data.n()) + 0.5 * static_cast<double>(k);
    for (std::size_t l = 0; l < k; ++l) h[l] = (counts[l] + 0.5) / total;
  }
  return h;
}

void McmcConfig::validate() const {
  if (!(burn_in >= 0 && burn_in < n_iter))
    fail(ErrorKind::invalid_input, "burn-in must satisfy 0 <= burn_in < n_iter");
  if (!(rho > 0.0 && rho <= 1.0)) fail(ErrorKind::invalid_input, "rho must lie in (0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorKind::invalid_input, "alpha must be positive");
  for (double h : H)
    if (!(h > 0.0)) fail(ErrorKind::invalid_input, "centering distribution must be strictly positive");
}

BaselineDistribution PosteriorChain::f0_draw(Eigen::Index b) const {
  const Eigen::RowVectorXd row = f0.row(b);
  return BaselineDistribution::from_weights(support, std::span<const double>(row.data(), row.size()));
}

// ---------------------------------------------------------------------------
// Building blocks

Eigen::MatrixXd proposal_cholesky(const Eigen::MatrixXd& fisher, double rho) {
  const auto p = fisher.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(fisher);
  if (llt.info() != Eigen::Success) {
    const double lambda = 1e-6 * std::max(fisher.trace(), 1e-12) / static_cast<double>(p);
    llt.compute(fisher + lambda * Eigen::MatrixXd::Identity(p, p));
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::singular_information, "Fisher information is not positive definite even after ridging");
  }
  // cov = rho * I^{-1} = rho * L^{-T} L^{-1}; its lower factor is the
  // Cholesky factor of the inverse.
  const Eigen::MatrixXd cov = rho * llt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::LLT<Eigen::MatrixXd> cov_llt(0.5 * (cov + cov.transpose()));
  return cov_llt.matrixL();
}

BetaProposal propose_beta(const Eigen::VectorXd& current, const Eigen::MatrixXd& fisher, double rho,
                          const std::function<bool(const Eigen::VectorXd&)>& in_A, RngStream& rng) {
  return {draw_truncated(current, proposal_cholesky(fisher, rho), in_A, rng), 0.0};
}

double gaussian_log_q_ratio(const Eigen::VectorXd& current, const Eigen::MatrixXd& fisher_current,
                            const Eigen::VectorXd& proposal, const Eigen::MatrixXd& fisher_proposal,
                            double rho) {
  const Eigen::VectorXd d = proposal - current;
  return gaussian_log_density_kernel(d, fisher_proposal / rho) -
         gaussian_log_density_kernel(d, fisher_current / rho);
}

std::vector<double> f0_proposal_concentration(const Dataset& data, std::span<const double> theta,
                                              std::span<const double> log_norm, double alpha,
                                              std::span<const double> H, WeightScale scale) {
  const std::size_t k = H.size();
  std::vector<double> conc(k);
  for (std::size_t l = 0; l < k; ++l) conc[l] = alpha * H[l];
  const auto n = static_cast<std::size_t>(data.n());
  if (n == 0) return conc;

  // log c_i = -(theta_i y_i - b(theta_i)); omega_i = c_i / sum_j c_j.
  std::vector<double> log_c(n);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    log_c[i] = -(theta[i] * data.y[static_cast<Eigen::Index>(i)] - log_norm[i]);
    max_log = std::max(max_log, log_c[i]);
  }
  double total = 0.0;
  for (double& v : log_c) {
    v = std::exp(v - max_log);
    total += v;
  }
  const double mult = scale == WeightScale::sum_to_n ? static_cast<double>(n) : 1.0;
  for (std::size_t i = 0; i < n; ++i)
    conc[static_cast<std::size_t>(data.level[i])] += mult * log_c[i] / total;
  return conc;
}

F0Proposal propose_f0(const Dataset& data, std::span<const double> theta,
                      std::span<const double> log_norm, double alpha, std::span<const double> H,
                      WeightScale scale, RngStream& rng) {
  F0Proposal out;
  out.conc = f0_proposal_concentration(data, theta, log_norm, alpha, H, scale);
  out.probs = sample_dirichlet(DirichletParams(out.conc), rng);
  floor_and_normalize(out.probs);
  out.log_q = log_dirichlet_density(out.probs, out.conc);
  return out;
}

bool mh_accept(double log_target_new, double log_target_old, double log_q_ratio, RngStream& rng) {
  if (std::isnan(log_target_new) || log_target_new == -std::numeric_limits<double>::infinity())
    return false;
  const double log_a = log_target_new - log_target_old + log_q_ratio;
  if (log_a >= 0.0) return true;
  return std::log(rng.uniform()) < log_a;
}

double log_prior(const Eigen::VectorXd& beta, std::span<const double> f0, double alpha,
                 std::span<const double> H) {
  double lp = -0.5 * beta.squaredNorm();
  for (std::size_t l = 0; l < f0.size(); ++l) {
    const double a = alpha * H[l];
    if (a != 1.0) lp += (a - 1.0) * std::log(f0[l]);
  }
  return lp;
}

Eigen::VectorXd default_initial_beta(const Dataset& data, const LinkSpec& link) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(data.p());
  if (data.n() == 0 || in_constraint_set(data, link, beta)) return beta;
  if (data.p() > 0 && (data.X.col(0).array() == 1.0).all()) {
    beta[0] = link.g(data.y.mean());
  }
  return beta;
}

// ---------------------------------------------------------------------------
// Chain

namespace {

class Sampler {
 public:
  Sampler(const Dataset& data, const LinkSpec& link, const McmcConfig& cfg, std::vector<double> H,
          RngStream& rng)
      : data_(data), link_(link), cfg_(cfg), H_(std::move(H)), rng_(rng), k_(H_.size()) {}

  bool evaluate(const Eigen::VectorXd& beta, std::span<const double> f0, ObservationState& st) const {
    if (!cfg_.zero_tilt) return evaluate_observations(data_, link_, beta, f0, st, cfg_.exec);
    const Eigen::Index n = data_.n();
    st.theta = Eigen::VectorXd::Zero(n);
    st.log_norm = Eigen::VectorXd::Zero(n);
    double ll = 0.0;
    for (int l : data_.level) ll += std::log(f0[static_cast<std::size_t>(l)]);
    st.loglik = ll;
    st.feasible = std::isfinite(ll);
    return st.feasible;
  }

  double log_target(const Eigen::VectorXd& beta, std::span<const double> f0,
                    const ObservationState& st) const {
    return st.loglik + log_prior(beta, f0, cfg_.alpha, H_);
  }

  std::vector<double> concentration(const ObservationState& st) const {
    return f0_proposal_concentration(
        data_, {st.theta.data(), static_cast<std::size_t>(st.theta.size())},
        {st.log_norm.data(), static_cast<std::size_t>(st.log_norm.size())}, cfg_.alpha, H_,
        cfg_.f0_weight_scale);
  }

  bool in_A(const Eigen::VectorXd& beta) const {
    return cfg_.zero_tilt || in_constraint_set(data_, link_, beta);
  }

  Eigen::MatrixXd fisher(const ObservationState& st) const {
    return fisher_from_state(data_, link_, st);
  }

  // Returns the number of accepted moves.
  int beta_step(Eigen::VectorXd& beta, const std::vector<double>& f0, ObservationState& cur,
                double& lt, const Eigen::MatrixXd& frozen_fisher, const Eigen::MatrixXd& frozen_chol) {
    const auto in_A = [this](const Eigen::VectorXd& b) { return this->in_A(b); };
    const bool recompute = cfg_.fisher_mode == FisherMode::recomputed;
    const bool redraw = cfg_.beta_truncation == BetaTruncation::redraw;
    int accepted = 0;

    if (cfg_.beta_update == BetaUpdate::joint) {
      const Eigen::MatrixXd fisher_cur = recompute ? fisher(cur) : frozen_fisher;
      const Eigen::MatrixXd chol = recompute ? proposal_cholesky(fisher_cur, cfg_.rho) : frozen_chol;
      Eigen::VectorXd prop = redraw ? draw_truncated(beta, chol, in_A, rng_) : sample_normal_vector(beta, chol, rng_);
      prop_ = cur;
      ++beta_stats.proposed;
      if (in_A(prop) && evaluate(prop, f0, prop_)) {
        double log_q = 0.0;
        if (recompute) log_q = gaussian_log_q_ratio(beta, fisher_cur, prop, fisher(prop_), cfg_.rho);
        const double lt_new = log_target(prop, f0, prop_);
        if (mh_accept(lt_new, lt, log_q, rng_)) {
          beta = std::move(prop);
          std::swap(cur, prop_);
          lt = lt_new;
          ++accepted;
        }
      }
    } else {
      for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const Eigen::MatrixXd fisher_cur = recompute ? fisher(cur) : frozen_fisher;
        const double sd_cur = std::sqrt(cfg_.rho / std::max(fisher_cur(j, j), 1e-300));
        Eigen::VectorXd prop = beta;
        bool found = false;
        for (int attempt = 0; attempt < (redraw ? kMaxRejections : 1) && !found; ++attempt) {
          prop[j] = beta[j] + sd_cur * rng_.normal();
          found = in_A(prop);
        }
        prop_ = cur;
        ++beta_stats.proposed;
        if (!found && !redraw) continue;
        if (!found) fail(ErrorKind::sampler, "beta proposal left the feasible set 1000 times in a row; use a smaller rho");
        if (!evaluate(prop, f0, prop_)) continue;
        double log_q = 0.0;
        if (recompute) {
          const double sd_prop = std::sqrt(cfg_.rho / std::max(fisher(prop_)(j, j), 1e-300));
          const double d = prop[j] - beta[j];
          log_q = (-0.5 * d * d / (sd_prop * sd_prop) - std::log(sd_prop)) -
                  (-0.5 * d * d / (sd_cur * sd_cur) - std::log(sd_cur));
        }
        const double lt_new = log_target(prop, f0, prop_);
        if (mh_accept(lt_new, lt, log_q, rng_)) {
          beta = std::move(prop);
          std::swap(cur, prop_);
          lt = lt_new;
          ++accepted;
        }
      }
    }
    beta_stats.accepted += accepted;
    return accepted;
  }

  int f0_step(const Eigen::VectorXd& beta, std::vector<double>& f0, ObservationState& cur,
              double& lt) {
    int accepted = 0;
    if (cfg_.f0_move == F0Move::whole_vector) {
      const auto conc = concentration(cur);
      std::vector<double> prop = sample_dirichlet(DirichletParams(conc), rng_);
      floor_and_normalize(prop);
      ++f0_stats.proposed;
      prop_ = cur;
      if (evaluate(beta, prop, prop_)) {
        const auto conc_back = concentration(prop_);
        const double lt_new = log_target(beta, prop, prop_);
        const double log_q =
            log_dirichlet_density(f0, conc_back) - log_dirichlet_density(prop, conc);
        if (mh_accept(lt_new, lt, log_q, rng_)) {
          f0 = std::move(prop);
          std::swap(cur, prop_);
          lt = lt_new;
          ++accepted;
        }
      }
      f0_stats.accepted += accepted;
      return accepted;
    }

    const double km2 = static_cast<double>(k_) - 2.0;
    for (std::size_t j = 0; j < k_; ++j) {
      const double fj = f0[j];
      if (!(1.0 - fj > 0.0)) continue;
      const auto conc = concentration(cur);
      const double total = std::accumulate(conc.begin(), conc.end(), 0.0);
      const double new_fj = std::clamp(sample_beta(conc[j], total - conc[j], rng_), kProbFloor,
                                       1.0 - 1e-15);
      const double scale = (1.0 - new_fj) / (1.0 - fj);
      std::vector<double> prop(f0);
      for (std::size_t m = 0; m < k_; ++m) prop[m] = m == j ? new_fj : f0[m] * scale;
      floor_and_normalize(prop);

      ++f0_stats.proposed;
      prop_ = cur;
      if (!evaluate(beta, prop, prop_)) continue;
      const auto conc_back = concentration(prop_);
      const double total_back = std::accumulate(conc_back.begin(), conc_back.end(), 0.0);
      const double lt_new = log_target(beta, prop, prop_);
      const double log_q = log_beta_density(f0[j], conc_back[j], total_back - conc_back[j]) -
                           log_beta_density(prop[j], conc[j], total - conc[j]) +
                           km2 * (std::log1p(-prop[j]) - std::log1p(-f0[j]));
      if (mh_accept(lt_new, lt, log_q, rng_)) {
        f0 = std::move(prop);
        std::swap(cur, prop_);
        lt = lt_new;
        ++accepted;
      }
    }
    f0_stats.accepted += accepted;
    return accepted;
  }

  const std::vector<double>& H() const noexcept { return H_; }

  BlockStats beta_stats;
  BlockStats f0_stats;

 private:
  const Dataset& data_;
  const LinkSpec& link_;
  const McmcConfig& cfg_;
  std::vector<double> H_;
  RngStream& rng_;
  std::size_t k_;
  ObservationState prop_;
};

Eigen::RowVectorXd reported_f0(const std::vector<double>& f0, const Support& support, double mu0,
                               bool tilt) {
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(f0.size()));
  if (!tilt) {
    for (std::size_t l = 0; l < f0.size(); ++l) row[static_cast<Eigen::Index>(l)] = f0[l];
    return row;
  }
  const double theta = kernel::solve_theta(support.scores(), f0, mu0, 0.0);
  kernel::tilt_weights(support.scores(), f0, theta, {row.data(), f0.size()});
  return row;
}

}  // namespace

PosteriorChain run_chain(const Dataset& data, const LinkSpec& link, const McmcConfig& config,
                         RngStream& rng, const std::optional<ChainInit>& init) {
  config.validate();
  const Support& support = *data.support;
  const std::size_t k = support.size();
  {
    const auto counts = data.counts();
    if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) < 2)
      fail(ErrorKind::invalid_input, "data must contain at least two distinct response values");
  }

  std::vector<double> H = config.H.empty() ? centering_distribution(data, CenteringMode::empirical)
                                           : config.H;
  if (H.size() != k) fail(ErrorKind::invalid_input, "centering distribution length differs from support size");
  {
    const double total = std::accumulate(H.begin(), H.end(), 0.0);
    for (double& h : H) h /= total;
  }

  const double mu0 = config.mu0.value_or(data.y.mean());
  (void)ReferenceMean(support, mu0);

  Eigen::VectorXd beta = init && init->beta.size() > 0 ? init->beta : default_initial_beta(data, link);
  if (beta.size() != data.p()) fail(ErrorKind::invalid_input, "initial beta has the wrong length");
  std::vector<double> f0;
  if (init && !init->f0.empty()) {
    f0 = init->f0;
    if (f0.size() != k) fail(ErrorKind::invalid_input, "initial f0 has the wrong length");
  } else {
    f0 = data.counts();
    for (std::size_t l = 0; l < k; ++l) f0[l] += config.alpha * H[l];
  }
  floor_and_normalize(f0);

  Sampler sampler(data, link, config, H, rng);
  if (!sampler.in_A(beta)) fail(ErrorKind::invalid_input, "initial beta gives fitted means outside the support interval");
  ObservationState cur;
  if (!sampler.evaluate(beta, f0, cur)) fail(ErrorKind::invalid_input, "likelihood is undefined at the initial state");
  double lt = sampler.log_target(beta, f0, cur);

  Eigen::MatrixXd frozen_fisher, frozen_chol;
  if (config.update_beta && config.fisher_mode == FisherMode::frozen_at_init) {
    frozen_fisher = sampler.fisher(cur);
    frozen_chol = proposal_cholesky(frozen_fisher, config.rho);
  }

  const int stored = config.n_iter - config.burn_in;
  PosteriorChain chain;
  chain.support = data.support;
  chain.link = link;
  chain.mu0 = mu0;
  chain.config = config;
  chain.config.H = H;
  chain.seed = rng.seed();
  chain.stream_id = rng.stream_id();
  chain.beta.resize(stored, data.p());
  chain.f0.resize(stored, static_cast<Eigen::Index>(k));
  chain.beta_accepted.reserve(static_cast<std::size_t>(stored));
  chain.f0_accepted.reserve(static_cast<std::size_t>(stored));

  const bool tilt_report = config.report_tilt && !config.zero_tilt;
  for (int iter = 0; iter < config.n_iter; ++iter) {
    const bool keep = iter >= config.burn_in;
    if (iter == config.burn_in) chain.f0_before_first = reported_f0(f0, support, mu0, tilt_report);
    int beta_acc = 0;
    if (config.update_beta) beta_acc = sampler.beta_step(beta, f0, cur, lt, frozen_fisher, frozen_chol);
    const int f0_acc = sampler.f0_step(beta, f0, cur, lt);
    if (keep) {
      const Eigen::Index b = iter - config.burn_in;
      chain.beta.row(b) = beta.transpose();
      chain.f0.row(b) = reported_f0(f0, support, mu0, tilt_report);
      chain.beta_accepted.push_back(beta_acc);
      chain.f0_accepted.push_back(f0_acc);
    }
  }
  chain.beta_stats = sampler.beta_stats;
  chain.f0_stats = sampler.f0_stats;
  return chain;
}

// ---------------------------------------------------------------------------
// Summaries

std::vector<ParameterSummary> posterior_summaries(const PosteriorChain& chain, double level) {
  if (chain.size() == 0) fail(ErrorKind::invalid_input, "empty chain");
  std::vector<ParameterSummary> out;
  const auto summarize = [&](std::string name, const Eigen::VectorXd& col) {
    std::vector<double> v(col.data(), col.data() + col.size());
    ParameterSummary s;
    s.name = std::move(name);
    s.mean = stats::mean(v);
    s.sd = stats::sd(v);
    s.median = stats::median(v);
    const auto ci = stats::equal_tailed(std::move(v), level);
    s.lower = ci.lower;
    s.upper = ci.upper;
    out.push_back(std::move(s));
  };
  for (Eigen::Index j = 0; j < chain.beta.cols(); ++j)
    summarize("beta_" + std::to_string(j), chain.beta.col(j));
  for (Eigen::Index l = 0; l < chain.f0.cols(); ++l)
    summarize("f0_" + std::to_string(l), chain.f0.col(l));
  return out;
}

}  // namespace dirspglm
