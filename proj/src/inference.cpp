#include "dirspglm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dirspglm/error.hpp"
#include "dirspglm/stats.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "inference";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, kOrigin, msg); }

double limit_value(std::span<const double> scores, bool upper_side, double y0) {
  if (upper_side) return y0 <= scores.back() ? 1.0 : 0.0;
  return y0 <= scores.front() ? 1.0 : 0.0;
}

// Average exceedance over `rows` for draw b.
double row_average(const PosteriorChain& chain, const Eigen::MatrixXd& rows, double y0,
                   Eigen::Index b, std::size_t& boundary) {
  const auto scores = chain.support->scores();
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    bool hit = false;
    total += draw_exceedance(scores, chain.link, chain.beta.row(b), chain.f0.row(b),
                             rows.row(r).transpose(), y0, hit);
    if (hit) ++boundary;
  }
  return total / static_cast<double>(rows.rows());
}

FunctionalPosterior summarize(std::vector<double> samples, std::size_t boundary, double level) {
  FunctionalPosterior out;
  out.level = level;
  out.boundary_draws = boundary;
  out.point = stats::mean(samples);
  const auto ci = stats::equal_tailed(samples, level);
  out.lower = ci.lower;
  out.upper = ci.upper;
  out.samples = std::move(samples);
  return out;
}

FunctionalPosterior evaluate(const PosteriorChain& chain, const Eigen::MatrixXd& rows, double y0,
                             double level, Execution exec) {
  if (chain.size() == 0) fail(ErrorKind::invalid_input, "empty posterior chain");
  if (rows.rows() == 0) fail(ErrorKind::invalid_input, "empty covariate group");
  if (rows.cols() != chain.beta.cols()) fail(ErrorKind::invalid_input, "covariate length does not match the chain");
  if (!std::isfinite(y0)) fail(ErrorKind::domain, "threshold must be finite");
  std::vector<double> samples(static_cast<std::size_t>(chain.size()));
  const std::size_t boundary = exec == Execution::parallel
                                   ? kernel::exceedance_draws_parallel(chain, rows, y0, samples)
                                   : kernel::exceedance_draws_serial(chain, rows, y0, samples);
  return summarize(std::move(samples), boundary, level);
}

}  // namespace

double draw_exceedance(std::span<const double> scores, const LinkSpec& link,
                       const Eigen::Ref<const Eigen::RowVectorXd>& beta,
                       const Eigen::Ref<const Eigen::RowVectorXd>& f0,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double y0, bool& at_boundary) {
  at_boundary = false;
  const double mu = link.g_inv(beta.dot(x.transpose()));
  const double eps = 1e-8 * (scores.back() - scores.front());
  if (!(mu > scores.front() + eps)) {
    at_boundary = true;
    return limit_value(scores, false, y0);
  }
  if (!(mu < scores.back() - eps)) {
    at_boundary = true;
    return limit_value(scores, true, y0);
  }
  const std::span<const double> probs(f0.data(), static_cast<std::size_t>(f0.size()));
  try {
    return kernel::exceedance(scores, probs, mu, y0);
  } catch (const Error&) {
    // Mean unreachable under this draw's baseline: same limiting treatment.
    at_boundary = true;
    double m = 0.0;
    for (std::size_t l = 0; l < scores.size(); ++l) m += scores[l] * probs[l];
    return limit_value(scores, mu > m, y0);
  }
}

namespace kernel {

std::size_t exceedance_draws_serial(const PosteriorChain& chain, const Eigen::MatrixXd& rows,
                                    double y0, std::span<double> out) {
  std::size_t boundary = 0;
  for (Eigen::Index b = 0; b < chain.size(); ++b)
    out[static_cast<std::size_t>(b)] = row_average(chain, rows, y0, b, boundary);
  return boundary;
}

std::size_t exceedance_draws_parallel(const PosteriorChain& chain, const Eigen::MatrixXd& rows,
                                      double y0, std::span<double> out) {
  std::size_t boundary = 0;
  const Eigen::Index B = chain.size();
#pragma omp parallel for schedule(static) reduction(+ : boundary)
  for (Eigen::Index b = 0; b < B; ++b) {
    std::size_t local = 0;
    out[static_cast<std::size_t>(b)] = row_average(chain, rows, y0, b, local);
    boundary += local;
  }
  return boundary;
}

}  // namespace kernel

FunctionalPosterior exceedance_posterior(const PosteriorChain& chain, const ExceedanceQuery& query,
                                         double level, Execution exec) {
  return evaluate(chain, query.x.transpose(), query.y0, level, exec);
}

FunctionalPosterior group_exceedance(const PosteriorChain& chain, double y0,
                                     const Eigen::MatrixXd& group_rows, double level,
                                     Execution exec) {
  return evaluate(chain, group_rows, y0, level, exec);
}

Eigen::MatrixXd select_group(const Eigen::MatrixXd& X, Eigen::Index col, double value) {
  if (col < 0 || col >= X.cols()) fail(ErrorKind::invalid_input, "group column out of range");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (X(i, col) == value) keep.push_back(i);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), X.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(keep[r]);
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::invalid_input, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks, then the Mann-Whitney U of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      const int lab = labels[order[t]];
      if (lab != 0 && lab != 1) fail(ErrorKind::invalid_input, "labels must be 0 or 1");
      if (lab == 1) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorKind::invalid_input, "AUC needs both classes present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace dirspglm
