#include "dirspglm/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dirspglm/error.hpp"

namespace dirspglm {

namespace {

constexpr const char* kOrigin = "tilt_core";

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, kOrigin, msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Support

Support::Support(std::vector<double> scores) : scores_(std::move(scores)) {
  if (scores_.size() < 2) fail(ErrorKind::domain, "support needs at least two scores");
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (!std::isfinite(scores_[i])) fail(ErrorKind::domain, "support scores must be finite");
    if (i > 0 && !(scores_[i] > scores_[i - 1]))
      fail(ErrorKind::domain, "support scores must be strictly increasing");
  }
}

bool Support::is_interior(double mu) const noexcept {
  const double eps = boundary_eps();
  return mu > front() + eps && mu < back() - eps;
}

std::optional<std::size_t> Support::index_of(double y) const noexcept {
  auto it = std::lower_bound(scores_.begin(), scores_.end(), y);
  if (it == scores_.end() || *it != y) return std::nullopt;
  return static_cast<std::size_t>(it - scores_.begin());
}

// ---------------------------------------------------------------------------
// BaselineDistribution

BaselineDistribution::BaselineDistribution(SupportPtr support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (!support_) fail(ErrorKind::domain, "baseline distribution without a support");
  if (probs_.size() != support_->size())
    fail(ErrorKind::domain, "baseline length does not match support size");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::domain, "baseline probabilities must lie in [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "baseline probabilities sum to " << total << ", not 1";
    fail(ErrorKind::domain, os.str());
  }
}

BaselineDistribution BaselineDistribution::from_weights(SupportPtr support,
                                                        std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorKind::domain, "weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail(ErrorKind::domain, "weights sum to zero");
  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
  return BaselineDistribution(std::move(support), std::move(probs));
}

double BaselineDistribution::mean() const noexcept {
  const auto s = support_->scores();
  double m = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) m += s[i] * probs_[i];
  return m;
}

bool BaselineDistribution::is_degenerate() const noexcept {
  return std::count_if(probs_.begin(), probs_.end(), [](double p) { return p > 0.0; }) < 2;
}

ReferenceMean::ReferenceMean(const Support& support, double mu0) : mu0_(mu0) {
  if (!std::isfinite(mu0) || !(mu0 > support.front() && mu0 < support.back()))
    fail(ErrorKind::boundary, "reference mean must lie strictly inside the support interval");
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernel {

TiltMoments tilt_moments(std::span<const double> scores, std::span<const double> probs,
                         double theta) {
  const std::size_t k = scores.size();
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i)
    if (probs[i] > 0.0) shift = std::max(shift, theta * scores[i]);

  // Centering the scores keeps the one-pass variance well conditioned.
  const double c = 0.5 * (scores.front() + scores.back());
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (probs[i] <= 0.0) continue;
    const double w = probs[i] * std::exp(theta * scores[i] - shift);
    const double d = scores[i] - c;
    m0 += w;
    m1 += w * d;
    m2 += w * d * d;
  }
  const double mean_c = m1 / m0;
  return {shift + std::log(m0), c + mean_c, std::max(0.0, m2 / m0 - mean_c * mean_c)};
}

double solve_theta(std::span<const double> scores, std::span<const double> probs, double mu,
                   double theta_start) {
  if (!std::isfinite(mu)) fail(ErrorKind::domain, "target mean is not finite");
  const double lo_s = scores.front();
  const double hi_s = scores.back();
  const double range = hi_s - lo_s;
  const double eps = 1e-8 * range;
  if (!(mu > lo_s + eps && mu < hi_s - eps)) {
    std::ostringstream os;
    os << "target mean " << mu << " outside the open support interval (" << lo_s << ", " << hi_s
       << ")";
    fail(ErrorKind::boundary, os.str());
  }

  // Reachable means are bounded by the extreme scores that carry mass.
  double lo_pos = std::numeric_limits<double>::infinity();
  double hi_pos = -lo_pos;
  int n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (probs[i] > 0.0) {
      ++n_pos;
      lo_pos = std::min(lo_pos, scores[i]);
      hi_pos = std::max(hi_pos, scores[i]);
    }
  }
  if (n_pos < 2) fail(ErrorKind::degenerate_baseline, "baseline is degenerate; tilting cannot move its mean");
  if (!(mu > lo_pos && mu < hi_pos)) {
    std::ostringstream os;
    os << "target mean " << mu << " unreachable: baseline mass lies in [" << lo_pos << ", "
       << hi_pos << "]";
    fail(ErrorKind::boundary, os.str());
  }

  const double tol = 1e-12 * std::max(1.0, range);
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double width = 1.0;
  double theta = std::clamp(std::isfinite(theta_start) ? theta_start : 0.0, -kThetaCap, kThetaCap);

  for (int iter = 0; iter < 400; ++iter) {
    const TiltMoments m = tilt_moments(scores, probs, theta);
    const double f = m.mean - mu;
    if (std::abs(f) <= tol) return theta;
    if (f < 0.0)
      lo = theta;
    else
      hi = theta;

    double next = m.variance > 0.0 ? theta - f / m.variance : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(lo) && std::isfinite(hi)) {
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(theta)))
        return theta;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    } else if (f < 0.0) {
      // No upper bracket yet: cap the step and double the cap each time.
      if (!(next > theta) || next - theta > width) next = theta + width;
      width *= 2.0;
      if (theta >= kThetaCap) fail(ErrorKind::boundary, "tilting parameter exceeds cap; target mean too close to support edge");
      next = std::min(next, kThetaCap);
    } else {
      if (!(next < theta) || theta - next > width) next = theta - width;
      width *= 2.0;
      if (theta <= -kThetaCap) fail(ErrorKind::boundary, "tilting parameter exceeds cap; target mean too close to support edge");
      next = std::max(next, -kThetaCap);
    }
    theta = next;
  }
  fail(ErrorKind::not_converged, "tilting-parameter solve did not converge");
}

void tilt_weights(std::span<const double> scores, std::span<const double> probs, double theta,
                  std::span<double> out) {
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (probs[i] > 0.0) shift = std::max(shift, theta * scores[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = probs[i] > 0.0 ? probs[i] * std::exp(theta * scores[i] - shift) : 0.0;
    total += out[i];
  }
  for (double& w : out) w /= total;
}

double exceedance(std::span<const double> scores, std::span<const double> probs, double mu,
                  double y0) {
  if (y0 <= scores.front()) return 1.0;
  if (y0 > scores.back()) return 0.0;
  const double theta = solve_theta(scores, probs, mu, 0.0);
  std::vector<double> w(scores.size());
  tilt_weights(scores, probs, theta, w);
  double tail = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= y0) tail += w[i];
  return std::clamp(tail, 0.0, 1.0);
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Value-level API

namespace {

void check_theta(double theta) {
  if (!std::isfinite(theta)) fail(ErrorKind::domain, "tilting parameter is not finite");
}

}  // namespace

double log_norm_const(const BaselineDistribution& f0, double theta) {
  check_theta(theta);
  return kernel::tilt_moments(f0.support().scores(), f0.probs(), theta).log_norm;
}

double tilted_mean(const BaselineDistribution& f0, double theta) {
  check_theta(theta);
  return kernel::tilt_moments(f0.support().scores(), f0.probs(), theta).mean;
}

double tilted_variance(const BaselineDistribution& f0, double theta) {
  check_theta(theta);
  return kernel::tilt_moments(f0.support().scores(), f0.probs(), theta).variance;
}

double solve_theta(const BaselineDistribution& f0, double mu) {
  return kernel::solve_theta(f0.support().scores(), f0.probs(), mu, 0.0);
}

TiltedDistribution tilt_distribution(const BaselineDistribution& f0, double theta) {
  check_theta(theta);
  const auto scores = f0.support().scores();
  const TiltMoments m = kernel::tilt_moments(scores, f0.probs(), theta);
  TiltedDistribution t;
  t.theta = theta;
  t.weights.resize(f0.size());
  kernel::tilt_weights(scores, f0.probs(), theta, t.weights);
  t.log_norm = m.log_norm;
  t.mean = m.mean;
  t.variance = m.variance;
  return t;
}

BaselineDistribution tilt_to_mean(const BaselineDistribution& f, const ReferenceMean& mu0) {
  const double theta = solve_theta(f, mu0.value());
  if (theta == 0.0) return f;
  std::vector<double> w(f.size());
  kernel::tilt_weights(f.support().scores(), f.probs(), theta, w);
  return BaselineDistribution(f.support_ptr(), std::move(w));
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::boundary: return "boundary";
    case ErrorKind::degenerate_baseline: return "degenerate_baseline";
    case ErrorKind::singular_information: return "singular_information";
    case ErrorKind::design: return "design";
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::sampler: return "sampler";
    case ErrorKind::not_converged: return "not_converged";
  }
  return "unknown";
}

}  // namespace dirspglm
