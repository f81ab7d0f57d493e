#pragma once

// Slow, independent reference computations for the tests.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

/// Tilted mean by direct summation in long double (no max-shift).
inline long double tilted_mean(const std::vector<double>& s, const std::vector<double>& p, long double theta) {
  long double num = 0, den = 0;
  for (std::size_t l = 0; l < s.size(); ++l) {
    const long double w = p[l] * std::exp(theta * (s[l] - s[0]));
    num += w * s[l];
    den += w;
  }
  return num / den;
}

/// Plain bisection on [-60, 60].
inline double solve_theta(const std::vector<double>& s, const std::vector<double>& p, double mu) {
  long double lo = -60, hi = 60;
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (lo + hi);
    (tilted_mean(s, p, mid) < mu ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

inline std::vector<double> tilt(const std::vector<double>& s, const std::vector<double>& p, double theta) {
  std::vector<double> w(s.size());
  long double den = 0;
  for (std::size_t l = 0; l < s.size(); ++l) den += p[l] * std::exp(static_cast<long double>(theta) * (s[l] - s[0]));
  for (std::size_t l = 0; l < s.size(); ++l)
    w[l] = static_cast<double>(p[l] * std::exp(static_cast<long double>(theta) * (s[l] - s[0])) / den);
  return w;
}

/// Truncated Poisson pmf on 0..k-1 computed by recursion.
inline std::vector<double> trunc_poisson(double lambda, int k, double zero_factor = 1.0) {
  std::vector<double> p(static_cast<std::size_t>(k));
  double term = std::exp(-lambda), total = 0;
  for (int s = 0; s < k; ++s) {
    if (s > 0) term *= lambda / s;
    p[static_cast<std::size_t>(s)] = term * (s == 0 ? zero_factor : 1.0);
    total += p[static_cast<std::size_t>(s)];
  }
  for (double& v : p) v /= total;
  return p;
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
template <class Cdf>
double ks_distance(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, std::abs(F - i / n), std::abs((i + 1) / n - F)});
  }
  return d;
}

}  // namespace oracle
