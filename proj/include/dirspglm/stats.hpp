#pragma once

#include <span>
#include <vector>

namespace dirspglm::stats {

/// Type-7 (linear interpolation) quantile of already-sorted values.
double quantile_sorted(std::span<const double> sorted, double prob);
double quantile(std::vector<double> values, double prob);
double mean(std::span<const double> values);
double median(std::vector<double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sd(std::span<const double> values);

struct Interval {
  double lower;
  double upper;
};
/// Equal-tailed interval with tail mass (1 - level)/2 on each side.
Interval equal_tailed(std::vector<double> values, double level);

/// Standard normal quantile.
double normal_quantile(double prob);

}  // namespace dirspglm::stats
