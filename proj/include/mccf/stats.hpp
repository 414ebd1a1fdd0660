#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "mccf/core.hpp"

namespace mccf {

// Linear-interpolation quantile (type 7) of an ascending-sorted sample.
// p in [0, 1].
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> sample, double p) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, p);
}

inline double iqr_sorted(std::span<const double> sorted) {
  return quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
}

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Sample standard deviation (ddof = 1); 0 for fewer than two values.
inline double stdev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// Pooled RMSE over pre-accumulated squared error and step count.
inline double pooled_rmse(double sum_sq, std::size_t n_steps) {
  if (n_steps == 0) throw std::invalid_argument("pooled RMSE over zero steps");
  return std::sqrt(sum_sq / static_cast<double>(n_steps));
}

// Keeps samples within [Q1 - 1.5*IQR, Q3 + 1.5*IQR]; the median always
// survives, so the result is nonempty. Input order is preserved.
inline std::vector<double> iqr_filter(std::span<const double> samples) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_sorted(sorted, 0.25);
  const double q3 = quantile_sorted(sorted, 0.75);
  const double spread = q3 - q1;
  const double lo = q1 - 1.5 * spread;
  const double hi = q3 + 1.5 * spread;
  std::vector<double> kept;
  kept.reserve(samples.size());
  for (double x : samples)
    if (x >= lo && x <= hi) kept.push_back(x);
  return kept;
}

}  // namespace mccf
