#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace cumad {

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;  // population (divide-by-n)
};

/// Two-pass population mean/variance; {0, 0} for an empty range.
inline MeanVariance population_stats(std::span<const double> xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / static_cast<double>(xs.size())};
}

inline double population_stddev(std::span<const double> xs) {
  return std::sqrt(population_stats(xs).variance);
}

}  // namespace cumad
