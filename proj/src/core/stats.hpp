#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace pmspde::stats {

// Nearest-rank quantile of sorted values: the ceil(p n)-th smallest. Being an
// order statistic it commutes with monotone transforms such as exp.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const size_t n = sorted.size();
  if (n == 0) return NAN;
  const double r = std::ceil(p * static_cast<double>(n) - 1e-9);
  const size_t k = static_cast<size_t>(std::clamp(r, 1.0, static_cast<double>(n)));
  return sorted[k - 1];
}

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

}  // namespace pmspde::stats
