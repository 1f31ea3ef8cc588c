#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace survbench::detail {

// Type-7 quantile of an ascending sample: h = (n-1)p, interpolate between
// the neighbouring order statistics.
inline double quantile_type7(std::span<const double> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace survbench::detail
