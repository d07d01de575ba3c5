#include "ooload/core/stats.hpp"

#include <algorithm>
#include <cmath>

namespace ooload::stats {

double mean(std::span<const double> xs) noexcept {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) noexcept {
  if (xs.empty()) return 0.0;
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

double cv(std::span<const double> xs) noexcept {
  const double m = mean(xs);
  return m == 0.0 ? 0.0 : stddev(xs) / m;
}

double max(std::span<const double> xs) noexcept {
  double m = 0.0;
  bool first = true;
  for (double x : xs) {
    if (first || x > m) m = x;
    first = false;
  }
  return m;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

}  // namespace ooload::stats
