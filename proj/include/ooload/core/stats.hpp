#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ooload::stats {

double mean(std::span<const double> xs) noexcept;
double stddev(std::span<const double> xs) noexcept;  // population
// Coefficient of variation; 0 for an empty or all-zero series.
double cv(std::span<const double> xs) noexcept;
double max(std::span<const double> xs) noexcept;
// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> xs, double q);
inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

}  // namespace ooload::stats
