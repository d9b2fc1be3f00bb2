#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace banditlab {

double mean(std::span<const double> values);

// Sample standard deviation; 0 for fewer than two values.
double stddev(std::span<const double> values);

struct CdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;  // share of values <= threshold

  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

// Empirical CDF at each distinct sample value, ascending.
std::vector<CdfPoint> compute_cdf(std::span<const double> values);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap interval of the mean.
Interval bootstrap_mean_ci(std::span<const double> values, double confidence, std::size_t resamples,
                           std::uint64_t seed);

}  // namespace banditlab
