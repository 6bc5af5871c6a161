#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gcrl {

// Quantile with linear interpolation between order statistics (the
// "linear" method: position q * (n - 1)). Throws on an empty sample.
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);
double mean(std::span<const double> values);
// Population variance (divides by n).
double variance(std::span<const double> values);

struct MetricRow {
  long stamp = 0;
  double median = 0.0;
  double lq = 0.0;
  double uq = 0.0;
};

MetricRow summarize(long stamp, std::span<const double> values);

// Trailing square-window moving average; the first window-1 entries average
// over the prefix available so far.
std::vector<double> rolling_average(std::span<const double> series, std::size_t window = 20);

}  // namespace gcrl
