#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>

namespace dperc {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error of the mean.
///
/// Accumulates deviations from the first value, so a constant sample yields
/// exactly that constant and a zero error.
inline MeanEstimate summarize(std::span<const double> values) {
  MeanEstimate out;
  const auto n = values.size();
  if (n == 0) return out;
  const double pivot = values[0];
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : values) {
    const double d = v - pivot;
    sum += d;
    sum_sq += d * d;
  }
  const double mean_dev = sum / static_cast<double>(n);
  out.mean = pivot + mean_dev;
  if (n > 1) {
    const double var =
        std::max(0.0, (sum_sq - sum * mean_dev) / static_cast<double>(n - 1));
    out.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[40];
  const auto result = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, result.ptr);
}

}  // namespace dperc
