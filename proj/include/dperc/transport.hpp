#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dperc {

inline constexpr std::size_t kMaxJointPoints = 512;
inline constexpr std::size_t kMaxJointDimension = 8;

/// n points in [−1,1]^m, stored row-major.
struct JointSample {
  std::size_t dimension = 1;
  std::vector<double> coordinates;

  [[nodiscard]] std::size_t size() const { return coordinates.size() / dimension; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return {coordinates.data() + i * dimension, dimension};
  }
  /// Coordinate `axis` of every point.
  [[nodiscard]] std::vector<double> marginal(std::size_t axis) const;
};

/// Exact W1 between equal-size 1-D empirical measures: mean |a_(i) − b_(i)|
/// over sorted order. Throws ParameterError on a size mismatch.
double w1_sorted(std::span<const double> a, std::span<const double> b);

/// ∫|F_a − F_b| over the merged breakpoints; sizes may differ.
double w1_cdf(std::span<const double> a, std::span<const double> b);

/// Exact W1 between equal-size empirical measures on [−1,1]^m under the L1
/// ground cost, via an optimal assignment. Throws CapacityError beyond
/// 512 points or 8 dimensions.
double w1_joint(const JointSample& a, const JointSample& b);

/// Minimum-cost perfect matching on a square row-major cost matrix.
/// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace dperc
