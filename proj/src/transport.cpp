#include "dperc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "dperc/errors.hpp"

namespace dperc {
namespace {

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<double> JointSample::marginal(std::size_t axis) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = coordinates[i * dimension + axis];
  return out;
}

double w1_sorted(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ParameterError("w1_sorted needs equal sizes; use w1_cdf for unequal samples");
  if (a.empty()) throw ParameterError("w1_sorted needs nonempty samples");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
  return total / static_cast<double>(sa.size());
}

double w1_cdf(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ParameterError("w1_cdf needs nonempty samples");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const auto na = static_cast<std::int64_t>(sa.size());
  const auto nb = static_cast<std::int64_t>(sb.size());
  // |F_a − F_b| = |ca·nb − cb·na| / (na·nb) with integer counts, so the only
  // rounding is in the interval lengths.
  std::size_t i = 0, j = 0;
  std::int64_t ca = 0, cb = 0;
  double x = std::min(sa.front(), sb.front());
  double total = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double next = j == sb.size() || (i < sa.size() && sa[i] <= sb[j]) ? sa[i] : sb[j];
    total += static_cast<double>(std::llabs(ca * nb - cb * na)) * (next - x);
    x = next;
    while (i < sa.size() && sa[i] == x) ++i, ++ca;
    while (j < sb.size() && sb[j] == x) ++j, ++cb;
  }
  return total / (static_cast<double>(na) * static_cast<double>(nb));
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  // Shortest augmenting path with row/column potentials (Hungarian method),
  // O(n³). Index 0 is a sentinel column.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost[(r0 - 1) * n + (c - 1)] - row_pot[r0] - col_pot[c];
        if (reduced < min_slack[c]) {
          min_slack[c] = reduced;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          row_pot[match[c]] += delta;
          col_pot[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t c = 1; c <= n; ++c) assignment[match[c] - 1] = c - 1;
  return assignment;
}

double w1_joint(const JointSample& a, const JointSample& b) {
  if (a.dimension != b.dimension) throw ParameterError("w1_joint needs equal dimensions");
  if (a.dimension == 0) throw ParameterError("w1_joint needs dimension >= 1");
  if (a.size() != b.size()) throw ParameterError("w1_joint needs equal sample sizes");
  if (a.size() == 0) throw ParameterError("w1_joint needs nonempty samples");
  if (a.size() > kMaxJointPoints || a.dimension > kMaxJointDimension)
    throw CapacityError("w1_joint supports at most " + std::to_string(kMaxJointPoints) +
                        " points in dimension <= " + std::to_string(kMaxJointDimension) +
                        "; the per-coordinate w1_sorted values give a lower bound");
  const std::size_t n = a.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = a.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto q = b.point(j);
      double d = 0.0;
      for (std::size_t m = 0; m < a.dimension; ++m) d += std::abs(p[m] - q[m]);
      cost[i * n + j] = d;
    }
  }
  const auto assignment = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + assignment[i]];
  return total / static_cast<double>(n);
}

}  // namespace dperc
