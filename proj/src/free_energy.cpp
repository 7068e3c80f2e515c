#include "dperc/free_energy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "dperc/errors.hpp"
#include "dperc/model.hpp"
#include "dperc/parallel.hpp"
#include "dperc/stats.hpp"
#include "dperc/transport.hpp"

namespace dperc {

double vbar(std::span<const double> weights, const BoundedPotential& u, double mbar) {
  const std::size_t p = weights.size();
  if (p > static_cast<std::size_t>(kMaxVbarSpins))
    throw CapacityError("vbar enumerates at most " + std::to_string(kMaxVbarSpins) + " spins");
  if (!(std::abs(mbar) <= 1.0)) throw ParameterError("vbar needs |mbar| <= 1");
  // The product weights sum to one, so a flat u gives e^{u(0)} with no rounding.
  if (u.kind() == BoundedPotential::Kind::Zero || u.kind() == BoundedPotential::Kind::Constant)
    return std::exp(u(0.0));
  const double up = 0.5 * (1.0 + mbar);
  const double down = 0.5 * (1.0 - mbar);
  double total = 0.0;
  const std::uint32_t configs = std::uint32_t{1} << p;
  for (std::uint32_t bits = 0; bits < configs; ++bits) {
    double w = 1.0, s = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      if ((bits >> i) & 1) {
        w *= down;
        s -= weights[i];
      } else {
        w *= up;
        s += weights[i];
      }
    }
    if (w != 0.0) total += w * std::exp(u(s));
  }
  return total;
}

double poisson_pmf(double mean, int k) {
  if (k < 0) return 0.0;
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
}

namespace {

double poisson_tail_above(double mean, int p) {
  // Terms decay super-geometrically past the mode; stop once negligible.
  double tail = 0.0;
  for (int k = p + 1; k < p + 400; ++k) {
    const double term = poisson_pmf(mean, k);
    tail += term;
    if (k > mean && term < 1e-300) break;
  }
  return tail;
}

struct Moments {
  double sum = 0.0;     // Σ (r − 1)
  double sum_sq = 0.0;  // Σ (r − 1)²
};

}  // namespace

int poisson_cutoff(double mean, double tail) {
  int p = 0;
  while (poisson_tail_above(mean, p) >= tail) ++p;
  return p;
}

GEstimate estimate_G(double gamma, double alpha, const BoundedPotential& u,
                     const PopulationMeasure& pop, std::size_t n_mc, int p_max,
                     const Stream& stream, unsigned workers) {
  if (!(gamma >= 0.0)) throw ParameterError("gamma must be >= 0");
  if (n_mc < 2) throw ParameterError("n_mc must be >= 2");
  if (pop.values.empty()) throw ParameterError("estimate_G needs a population");
  if (p_max < 0) p_max = poisson_cutoff(gamma);
  if (p_max + 1 > kMaxVbarSpins)
    throw CapacityError("Poisson cutoff p_max = " + std::to_string(p_max) +
                        " needs more than " + std::to_string(kMaxVbarSpins) + " spins");

  const double U = u.sup_norm();
  const double lo = std::exp(-2.0 * U) * (1.0 - 1e-12);
  const double hi = std::exp(2.0 * U) * (1.0 + 1e-12);
  const double mbar = std::clamp(pop.mean(), -1.0, 1.0);

  GEstimate est;
  est.p_max = p_max;
  std::vector<double> weight(p_max + 1);
  double weight_max = 0.0;
  for (int p = 0; p <= p_max; ++p) {
    weight[p] = poisson_pmf(gamma, p);
    weight_max = std::max(weight_max, weight[p]);
  }
  est.draws.resize(p_max + 1);
  for (int p = 0; p <= p_max; ++p) {
    const double share = static_cast<double>(n_mc) * weight[p] / weight_max;
    est.draws[p] = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(share)));
  }

  struct Task {
    int p;
    std::size_t chunk;
    std::size_t begin, end;
  };
  std::vector<Task> tasks;
  for (int p = 0; p <= p_max; ++p)
    for (std::size_t c = 0; c * kChunkSize < est.draws[p]; ++c)
      tasks.push_back({p, c, c * kChunkSize, std::min(est.draws[p], (c + 1) * kChunkSize)});

  std::vector<Moments> moments(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const Task& task = tasks[t];
    RandomSource rng(stream.child("p", task.p).child("chunk", task.chunk));
    std::vector<double> g(task.p + 1);
    Moments m;
    for (std::size_t d = task.begin; d < task.end; ++d) {
      for (auto& gi : g) gi = rng.normal();
      const std::span<const double> all(g);
      const double ratio = vbar(all, u, mbar) / vbar(all.first(task.p), u, mbar);
      if (!(ratio >= lo && ratio <= hi))
        throw NumericalError("V̄ ratio outside [e^{-2U}, e^{2U}]");
      const double dev = ratio - 1.0;
      m.sum += dev;
      m.sum_sq += dev * dev;
    }
    moments[t] = m;
  });

  std::vector<Moments> per_p(p_max + 1);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    per_p[tasks[t].p].sum += moments[t].sum;
    per_p[tasks[t].p].sum_sq += moments[t].sum_sq;
  }

  double weight_sum = 0.0;
  for (double w : weight) weight_sum += w;
  double mixture_dev = 0.0;  // Σ π̂_p (E[r] − 1)
  double variance = 0.0;
  for (int p = 0; p <= p_max; ++p) {
    const double n = static_cast<double>(est.draws[p]);
    const double mean_dev = per_p[p].sum / n;
    const double var = std::max(0.0, (per_p[p].sum_sq - per_p[p].sum * mean_dev) / (n - 1.0));
    const double w = weight[p] / weight_sum;
    mixture_dev += w * mean_dev;
    variance += w * w * var / n;
  }
  const double mixture = 1.0 + mixture_dev;
  if (!(mixture > 0.0)) throw NumericalError("non-positive Poisson mixture in G");
  est.value = alpha * std::log1p(mixture_dev);
  est.mc_error = alpha * std::sqrt(variance) / mixture;
  const double tail = std::max(0.0, 1.0 - weight_sum);
  est.truncation_error = alpha * tail * std::exp(2.0 * U) / mixture;
  est.std_error = est.mc_error + est.truncation_error;
  return est;
}

double free_energy_at_zero(double alpha, const BoundedPotential& u) {
  return std::numbers::ln2 + alpha * u(0.0);
}

namespace {

// ∫₀^s of the Lagrange basis on nodes t = 0, 1, 2 (unit spacing).
std::array<double, 3> partial_panel_weights(double s) {
  const double s2 = s * s, s3 = s2 * s;
  return {(s3 / 3.0 - 1.5 * s2 + 2.0 * s) / 2.0, -(s3 / 3.0 - s2), (s3 / 3.0 - s2 / 2.0) / 2.0};
}

}  // namespace

double RSCurve::F_at(double gamma) const {
  const double g0 = gamma_grid.front(), g1 = gamma_grid.back();
  if (!(gamma >= g0 && gamma <= g1)) throw ParameterError("gamma outside the curve grid");
  const double h = gamma_grid[1] - gamma_grid[0];
  const auto panels = (gamma_grid.size() - 1) / 2;
  auto panel = static_cast<std::size_t>(std::floor((gamma - g0) / (2.0 * h)));
  panel = std::min(panel, panels - 1);
  const std::size_t i0 = 2 * panel;
  const double s = (gamma - gamma_grid[i0]) / h;
  if (s == 0.0) return F[i0];
  const auto w = partial_panel_weights(s);
  return F[i0] + h * (w[0] * G[i0].value + w[1] * G[i0 + 1].value + w[2] * G[i0 + 2].value);
}

double RSCurve::F_error_at(double gamma) const {
  const double h = gamma_grid[1] - gamma_grid[0];
  const auto panels = (gamma_grid.size() - 1) / 2;
  auto panel = static_cast<std::size_t>(std::floor((gamma - gamma_grid.front()) / (2.0 * h)));
  panel = std::min(panel, panels - 1);
  const std::size_t i0 = 2 * panel;
  const double s = (gamma - gamma_grid[i0]) / h;
  if (s == 0.0) return F_error[i0];
  const auto w = partial_panel_weights(s);
  return F_error[i0] + h * (std::abs(w[0]) * G[i0].std_error +
                            std::abs(w[1]) * G[i0 + 1].std_error +
                            std::abs(w[2]) * G[i0 + 2].std_error);
}

RSCurve build_rs_curve(double alpha, const BoundedPotential& u, double gamma_max, int n_grid,
                       const CurveOptions& options, const Stream& stream) {
  if (n_grid < 3 || n_grid % 2 == 0) throw ParameterError("n_grid must be odd and >= 3");
  if (!(gamma_max > 0.0)) throw ParameterError("gamma_max must be > 0");
  RSCurve curve;
  curve.alpha = alpha;
  curve.conditions_ok = check_conditions(alpha, gamma_max, u).e750_ok;
  curve.F0 = free_energy_at_zero(alpha, u);
  const double h = gamma_max / (n_grid - 1);
  const Stream g_stream = stream.child("G");

  for (int j = 0; j < n_grid; ++j) {
    const double gamma = j == n_grid - 1 ? gamma_max : j * h;
    curve.gamma_grid.push_back(gamma);
    SolveOptions solve;
    solve.pop_size = options.pop_size;
    solve.tol = options.tol;
    solve.max_iter = options.max_iter;
    solve.workers = options.workers;
    auto fp = solve_fixed_point(alpha, gamma, u, solve, stream.child("fixed-point", j));
    curve.G.push_back(
        estimate_G(gamma, alpha, u, fp.population, options.n_mc, -1, g_stream, options.workers));
    curve.fixed_points.push_back(std::move(fp.report));
  }

  curve.F.assign(n_grid, curve.F0);
  curve.F_error.assign(n_grid, 0.0);
  for (int i = 1; i < n_grid; ++i) {
    const auto& G = curve.G;
    if (i % 2 == 0) {
      curve.F[i] = curve.F[i - 2] + h / 3.0 * (G[i - 2].value + 4.0 * G[i - 1].value + G[i].value);
      curve.F_error[i] = curve.F_error[i - 2] + h / 3.0 * (G[i - 2].std_error +
                                                           4.0 * G[i - 1].std_error +
                                                           G[i].std_error);
    } else {
      curve.F[i] =
          curve.F[i - 1] + h / 12.0 * (5.0 * G[i - 1].value + 8.0 * G[i].value - G[i + 1].value);
      curve.F_error[i] = curve.F_error[i - 1] + h / 12.0 * (5.0 * G[i - 1].std_error +
                                                            8.0 * G[i].std_error +
                                                            G[i + 1].std_error);
    }
  }

  if ((n_grid - 1) % 4 == 0) {
    double coarse = curve.F0;
    for (int i = 4; i < n_grid; i += 4)
      coarse += 2.0 * h / 3.0 *
                (curve.G[i - 4].value + 4.0 * curve.G[i - 2].value + curve.G[i].value);
    curve.richardson_diff = std::abs(curve.F.back() - coarse);
    curve.grid_too_coarse = *curve.richardson_diff > options.richardson_tol;
  }
  return curve;
}

ComparisonReport compare_pN_vs_F(double alpha, const BoundedPotential& u, double gamma,
                                 std::span<const int> N_list, int n_disorder,
                                 const RSCurve& curve, const Stream& stream, unsigned workers) {
  ComparisonReport report;
  report.gamma = gamma;
  const double F = curve.F_at(gamma);
  const double F_err = curve.F_error_at(gamma);
  for (int N : N_list) {
    const auto params = ModelParams::make(N, alpha, gamma);
    const auto batch = disorder_average(params, u, {StatisticKind::FreeEnergy, 1}, n_disorder,
                                        stream.child("pN", static_cast<std::uint64_t>(N)),
                                        workers);
    ComparisonRow row;
    row.N = N;
    row.M = params.M;
    row.pN_mean = batch.summary.mean;
    row.pN_stderr = batch.summary.std_error;
    row.F_value = F;
    row.F_error = F_err;
    row.abs_diff = std::abs(row.pN_mean - F);
    report.rows.push_back(row);
  }
  if (report.rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(report.rows.size());
    for (const auto& r : report.rows) {
      const double x = 1.0 / r.N;
      sx += x;
      sy += r.abs_diff;
      sxx += x * x;
      sxy += x * r.abs_diff;
    }
    const double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
      report.fitted_decay = (n * sxy - sx * sy) / denom;
      report.fitted_intercept = (sy - report.fitted_decay * sx) / n;
    }
  }
  return report;
}

MagnetizationLawResult magnetization_law_test(double alpha, const BoundedPotential& u,
                                              double gamma, int N, int m, int n_disorder,
                                              const PopulationMeasure& pop,
                                              const Stream& stream, unsigned workers) {
  if (m < 1 || static_cast<std::size_t>(m) > kMaxJointDimension || m > N)
    throw CapacityError("magnetization_law_test needs 1 <= m <= min(8, N)");
  if (n_disorder < 2 || static_cast<std::size_t>(n_disorder) > kMaxJointPoints)
    throw CapacityError("magnetization_law_test needs 2 <= n_disorder <= 512");
  if (pop.values.empty()) throw ParameterError("magnetization_law_test needs a population");

  const auto params = ModelParams::make(N, alpha, gamma);
  const auto batch = disorder_average(params, u, {StatisticKind::Magnetization, m}, n_disorder,
                                      stream.child("disorder"), workers);

  JointSample observed{static_cast<std::size_t>(m), {}};
  std::vector<double> pooled;
  for (const auto& s : batch.samples) {
    observed.coordinates.insert(observed.coordinates.end(), s.values.begin(), s.values.end());
    pooled.insert(pooled.end(), s.values.begin(), s.values.end());
  }
  JointSample reference{static_cast<std::size_t>(m), {}};
  RandomSource rng(stream.child("reference"));
  reference.coordinates.resize(observed.coordinates.size());
  for (auto& v : reference.coordinates) v = pop.values[rng.index(pop.values.size())];

  MagnetizationLawResult r;
  r.N = N;
  r.m = m;
  r.n_disorder = n_disorder;
  r.joint_w1 = w1_joint(observed, reference);
  r.marginal_w1 = w1_cdf(pooled, pop.values);
  return r;
}

}  // namespace dperc
