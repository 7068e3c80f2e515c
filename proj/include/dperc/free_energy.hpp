#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dperc/exact_gibbs.hpp"
#include "dperc/fixed_point.hpp"
#include "dperc/potential.hpp"
#include "dperc/random.hpp"

namespace dperc {

inline constexpr int kMaxVbarSpins = 24;

/// V̄_p for fixed Gaussians g_1..g_p:
///   Σ_{σ ∈ {±1}^p} exp(u(Σ g_i σ_i)) Π (1 + σ_i m̄)/2.
/// The population integral of V̄_p is multilinear in the x_i, so it equals
/// this expression at the population mean m̄. p = 0 gives e^{u(0)}.
double vbar(std::span<const double> weights, const BoundedPotential& u, double mbar);

/// Poisson(mean) probability mass at k.
double poisson_pmf(double mean, int k);
/// Smallest p with P(Poisson(mean) > p) < tail.
int poisson_cutoff(double mean, double tail = 1e-9);

struct GEstimate {
  double value = 0.0;
  double std_error = 0.0;         // Monte Carlo error + truncation bound
  double mc_error = 0.0;
  double truncation_error = 0.0;
  int p_max = 0;
  std::vector<std::size_t> draws;  // per p
};

/// G(γ) = α log Σ_p π_p E[V̄_{p+1}/V̄_p], π_p = Poisson(γ) masses.
///
/// For each p ≤ p_max the expectation is a Monte Carlo average over Gaussian
/// vectors, with V̄_{p+1} reusing the first p Gaussians of V̄_p. Draws per p
/// are proportional to π_p (n_mc at the mode, never fewer than 64). Poisson
/// weights are renormalized over p ≤ p_max; the neglected tail moves the sum
/// by at most tail·e^{2U∞}, which is added to the reported error.
/// p_max < 0 selects the tail-mass-1e-9 cutoff.
GEstimate estimate_G(double gamma, double alpha, const BoundedPotential& u,
                     const PopulationMeasure& pop, std::size_t n_mc, int p_max,
                     const Stream& stream, unsigned workers = 1);

struct CurveOptions {
  std::size_t pop_size = 20000;
  std::size_t n_mc = 100000;
  double tol = 1e-3;
  int max_iter = 100;
  double richardson_tol = 1e-4;
  unsigned workers = 1;
};

/// G on a uniform γ grid and F(γ) = F(0) + ∫₀^γ G by cumulative Simpson.
struct RSCurve {
  double alpha = 0.0;
  std::vector<double> gamma_grid;
  std::vector<GEstimate> G;
  std::vector<double> F;
  std::vector<double> F_error;  // quadrature of the G errors (fully correlated)
  double F0 = 0.0;
  std::vector<ConvergenceReport> fixed_points;
  std::optional<double> richardson_diff;  // |F(γ_max) − F_coarse(γ_max)|
  bool grid_too_coarse = false;
  bool conditions_ok = false;

  /// F between nodes from the local Simpson quadratic. Throws outside the grid.
  [[nodiscard]] double F_at(double gamma) const;
  [[nodiscard]] double F_error_at(double gamma) const;
};

/// F(0) = log 2 + α u(0), the value of (1/N) log Z when no coupling is active.
double free_energy_at_zero(double alpha, const BoundedPotential& u);

/// Solves the fixed point (stream.child("fixed-point", j)) and estimates G at
/// every node. All nodes share stream.child("G") so the Gaussian draws are
/// common across the grid. n_grid must be odd and >= 3.
RSCurve build_rs_curve(double alpha, const BoundedPotential& u, double gamma_max, int n_grid,
                       const CurveOptions& options, const Stream& stream);

struct ComparisonRow {
  int N = 0;
  int M = 0;
  double pN_mean = 0.0;
  double pN_stderr = 0.0;
  double F_value = 0.0;
  double F_error = 0.0;
  double abs_diff = 0.0;
};

struct ComparisonReport {
  double gamma = 0.0;
  std::vector<ComparisonRow> rows;
  double fitted_decay = 0.0;  // least-squares slope of abs_diff against 1/N
  double fitted_intercept = 0.0;
};

/// Exact-enumeration estimate of p_N(γ) for each N (disorder stream
/// stream.child("pN", N)) against F(γ) from the curve.
ComparisonReport compare_pN_vs_F(double alpha, const BoundedPotential& u, double gamma,
                                 std::span<const int> N_list, int n_disorder,
                                 const RSCurve& curve, const Stream& stream,
                                 unsigned workers = 1);

struct MagnetizationLawResult {
  int N = 0;
  int m = 0;
  int n_disorder = 0;
  double joint_w1 = 0.0;
  double marginal_w1 = 0.0;
};

/// Distances between the disorder law of (⟨σ₁⟩,…,⟨σ_m⟩) and pop^{⊗m}.
/// joint_w1 pairs the n_disorder vectors against as many i.i.d. m-vectors
/// drawn from pop; marginal_w1 compares the pooled single-spin values with
/// the whole population.
MagnetizationLawResult magnetization_law_test(double alpha, const BoundedPotential& u,
                                              double gamma, int N, int m, int n_disorder,
                                              const PopulationMeasure& pop,
                                              const Stream& stream, unsigned workers = 1);

}  // namespace dperc
