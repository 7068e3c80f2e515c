#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dperc/potential.hpp"
#include "dperc/random.hpp"

namespace dperc {

inline constexpr int kMaxTreeSpins = 24;

/// One draw from the Poisson mixture that defines T: θ cavity constraints,
/// constraint k carrying τ_k further spins.
struct TreeSample {
  int theta = 0;
  std::vector<int> tau;
  std::vector<std::vector<double>> spin_weights;  // row k has τ_k entries
  std::vector<double> cavity_weights;             // one per constraint

  /// t_θ = Σ τ_k
  [[nodiscard]] int total_spins() const;
};

/// θ ~ Poisson(αγ), τ_k ~ Poisson(γ) i.i.d., all weights standard Gaussian.
TreeSample sample_tree(double alpha, double gamma, RandomSource& rng);

/// Mixture weight κ(θ, τ_1..τ_θ) of a tree shape.
double tree_weight(double alpha, double gamma, std::span<const int> tau);

/// ⟨Av ε ξ⟩_x / ⟨Av ξ⟩_x for one tree, where ⟨·⟩_x is the product measure on
/// {−1,1}^{t_θ} with means x and Av averages ε over ±1.
///
/// Exact. ξ factorizes over constraints and so does ⟨·⟩_x, hence the ratio is
/// tanh(½ Σ_k [log A_k(+1) − log A_k(−1)]) with A_k(ε) a 2^{τ_k}-term sum.
/// Returns 0 when θ = 0. Throws CapacityError when t_θ > 24.
double cavity_ratio(const TreeSample& tree, const BoundedPotential& u,
                    std::span<const double> x);

/// Empirical (sample-pool) representation of a law on [−1,1].
struct PopulationMeasure {
  std::vector<double> values;
  double alpha = 0.0;
  double gamma = 0.0;

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double mean() const;
};

/// Outputs are generated in chunks of this many values, chunk c drawing from
/// stream.child("chunk", c).
inline constexpr std::size_t kChunkSize = 1024;

/// One synchronous population-dynamics sweep: n_out draws of cavity_ratio
/// with inputs resampled uniformly (with replacement) from pop. Trees with
/// t_θ > 24 are redrawn.
PopulationMeasure apply_T(const PopulationMeasure& pop, double alpha, double gamma,
                          const BoundedPotential& u, std::size_t n_out, const Stream& stream,
                          unsigned workers = 1);

struct ConvergenceReport {
  int iterations = 0;
  double final_step_w1 = 0.0;
  std::vector<double> trajectory;  // W1 between successive populations
  bool converged = false;          // last delta < tol
  bool plateau = false;            // stopped at the Monte Carlo floor
  bool conditions_ok = false;      // uniqueness condition held at (α, γ)
};

struct SolveOptions {
  std::size_t pop_size = 100000;
  double tol = 1e-3;
  int max_iter = 100;
  unsigned workers = 1;
  /// Defaults to all zeros.
  std::optional<std::vector<double>> initial;
};

struct FixedPointResult {
  PopulationMeasure population;
  ConvergenceReport report;
};

/// Iterates pop ← T(pop) (iteration i uses stream.child("iteration", i))
/// until the step W1 drops below tol, three consecutive steps agree within
/// 10% (the sampling floor), or max_iter is reached. Never throws on
/// non-convergence; the report carries the flags.
FixedPointResult solve_fixed_point(double alpha, double gamma, const BoundedPotential& u,
                                   const SolveOptions& options, const Stream& stream);

struct ContractionResult {
  double coupled_w1_image = 0.0;  // E|r(X) − r(Y)| under common randomness
  double std_error = 0.0;
  double input_w1 = 0.0;          // w1_sorted(pop1, pop2)
  double bound = 0.0;             // 2U∞e^{2U∞}αγ² · input_w1
};

/// Couples T(pop1) and T(pop2) through shared trees and shared pool indices
/// into the sorted populations, which makes the input pairs an optimal
/// coupling. The coupled mean is an upper bound on W1 of the images.
ContractionResult contraction_test(const PopulationMeasure& pop1, const PopulationMeasure& pop2,
                                   double alpha, double gamma, const BoundedPotential& u,
                                   std::size_t n, const Stream& stream, unsigned workers = 1);

/// Binary layout, all little-endian:
///   "DPPOP001" | u64 S | f64 alpha | f64 gamma | u32 len | descriptor bytes
///   | u64 seed | S × f64
void write_population_binary(std::ostream& os, const PopulationMeasure& pop,
                             const BoundedPotential& u, std::uint64_t seed);

struct PopulationFile {
  PopulationMeasure population;
  BoundedPotential potential;
  std::uint64_t seed = 0;
};

PopulationFile read_population_binary(std::istream& is);

/// One value per line.
void write_population_csv(std::ostream& os, const PopulationMeasure& pop);

}  // namespace dperc
