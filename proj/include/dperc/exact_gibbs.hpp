#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dperc/model.hpp"
#include "dperc/random.hpp"

namespace dperc {

inline constexpr int kMaxEnumerationSpins = 24;
inline constexpr int kMaxCavitySpins = 20;

using SitePair = std::pair<int, int>;

/// Exact Gibbs averages of a single instance.
struct GibbsSummary {
  double log_Z = 0.0;
  std::vector<double> magnetizations;          // ⟨σ_i⟩
  std::map<SitePair, double> pair_correlations;  // ⟨σ_i σ_j⟩ for requested pairs
};

/// Sums over all 2^N configurations in Gray-code order.
///
/// Each step flips one spin, and only the constraints containing that spin
/// have their argument recomputed. log Z carries a running max shift.
/// Throws CapacityError for N > 24.
GibbsSummary enumerate_gibbs(const Instance& instance, const BoundedPotential& u,
                             std::span<const SitePair> want_pairs = {});

/// c · Π_{i ∈ sites} σ_i
struct Monomial {
  double coefficient = 1.0;
  std::vector<int> sites;  // 0-based
};
using SpinPolynomial = std::vector<Monomial>;

double evaluate(const SpinPolynomial& f, std::span<const int> sigma);

struct CavitySides {
  double lhs = 0.0;  // ⟨f⟩ under the N-spin Gibbs measure
  double rhs = 0.0;  // ⟨Av f ξ⟩₋ / ⟨Av ξ⟩₋ over the last spin
};

/// Both sides of the last-spin cavity decomposition, each by its own
/// brute-force enumeration. Throws CapacityError for N > 20.
CavitySides cavity_check(const Instance& instance, const BoundedPotential& u,
                         const SpinPolynomial& f);

enum class StatisticKind { FreeEnergy, Decorrelation, Magnetization };

struct StatisticSpec {
  StatisticKind kind = StatisticKind::FreeEnergy;
  int m = 1;  // number of leading spins for Magnetization

  /// "pN", "decorrelation" or "magnetization(m)".
  [[nodiscard]] std::string name() const;
  static StatisticSpec parse(const std::string& name);
};

struct DisorderStatistic {
  std::string name;
  double mean = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
};

struct DisorderSample {
  std::uint64_t seed = 0;  // key of the substream the instance was drawn from
  int index = 0;
  std::vector<double> values;  // one value, or m magnetizations
};

struct DisorderBatch {
  StatisticSpec spec;
  ModelParams params;
  DisorderStatistic summary;
  std::vector<DisorderSample> samples;
};

/// Draws n_samples instances (sample s uses stream.child("disorder", s)),
/// enumerates each and summarizes the requested statistic:
///   pN            (1/N) log Z
///   decorrelation |⟨σ₁σ₂⟩ − ⟨σ₁⟩⟨σ₂⟩|
///   magnetization (⟨σ₁⟩,…,⟨σ_m⟩); the summary is over the per-sample
///                 component average
DisorderBatch disorder_average(const ModelParams& params, const BoundedPotential& u,
                               const StatisticSpec& statistic, int n_samples,
                               const Stream& stream, unsigned workers = 1);

/// Columns: seed,sample_index,statistic_name,value
void write_batch_csv(std::ostream& os, const DisorderBatch& batch);
nlohmann::json summary_json(const DisorderBatch& batch, const BoundedPotential& u);

}  // namespace dperc
