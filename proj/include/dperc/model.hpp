#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dperc/potential.hpp"
#include "dperc/random.hpp"

namespace dperc {

/// Size and dilution of one diluted-perceptron system.
///
/// M = round(alpha·N) constraints act on N spins; each (site, constraint)
/// pair is active with probability gamma/N. eta masks whole constraints and
/// defaults to all ones.
struct ModelParams {
  int N = 1;
  double alpha = 0.5;
  int M = 1;
  double gamma = 0.0;
  std::vector<std::uint8_t> eta;

  /// M derived as round(alpha·N).
  static ModelParams make(int N, double alpha, double gamma);
  /// alpha derived as M/N, for callers that fix the constraint count.
  static ModelParams with_constraints(int N, int M, double gamma);

  /// Throws ParameterError naming the violated condition.
  void validate() const;

  [[nodiscard]] double dilution_probability() const { return gamma / N; }
};

struct Coupling {
  int site = 0;  // 0-based
  double weight = 0.0;

  friend bool operator==(const Coupling&, const Coupling&) = default;
};

/// One disorder realization; stores only the active couplings.
struct Instance {
  ModelParams params;
  std::vector<std::vector<Coupling>> constraints;  // size M

  [[nodiscard]] std::size_t active_count() const;
  void validate() const;
};

Instance sample_instance(const ModelParams& params, RandomSource& rng);

/// −H(σ) = Σ_k η_k u(Σ_{active (i,k)} g_{i,k} σ_i) for σ ∈ {−1,1}^N.
double hamiltonian_value(const Instance& instance, const BoundedPotential& u,
                         std::span<const int> sigma);

struct ConditionReport {
  double sup_norm = 0.0;
  /// Decorrelation condition; must be < 1.
  double e712_lhs = 0.0;
  bool e712_ok = false;
  /// Uniqueness condition 2U∞e^{2U∞}αγ₀²; must be < 1/2.
  double e750_lhs = 0.0;
  bool e750_ok = false;
  /// αγ₀⁶U∞e^{2U∞}; the unknown constant in front of it is not modelled,
  /// so this is informational only.
  double e754_magnitude = 0.0;
  /// Lipschitz constant of the cavity map T in W1.
  double contraction_factor = 0.0;
};

ConditionReport check_conditions(double alpha, double gamma0, const BoundedPotential& u);

nlohmann::json to_json(const ConditionReport& report);

/// JSON with 1-based site indices and 17-significant-digit weights.
std::string serialize_instance(const Instance& instance);
Instance parse_instance(const std::string& text);

}  // namespace dperc
