#include "dperc/model.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "dperc/errors.hpp"
#include "dperc/stats.hpp"

namespace dperc {

ModelParams ModelParams::make(int N, double alpha, double gamma) {
  ModelParams p;
  p.N = N;
  p.alpha = alpha;
  p.M = static_cast<int>(std::lround(alpha * N));
  p.gamma = gamma;
  p.eta.assign(static_cast<std::size_t>(std::max(p.M, 0)), 1);
  p.validate();
  return p;
}

ModelParams ModelParams::with_constraints(int N, int M, double gamma) {
  if (N < 1) throw ParameterError("N must be >= 1");
  ModelParams p;
  p.N = N;
  p.M = M;
  p.alpha = static_cast<double>(M) / N;
  p.gamma = gamma;
  p.eta.assign(static_cast<std::size_t>(std::max(M, 0)), 1);
  p.validate();
  return p;
}

void ModelParams::validate() const {
  if (N < 1) throw ParameterError("N must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0,1)");
  if (M < 1) throw ParameterError("M = round(alpha*N) must be >= 1 (increase N or alpha)");
  if (M != static_cast<int>(std::lround(alpha * N)))
    throw ParameterError("M must equal round(alpha*N)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be >= 0");
  if (gamma / N > 1.0)
    throw ParameterError("gamma/N > 1: dilution probability must be <= 1");
  if (eta.size() != static_cast<std::size_t>(M))
    throw ParameterError("eta must have length M");
  for (auto e : eta)
    if (e > 1) throw ParameterError("eta entries must be 0 or 1");
}

std::size_t Instance::active_count() const {
  std::size_t n = 0;
  for (const auto& c : constraints) n += c.size();
  return n;
}

void Instance::validate() const {
  params.validate();
  if (constraints.size() != static_cast<std::size_t>(params.M))
    throw ParameterError("instance must have exactly M constraints");
  for (const auto& c : constraints) {
    std::unordered_set<int> seen;
    for (const auto& coupling : c) {
      if (coupling.site < 0 || coupling.site >= params.N)
        throw ParameterError("coupling site out of range");
      if (!seen.insert(coupling.site).second)
        throw ParameterError("duplicate site within a constraint");
      if (!std::isfinite(coupling.weight)) throw ParameterError("coupling weight not finite");
    }
  }
}

Instance sample_instance(const ModelParams& params, RandomSource& rng) {
  params.validate();
  Instance inst;
  inst.params = params;
  inst.constraints.resize(static_cast<std::size_t>(params.M));
  const double p = params.dilution_probability();
  for (auto& constraint : inst.constraints) {
    for (int i = 0; i < params.N; ++i) {
      if (rng.bernoulli(p)) constraint.push_back({i, rng.normal()});
    }
  }
  return inst;
}

double hamiltonian_value(const Instance& instance, const BoundedPotential& u,
                         std::span<const int> sigma) {
  if (sigma.size() != static_cast<std::size_t>(instance.params.N))
    throw ParameterError("spin configuration length must equal N");
  double total = 0.0;
  for (std::size_t k = 0; k < instance.constraints.size(); ++k) {
    if (!instance.params.eta[k]) continue;
    double arg = 0.0;
    for (const auto& c : instance.constraints[k]) arg += c.weight * sigma[c.site];
    total += u(arg);
  }
  return total;
}

ConditionReport check_conditions(double alpha, double gamma0, const BoundedPotential& u) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0,1)");
  if (!(gamma0 >= 0.0)) throw ParameterError("gamma0 must be >= 0");
  ConditionReport r;
  const double U = u.sup_norm();
  r.sup_norm = U;
  const double e4 = std::exp(4.0 * U);
  const double g2 = gamma0 * gamma0;
  r.e712_lhs = 4.0 * U * alpha * g2 * e4 * std::exp(alpha * gamma0 * (e4 - 1.0)) *
               (3.0 + 2.0 * gamma0 + alpha * (g2 + g2 * gamma0) * e4);
  r.e712_ok = r.e712_lhs < 1.0;
  r.contraction_factor = 2.0 * U * std::exp(2.0 * U) * alpha * g2;
  r.e750_lhs = r.contraction_factor;
  r.e750_ok = r.e750_lhs < 0.5;
  r.e754_magnitude = alpha * std::pow(gamma0, 6) * U * std::exp(2.0 * U);
  return r;
}

nlohmann::json to_json(const ConditionReport& r) {
  return {{"sup_norm", r.sup_norm},
          {"e712_lhs", r.e712_lhs},
          {"e712_ok", r.e712_ok},
          {"e750_lhs", r.e750_lhs},
          {"e750_ok", r.e750_ok},
          {"e754_magnitude", r.e754_magnitude},
          {"contraction_factor", r.contraction_factor}};
}

std::string serialize_instance(const Instance& inst) {
  std::ostringstream os;
  const auto& p = inst.params;
  os << "{\"N\":" << p.N << ",\"M\":" << p.M << ",\"alpha\":" << format_double(p.alpha)
     << ",\"gamma\":" << format_double(p.gamma) << ",\"eta\":[";
  for (std::size_t k = 0; k < p.eta.size(); ++k) os << (k ? "," : "") << int(p.eta[k]);
  os << "],\"constraints\":[";
  for (std::size_t k = 0; k < inst.constraints.size(); ++k) {
    os << (k ? "," : "") << "[";
    const auto& c = inst.constraints[k];
    for (std::size_t j = 0; j < c.size(); ++j)
      os << (j ? "," : "") << "[" << c[j].site + 1 << "," << format_double(c[j].weight) << "]";
    os << "]";
  }
  os << "]}";
  return os.str();
}

Instance parse_instance(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    Instance inst;
    auto& p = inst.params;
    p.N = j.at("N").get<int>();
    p.M = j.at("M").get<int>();
    p.alpha = j.at("alpha").get<double>();
    p.gamma = j.at("gamma").get<double>();
    for (const auto& e : j.at("eta")) p.eta.push_back(static_cast<std::uint8_t>(e.get<int>()));
    for (const auto& c : j.at("constraints")) {
      auto& out = inst.constraints.emplace_back();
      for (const auto& pair : c)
        out.push_back({pair.at(0).get<int>() - 1, pair.at(1).get<double>()});
    }
    inst.validate();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed instance JSON: ") + e.what());
  }
}

}  // namespace dperc
