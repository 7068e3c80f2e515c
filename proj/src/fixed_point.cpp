#include "dperc/fixed_point.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "dperc/errors.hpp"
#include "dperc/model.hpp"
#include "dperc/parallel.hpp"
#include "dperc/stats.hpp"
#include "dperc/transport.hpp"

namespace dperc {

int TreeSample::total_spins() const {
  int t = 0;
  for (int v : tau) t += v;
  return t;
}

TreeSample sample_tree(double alpha, double gamma, RandomSource& rng) {
  if (!(alpha * gamma >= 0.0)) throw ParameterError("sample_tree needs alpha*gamma >= 0");
  TreeSample tree;
  tree.theta = rng.poisson(alpha * gamma);
  tree.tau.resize(tree.theta);
  tree.spin_weights.resize(tree.theta);
  tree.cavity_weights.resize(tree.theta);
  for (int k = 0; k < tree.theta; ++k) {
    tree.tau[k] = rng.poisson(gamma);
    auto& row = tree.spin_weights[k];
    row.resize(tree.tau[k]);
    for (auto& g : row) g = rng.normal();
    tree.cavity_weights[k] = rng.normal();
  }
  return tree;
}

double tree_weight(double alpha, double gamma, std::span<const int> tau) {
  const double theta = static_cast<double>(tau.size());
  auto log_poisson = [](double mean, double k) {
    if (mean == 0.0) return k == 0.0 ? 0.0 : -INFINITY;
    return -mean + k * std::log(mean) - std::lgamma(k + 1.0);
  };
  double log_w = log_poisson(alpha * gamma, theta);
  for (int t : tau) log_w += log_poisson(gamma, t);
  return std::exp(log_w);
}

double cavity_ratio(const TreeSample& tree, const BoundedPotential& u,
                    std::span<const double> x) {
  const int t = tree.total_spins();
  if (t > kMaxTreeSpins)
    throw CapacityError("cavity_ratio enumerates at most " + std::to_string(kMaxTreeSpins) +
                        " tree spins (got " + std::to_string(t) + ")");
  if (x.size() != static_cast<std::size_t>(t))
    throw ParameterError("cavity_ratio needs one input per tree spin");
  if (tree.theta == 0) return 0.0;

  double log_odds = 0.0;
  std::size_t offset = 0;
  for (int k = 0; k < tree.theta; ++k) {
    const auto& g = tree.spin_weights[k];
    const double gk = tree.cavity_weights[k];
    const std::size_t tau = g.size();
    const auto xs = x.subspan(offset, tau);
    offset += tau;
    double a_plus = 0.0, a_minus = 0.0;
    const std::uint32_t configs = std::uint32_t{1} << tau;
    for (std::uint32_t bits = 0; bits < configs; ++bits) {
      double w = 1.0, s = 0.0;
      for (std::size_t i = 0; i < tau; ++i) {
        const double spin = (bits >> i) & 1 ? -1.0 : 1.0;
        w *= 0.5 * (1.0 + spin * xs[i]);
        s += g[i] * spin;
      }
      if (w == 0.0) continue;
      a_plus += w * std::exp(u(s + gk));
      a_minus += w * std::exp(u(s - gk));
    }
    log_odds += std::log(a_plus) - std::log(a_minus);
  }
  return std::tanh(0.5 * log_odds);
}

double PopulationMeasure::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

namespace {

TreeSample sample_enumerable_tree(double alpha, double gamma, RandomSource& rng) {
  while (true) {
    TreeSample tree = sample_tree(alpha, gamma, rng);
    if (tree.total_spins() <= kMaxTreeSpins) return tree;
  }
}

}  // namespace

PopulationMeasure apply_T(const PopulationMeasure& pop, double alpha, double gamma,
                          const BoundedPotential& u, std::size_t n_out, const Stream& stream,
                          unsigned workers) {
  if (pop.values.empty()) throw ParameterError("apply_T needs a nonempty population");
  if (n_out == 0) throw ParameterError("apply_T needs n_out >= 1");
  PopulationMeasure out;
  out.alpha = alpha;
  out.gamma = gamma;
  out.values.resize(n_out);
  const std::size_t chunks = (n_out + kChunkSize - 1) / kChunkSize;
  parallel_for(chunks, workers, [&](std::size_t c) {
    RandomSource rng(stream.child("chunk", c));
    std::vector<double> x;
    const std::size_t end = std::min(n_out, (c + 1) * kChunkSize);
    for (std::size_t j = c * kChunkSize; j < end; ++j) {
      const TreeSample tree = sample_enumerable_tree(alpha, gamma, rng);
      x.resize(static_cast<std::size_t>(tree.total_spins()));
      for (auto& xi : x) xi = pop.values[rng.index(pop.values.size())];
      out.values[j] = cavity_ratio(tree, u, x);
    }
  });
  return out;
}

FixedPointResult solve_fixed_point(double alpha, double gamma, const BoundedPotential& u,
                                   const SolveOptions& options, const Stream& stream) {
  if (options.pop_size == 0) throw ParameterError("population size must be >= 1");
  if (options.max_iter < 1) throw ParameterError("max_iter must be >= 1");
  if (!(options.tol > 0.0)) throw ParameterError("tol must be > 0");

  FixedPointResult result;
  auto& report = result.report;
  report.conditions_ok = check_conditions(alpha, gamma, u).e750_ok;

  PopulationMeasure pop;
  pop.alpha = alpha;
  pop.gamma = gamma;
  if (options.initial) {
    pop.values = *options.initial;
    if (pop.values.empty()) throw ParameterError("initial population is empty");
    for (double v : pop.values)
      if (!(v >= -1.0 && v <= 1.0)) throw ParameterError("initial population outside [-1,1]");
  } else {
    pop.values.assign(options.pop_size, 0.0);
  }

  for (int it = 1; it <= options.max_iter; ++it) {
    PopulationMeasure next = apply_T(pop, alpha, gamma, u, options.pop_size,
                                     stream.child("iteration", it), options.workers);
    const double delta = pop.size() == next.size() ? w1_sorted(pop.values, next.values)
                                                   : w1_cdf(pop.values, next.values);
    report.trajectory.push_back(delta);
    report.iterations = it;
    pop = std::move(next);
    if (delta < options.tol) {
      report.converged = true;
      break;
    }
    const auto& tr = report.trajectory;
    if (tr.size() >= 3) {
      const auto [lo, hi] = std::minmax({tr[tr.size() - 1], tr[tr.size() - 2], tr[tr.size() - 3]});
      if (hi - lo <= 0.1 * hi) {
        report.plateau = true;
        break;
      }
    }
  }
  report.final_step_w1 = report.trajectory.back();
  result.population = std::move(pop);
  return result;
}

ContractionResult contraction_test(const PopulationMeasure& pop1, const PopulationMeasure& pop2,
                                   double alpha, double gamma, const BoundedPotential& u,
                                   std::size_t n, const Stream& stream, unsigned workers) {
  if (pop1.size() != pop2.size() || pop1.size() == 0)
    throw ParameterError("contraction_test needs equal, nonempty populations");
  if (n < 2) throw ParameterError("contraction_test needs n >= 2");
  std::vector<double> s1 = pop1.values, s2 = pop2.values;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());

  std::vector<double> diffs(n);
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  parallel_for(chunks, workers, [&](std::size_t c) {
    RandomSource rng(stream.child("chunk", c));
    std::vector<double> x, y;
    const std::size_t end = std::min(n, (c + 1) * kChunkSize);
    for (std::size_t j = c * kChunkSize; j < end; ++j) {
      const TreeSample tree = sample_enumerable_tree(alpha, gamma, rng);
      const auto t = static_cast<std::size_t>(tree.total_spins());
      x.resize(t);
      y.resize(t);
      for (std::size_t i = 0; i < t; ++i) {
        const std::size_t idx = rng.index(s1.size());
        x[i] = s1[idx];
        y[i] = s2[idx];
      }
      diffs[j] = std::abs(cavity_ratio(tree, u, x) - cavity_ratio(tree, u, y));
    }
  });

  ContractionResult r;
  const auto est = summarize(diffs);
  r.coupled_w1_image = est.mean;
  r.std_error = est.std_error;
  r.input_w1 = w1_sorted(s1, s2);
  r.bound = check_conditions(alpha, gamma, u).contraction_factor * r.input_w1;
  return r;
}

namespace {

constexpr char kMagic[8] = {'D', 'P', 'P', 'O', 'P', '0', '0', '1'};

template <class T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, sizeof buf);
}

template <class T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof buf))
    throw ParameterError("truncated population file");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_population_binary(std::ostream& os, const PopulationMeasure& pop,
                             const BoundedPotential& u, std::uint64_t seed) {
  os.write(kMagic, sizeof kMagic);
  put_le<std::uint64_t>(os, pop.values.size());
  put_le<double>(os, pop.alpha);
  put_le<double>(os, pop.gamma);
  const std::string desc = u.descriptor();
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(desc.size()));
  os.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  put_le<std::uint64_t>(os, seed);
  for (double v : pop.values) put_le<double>(os, v);
}

PopulationFile read_population_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParameterError("not a population file (bad magic)");
  PopulationFile f;
  const auto size = get_le<std::uint64_t>(is);
  f.population.alpha = get_le<double>(is);
  f.population.gamma = get_le<double>(is);
  const auto len = get_le<std::uint32_t>(is);
  std::string desc(len, '\0');
  if (!is.read(desc.data(), len)) throw ParameterError("truncated population file");
  f.potential = BoundedPotential::parse(desc);
  f.seed = get_le<std::uint64_t>(is);
  f.population.values.resize(size);
  for (auto& v : f.population.values) v = get_le<double>(is);
  return f;
}

void write_population_csv(std::ostream& os, const PopulationMeasure& pop) {
  for (double v : pop.values) os << format_double(v) << '\n';
}

}  // namespace dperc
