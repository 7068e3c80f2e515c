#include "dperc/exact_gibbs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>

#include "dperc/errors.hpp"
#include "dperc/parallel.hpp"
#include "dperc/stats.hpp"

namespace dperc {
namespace {

// Spins below this bit index are "low": they change within a block of
// 2^kLowBits consecutive Gray-code steps, while every higher spin is constant
// over the block. High-spin averages are therefore flushed once per block.
constexpr int kLowBits = 6;

struct SiteTerm {
  int constraint;
  double weight;
};

class GrayEnumerator {
 public:
  GrayEnumerator(const Instance& inst, const BoundedPotential& u,
                 std::span<const SitePair> pairs)
      : u_(u), n_(inst.params.N), low_(std::min(n_, kLowBits)), spin_(n_, 1.0),
        site_terms_(n_) {
    for (std::size_t k = 0; k < inst.constraints.size(); ++k) {
      if (!inst.params.eta[k]) continue;
      const auto& c = inst.constraints[k];
      if (c.empty()) {
        constant_energy_ += u(0.0);
        continue;
      }
      const int idx = static_cast<int>(members_.size());
      members_.push_back(c);
      for (const auto& coupling : c) site_terms_[coupling.site].push_back({idx, coupling.weight});
    }
    u_value_.resize(members_.size());
    for (std::size_t a = 0; a < members_.size(); ++a) u_value_[a] = u_(argument(a));
    energy_ = resync();

    for (const auto& [i, j] : pairs) {
      if (i < 0 || j < 0 || i >= n_ || j >= n_) throw ParameterError("pair site out of range");
      PairSlot slot{i, j, -1};
      if (i != j && i < low_ && j < low_) {
        slot.low_index = static_cast<int>(low_pairs_.size());
        low_pairs_.push_back({i, j});
      }
      pair_slots_.push_back(slot);
    }
    mag_.assign(n_, 0.0);
    block_mag_.assign(low_, 0.0);
    pair_.assign(pair_slots_.size(), 0.0);
    block_pair_.assign(low_pairs_.size(), 0.0);
  }

  GibbsSummary run() {
    const std::uint64_t total = std::uint64_t{1} << n_;
    const std::uint64_t block_mask = (std::uint64_t{1} << low_) - 1;
    shift_ = energy_;
    for (std::uint64_t t = 0; t < total; ++t) {
      if (t != 0) {
        const int site = std::countr_zero(t);
        const bool boundary = (t & block_mask) == 0;
        if (boundary) flush();
        flip(site);
        if (boundary) energy_ = resync();
      }
      if (energy_ > shift_) rescale(energy_);
      const double w = std::exp(energy_ - shift_);
      block_weight_ += w;
      for (int j = 0; j < low_; ++j) block_mag_[j] += spin_[j] * w;
      for (std::size_t q = 0; q < low_pairs_.size(); ++q)
        block_pair_[q] += spin_[low_pairs_[q].first] * spin_[low_pairs_[q].second] * w;
    }
    flush();

    GibbsSummary out;
    out.log_Z = shift_ + std::log(z_);
    out.magnetizations.resize(n_);
    for (int i = 0; i < n_; ++i) out.magnetizations[i] = std::clamp(mag_[i] / z_, -1.0, 1.0);
    for (std::size_t q = 0; q < pair_slots_.size(); ++q) {
      const auto& s = pair_slots_[q];
      out.pair_correlations[{s.i, s.j}] =
          s.i == s.j ? 1.0 : std::clamp(pair_[q] / z_, -1.0, 1.0);
    }
    return out;
  }

 private:
  struct PairSlot {
    int i, j;
    int low_index;
  };

  double argument(std::size_t a) const {
    double arg = 0.0;
    for (const auto& c : members_[a]) arg += c.weight * spin_[c.site];
    return arg;
  }

  double resync() const {
    double e = constant_energy_;
    for (double v : u_value_) e += v;
    return e;
  }

  void flip(int site) {
    spin_[site] = -spin_[site];
    for (const auto& term : site_terms_[site]) {
      const double fresh = u_(argument(term.constraint));
      energy_ += fresh - u_value_[term.constraint];
      u_value_[term.constraint] = fresh;
    }
  }

  void rescale(double new_shift) {
    const double f = std::exp(shift_ - new_shift);
    z_ *= f;
    block_weight_ *= f;
    for (auto& v : mag_) v *= f;
    for (auto& v : block_mag_) v *= f;
    for (auto& v : pair_) v *= f;
    for (auto& v : block_pair_) v *= f;
    shift_ = new_shift;
  }

  void flush() {
    z_ += block_weight_;
    for (int j = 0; j < low_; ++j) mag_[j] += block_mag_[j];
    for (int i = low_; i < n_; ++i) mag_[i] += spin_[i] * block_weight_;
    for (std::size_t q = 0; q < pair_slots_.size(); ++q) {
      const auto& s = pair_slots_[q];
      if (s.i == s.j) continue;
      const bool low_i = s.i < low_, low_j = s.j < low_;
      if (low_i && low_j)
        pair_[q] += block_pair_[s.low_index];
      else if (low_i)
        pair_[q] += spin_[s.j] * block_mag_[s.i];
      else if (low_j)
        pair_[q] += spin_[s.i] * block_mag_[s.j];
      else
        pair_[q] += spin_[s.i] * spin_[s.j] * block_weight_;
    }
    block_weight_ = 0.0;
    std::fill(block_mag_.begin(), block_mag_.end(), 0.0);
    std::fill(block_pair_.begin(), block_pair_.end(), 0.0);
  }

  const BoundedPotential& u_;
  int n_;
  int low_;
  std::vector<double> spin_;
  std::vector<std::vector<Coupling>> members_;
  std::vector<std::vector<SiteTerm>> site_terms_;
  std::vector<double> u_value_;
  double constant_energy_ = 0.0;
  double energy_ = 0.0;
  double shift_ = 0.0;

  std::vector<PairSlot> pair_slots_;
  std::vector<SitePair> low_pairs_;

  double z_ = 0.0;
  std::vector<double> mag_;
  std::vector<double> pair_;
  double block_weight_ = 0.0;
  std::vector<double> block_mag_;
  std::vector<double> block_pair_;
};

void spins_from_bits(std::uint64_t bits, std::vector<int>& sigma) {
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = (bits >> i) & 1 ? -1 : 1;
}

// Σ exp(logw_c) f_c / Σ exp(logw_c) with a common max shift.
double weighted_ratio(const std::vector<double>& log_weights, const std::vector<double>& num,
                      const std::vector<double>& den) {
  const double shift = *std::max_element(log_weights.begin(), log_weights.end());
  double a = 0.0, b = 0.0;
  for (std::size_t c = 0; c < log_weights.size(); ++c) {
    const double w = std::exp(log_weights[c] - shift);
    a += w * num[c];
    b += w * den[c];
  }
  return a / b;
}

}  // namespace

GibbsSummary enumerate_gibbs(const Instance& instance, const BoundedPotential& u,
                             std::span<const SitePair> want_pairs) {
  if (instance.params.N > kMaxEnumerationSpins)
    throw CapacityError("exact enumeration supports N <= " +
                        std::to_string(kMaxEnumerationSpins) + " (got N = " +
                        std::to_string(instance.params.N) +
                        "); larger systems need a Monte Carlo sampler");
  instance.validate();
  return GrayEnumerator(instance, u, want_pairs).run();
}

double evaluate(const SpinPolynomial& f, std::span<const int> sigma) {
  double total = 0.0;
  for (const auto& m : f) {
    double term = m.coefficient;
    for (int s : m.sites) term *= sigma[s];
    total += term;
  }
  return total;
}

CavitySides cavity_check(const Instance& instance, const BoundedPotential& u,
                         const SpinPolynomial& f) {
  const int n = instance.params.N;
  if (n > kMaxCavitySpins)
    throw CapacityError("cavity_check supports N <= " + std::to_string(kMaxCavitySpins));
  if (n < 2) throw ParameterError("cavity_check needs N >= 2");
  instance.validate();
  for (const auto& m : f)
    for (int s : m.sites)
      if (s < 0 || s >= n) throw ParameterError("polynomial site out of range");

  CavitySides out;
  std::vector<int> sigma(n);

  // Left side: direct Gibbs average over {−1,1}^N.
  {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::vector<double> logw(total), num(total), den(total, 1.0);
    for (std::uint64_t b = 0; b < total; ++b) {
      spins_from_bits(b, sigma);
      logw[b] = hamiltonian_value(instance, u, sigma);
      num[b] = evaluate(f, sigma);
    }
    out.lhs = weighted_ratio(logw, num, den);
  }

  // Right side: (N−1)-spin system without the constraints touching the last
  // spin, reweighted by ξ and averaged over the last spin.
  {
    const int last = n - 1;
    struct CavityTerm {
      std::size_t constraint;
      double last_weight;
    };
    std::vector<CavityTerm> touching;
    std::vector<std::size_t> reduced;
    for (std::size_t k = 0; k < instance.constraints.size(); ++k) {
      double g_last = 0.0;
      bool has_last = false;
      for (const auto& c : instance.constraints[k])
        if (c.site == last) {
          has_last = true;
          g_last = c.weight;
        }
      if (has_last) {
        if (instance.params.eta[k]) touching.push_back({k, g_last});
      } else if (instance.params.eta[k]) {
        reduced.push_back(k);
      }
    }
    auto partial_arg = [&](std::size_t k) {
      double arg = 0.0;
      for (const auto& c : instance.constraints[k])
        if (c.site != last) arg += c.weight * sigma[c.site];
      return arg;
    };

    const std::uint64_t total = std::uint64_t{1} << (n - 1);
    std::vector<double> logw(2 * total), num(2 * total), den(2 * total);
    for (std::uint64_t b = 0; b < total; ++b) {
      spins_from_bits(b, sigma);  // sets σ_N = +1; overwritten below
      double reduced_energy = 0.0;
      for (auto k : reduced) reduced_energy += u(partial_arg(k));
      for (int e = 0; e < 2; ++e) {
        const int last_spin = e == 0 ? 1 : -1;
        sigma[last] = last_spin;
        double log_xi = 0.0;
        for (const auto& t : touching) log_xi += u(partial_arg(t.constraint) + t.last_weight * last_spin);
        const std::size_t c = 2 * b + e;
        logw[c] = reduced_energy + log_xi;
        num[c] = 0.5 * evaluate(f, sigma);
        den[c] = 0.5;
      }
    }
    out.rhs = weighted_ratio(logw, num, den);
  }
  return out;
}

std::string StatisticSpec::name() const {
  switch (kind) {
    case StatisticKind::FreeEnergy:
      return "pN";
    case StatisticKind::Decorrelation:
      return "decorrelation";
    case StatisticKind::Magnetization:
      return "magnetization(" + std::to_string(m) + ")";
  }
  return "pN";
}

StatisticSpec StatisticSpec::parse(const std::string& name) {
  if (name == "pN") return {StatisticKind::FreeEnergy, 1};
  if (name == "decorrelation") return {StatisticKind::Decorrelation, 1};
  if (name.rfind("magnetization(", 0) == 0 && name.back() == ')') {
    const auto inner = name.substr(14, name.size() - 15);
    try {
      return {StatisticKind::Magnetization, std::stoi(inner)};
    } catch (const std::exception&) {
    }
  }
  throw ParameterError("unknown statistic '" + name +
                       "' (expected pN, decorrelation or magnetization(m))");
}

DisorderBatch disorder_average(const ModelParams& params, const BoundedPotential& u,
                               const StatisticSpec& statistic, int n_samples,
                               const Stream& stream, unsigned workers) {
  params.validate();
  if (params.N > kMaxEnumerationSpins)
    throw CapacityError("disorder_average enumerates exactly and needs N <= " +
                        std::to_string(kMaxEnumerationSpins));
  if (n_samples < 2) throw ParameterError("n_samples must be >= 2");
  if (statistic.kind == StatisticKind::Decorrelation && params.N < 2)
    throw ParameterError("decorrelation needs N >= 2");
  if (statistic.kind == StatisticKind::Magnetization &&
      (statistic.m < 1 || statistic.m > params.N))
    throw ParameterError("magnetization(m) needs 1 <= m <= N");

  DisorderBatch batch;
  batch.spec = statistic;
  batch.params = params;
  batch.samples.resize(static_cast<std::size_t>(n_samples));
  const std::vector<SitePair> pairs =
      statistic.kind == StatisticKind::Decorrelation ? std::vector<SitePair>{{0, 1}}
                                                     : std::vector<SitePair>{};

  parallel_for(batch.samples.size(), workers, [&](std::size_t s) {
    const Stream sub = stream.child("disorder", s);
    RandomSource rng(sub);
    const Instance inst = sample_instance(params, rng);
    const GibbsSummary g = enumerate_gibbs(inst, u, pairs);
    auto& sample = batch.samples[s];
    sample.seed = sub.key();
    sample.index = static_cast<int>(s);
    switch (statistic.kind) {
      case StatisticKind::FreeEnergy:
        sample.values = {g.log_Z / params.N};
        break;
      case StatisticKind::Decorrelation: {
        const double c = g.pair_correlations.at({0, 1});
        sample.values = {std::abs(c - g.magnetizations[0] * g.magnetizations[1])};
        break;
      }
      case StatisticKind::Magnetization:
        sample.values.assign(g.magnetizations.begin(), g.magnetizations.begin() + statistic.m);
        break;
    }
  });

  std::vector<double> per_sample;
  per_sample.reserve(batch.samples.size());
  for (const auto& s : batch.samples) {
    double acc = 0.0;
    for (double v : s.values) acc += v;
    per_sample.push_back(s.values.size() == 1 ? s.values[0] : acc / s.values.size());
  }
  const auto est = summarize(per_sample);
  batch.summary = {statistic.name(), est.mean, est.std_error, n_samples};
  return batch;
}

void write_batch_csv(std::ostream& os, const DisorderBatch& batch) {
  os << "seed,sample_index,statistic_name,value\n";
  const bool vector_valued = batch.spec.kind == StatisticKind::Magnetization;
  for (const auto& s : batch.samples) {
    for (std::size_t c = 0; c < s.values.size(); ++c) {
      os << s.seed << ',' << s.index << ',';
      if (vector_valued)
        os << "magnetization[" << c + 1 << "]";
      else
        os << batch.summary.name;
      os << ',' << format_double(s.values[c]) << '\n';
    }
  }
}

nlohmann::json summary_json(const DisorderBatch& batch, const BoundedPotential& u) {
  const auto& p = batch.params;
  return {{"statistic", batch.summary.name},
          {"mean", batch.summary.mean},
          {"std_error", batch.summary.std_error},
          {"n_samples", batch.summary.n_samples},
          {"params",
           {{"N", p.N}, {"M", p.M}, {"alpha", p.alpha}, {"gamma", p.gamma},
            {"potential", u.descriptor()}}}};
}

}  // namespace dperc
