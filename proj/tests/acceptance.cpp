// Acceptance gate: one PASS/FAIL line per criterion, master seed 1.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "dperc/exact_gibbs.hpp"
#include "dperc/fixed_point.hpp"
#include "dperc/free_energy.hpp"
#include "dperc/model.hpp"
#include "dperc/random.hpp"
#include "dperc/transport.hpp"

using namespace dperc;

namespace {

constexpr std::uint64_t kMasterSeed = 1;
const double kLog2 = std::numbers::ln2;
const BoundedPotential kTanh = BoundedPotential::scaled_tanh(0.2, 1.0);

// Pinned tolerances.
constexpr double kCavityTol = 1e-10;
constexpr double kClosedFormTol = 1e-6;
constexpr double kLogZTol = 1e-12;
constexpr double kDecorrelationSeparation = 3.0;  // combined standard errors
constexpr double kContractionSlack = 3.0;         // standard errors
constexpr double kUniquenessTol = 5e-3;
constexpr double kLawCeiling = 0.1;
constexpr double kRsAbsTol = 0.01;
constexpr double kRsErrorMultiple = 2.0;
constexpr double kSymmetryTol = 1e-14;
constexpr double kTriangleTol = 1e-12;
constexpr double kCdfOracleTol = 1e-14;
constexpr double kJointOracleTol = 1e-12;
constexpr double kCollapseSigmas = 4.0;
constexpr double kKappaSigmas = 4.0;
constexpr double kKappaFloor = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Stream criterion_stream(int id) { return Stream(kMasterSeed).child("criterion", static_cast<std::uint64_t>(id)); }

Outcome cavity_identity() {
  const Stream root = criterion_stream(1);
  const SpinPolynomial f1{{1.0, {}}}, f2{{1.0, {0}}}, f3{{1.0, {0, 1}}};
  double worst = 0.0;
  for (int r = 0; r < 100; ++r) {
    RandomSource rng(root.child("instance", static_cast<std::uint64_t>(r)));
    const int N = 2 + static_cast<int>(rng.index(7));
    const int M = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::min(5, N - 1))));
    const double gamma = 2.0 * rng.uniform();
    const auto inst = sample_instance(ModelParams::with_constraints(N, M, gamma), rng);
    for (const auto* f : {&f1, &f2, &f3}) {
      const auto s = cavity_check(inst, kTanh, *f);
      worst = std::max(worst, std::abs(s.lhs - s.rhs));
    }
  }
  return {worst < kCavityTol, fmt("max |lhs-rhs| = %.2e over 100 instances x 3 f (tol %.0e)", worst, kCavityTol)};
}

Outcome closed_forms() {
  const Stream root = criterion_stream(2);
  bool ok = true;
  double worst_logz = 0.0;
  for (int N : {4, 8, 12, 16}) {
    RandomSource rng(root.child("zero", static_cast<std::uint64_t>(N)));
    const auto inst = sample_instance(ModelParams::make(N, 0.5, 2.0), rng);
    worst_logz = std::max(worst_logz, std::abs(enumerate_gibbs(inst, BoundedPotential::zero()).log_Z - N * kLog2));
  }
  ok = ok && worst_logz <= kLogZTol;

  CurveOptions o;
  const auto zero_curve = build_rs_curve(0.1, BoundedPotential::zero(), 2.0, 17, o, root.child("zero-curve"));
  bool zero_exact = true;
  for (double F : zero_curve.F) zero_exact = zero_exact && F == kLog2;
  ok = ok && zero_exact;

  const double alpha = 0.25, c = 0.3, target = kLog2 + alpha * c;
  const auto u = BoundedPotential::constant(c);
  double worst_pn = 0.0, worst_se = 0.0;
  for (int N : {8, 12, 16}) {
    const auto b = disorder_average(ModelParams::make(N, alpha, 1.0), u, StatisticSpec{}, 200,
                                    root.child("pN", static_cast<std::uint64_t>(N)));
    worst_pn = std::max(worst_pn, std::abs(b.summary.mean - target));
    worst_se = std::max(worst_se, b.summary.std_error);
  }
  ok = ok && worst_pn < kClosedFormTol && worst_se == 0.0;

  const auto curve = build_rs_curve(alpha, u, 2.0, 17, o, root.child("const-curve"));
  double worst_F = 0.0;
  for (double F : curve.F) worst_F = std::max(worst_F, std::abs(F - target));
  ok = ok && worst_F < kClosedFormTol;

  return {ok, fmt("zero: |logZ-N log2| <= %.1e, F==log2 %s; const: |pN-target| = %.1e (se %.1e), |F-target| = %.1e (tol %.0e)",
                  worst_logz, zero_exact ? "yes" : "no", worst_pn, worst_se, worst_F, kClosedFormTol)};
}

Outcome decorrelation() {
  const Stream root = criterion_stream(3);
  const StatisticSpec spec{StatisticKind::Decorrelation, 1};
  std::vector<DisorderStatistic> stats;
  std::string detail;
  for (int N : {8, 12, 16, 20}) {
    const auto b = disorder_average(ModelParams::make(N, 0.1, 1.0), kTanh, spec, 2000,
                                    root.child("N", static_cast<std::uint64_t>(N)));
    stats.push_back(b.summary);
    detail += fmt("N=%d %.3e(%.1e) ", N, b.summary.mean, b.summary.std_error);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < stats.size(); ++i) decreasing = decreasing && stats[i].mean < stats[i - 1].mean;
  const double gap = stats[0].mean - stats[2].mean;
  const double combined = std::hypot(stats[0].std_error, stats[2].std_error);
  const bool separated = gap >= kDecorrelationSeparation * combined;
  detail += fmt("| decreasing=%s, (N8-N16)/se = %.2f (need %.0f)", decreasing ? "yes" : "no",
                combined > 0 ? gap / combined : 0.0, kDecorrelationSeparation);
  return {decreasing && separated, detail};
}

Outcome contraction() {
  const Stream root = criterion_stream(4);
  int passed = 0, pairs = 0;
  double worst_ratio = 0.0;
  // Draws violating the uniqueness condition are skipped until 20 valid pairs exist.
  for (std::uint64_t draw = 0; pairs < 20; ++draw) {
    RandomSource rng(root.child("pair", draw));
    const double alpha = 0.05 + 0.45 * rng.uniform();
    const double gamma = 0.5 + 1.5 * rng.uniform();
    const auto u = BoundedPotential::scaled_tanh(0.1 + 0.4 * rng.uniform(), 0.5 + rng.uniform());
    if (!check_conditions(alpha, gamma, u).e750_ok) continue;
    PopulationMeasure a, b;
    const std::size_t S = 5000;
    const double shift_a = 2.0 * rng.uniform() - 1.0, shift_b = 2.0 * rng.uniform() - 1.0;
    for (std::size_t i = 0; i < S; ++i) {
      a.values.push_back(std::clamp(shift_a + 0.5 * (2.0 * rng.uniform() - 1.0), -1.0, 1.0));
      b.values.push_back(std::clamp(shift_b * rng.uniform(), -1.0, 1.0));
    }
    ++pairs;
    const auto r = contraction_test(a, b, alpha, gamma, u, 20000, root.child("test", draw));
    if (r.coupled_w1_image <= r.bound + kContractionSlack * r.std_error) ++passed;
    if (r.bound > 0) worst_ratio = std::max(worst_ratio, r.coupled_w1_image / r.bound);
  }
  return {passed == pairs, fmt("%d/%d pairs within bound + %.0f se; max image/bound = %.3f", passed, pairs, kContractionSlack, worst_ratio)};
}

Outcome uniqueness() {
  const Stream root = criterion_stream(5);
  SolveOptions o;
  o.pop_size = 100000;
  const auto a = solve_fixed_point(0.1, 1.0, kTanh, o, root.child("seed", 0));
  const auto b = solve_fixed_point(0.1, 1.0, kTanh, o, root.child("seed", 1));
  o.initial = std::vector<double>(o.pop_size, 0.5);
  const auto c = solve_fixed_point(0.1, 1.0, kTanh, o, root.child("seed", 2));
  const double ab = w1_sorted(a.population.values, b.population.values);
  const double ac = w1_sorted(a.population.values, c.population.values);
  const double bc = w1_sorted(b.population.values, c.population.values);
  const double worst = std::max({ab, ac, bc});
  return {worst < kUniquenessTol, fmt("W1 seeds = %.2e, zeros-vs-0.5 = %.2e / %.2e (tol %.0e)", ab, ac, bc, kUniquenessTol)};
}

Outcome magnetization_law() {
  const Stream root = criterion_stream(6);
  SolveOptions o;
  o.pop_size = 100000;
  const auto fp = solve_fixed_point(0.1, 1.0, kTanh, o, root.child("fixed-point"));
  const auto n8 = magnetization_law_test(0.1, kTanh, 1.0, 8, 1, 512, fp.population, root.child("law", 8));
  const auto n16 = magnetization_law_test(0.1, kTanh, 1.0, 16, 1, 512, fp.population, root.child("law", 16));
  const bool ok = n16.marginal_w1 < n8.marginal_w1 && n8.marginal_w1 < kLawCeiling && n16.marginal_w1 < kLawCeiling;
  return {ok, fmt("marginal W1: N=8 %.3e, N=16 %.3e (need decrease, both < %.1f)", n8.marginal_w1, n16.marginal_w1, kLawCeiling)};
}

Outcome rs_formula() {
  const Stream root = criterion_stream(7);
  const auto curve = build_rs_curve(0.1, kTanh, 2.0, 17, CurveOptions{}, root.child("curve"));
  const std::vector<int> Ns{8, 12, 16, 20};
  const auto cmp = compare_pN_vs_F(0.1, kTanh, 1.0, Ns, 2000, curve, root.child("comparison"));
  bool decreasing = true;
  std::string detail;
  for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
    const auto& r = cmp.rows[i];
    detail += fmt("N=%d(M=%d) %.2e ", r.N, r.M, r.abs_diff);
    if (i > 0) decreasing = decreasing && r.abs_diff < cmp.rows[i - 1].abs_diff;
  }
  const auto& last = cmp.rows.back();
  const double err = std::hypot(last.pN_stderr, last.F_error);
  const bool close = last.abs_diff < kRsAbsTol + kRsErrorMultiple * err;
  const bool slope = cmp.fitted_decay > 0.0;
  detail += fmt("| decreasing=%s, slope=%.3e, N=20 within %.2f+2err=%s", decreasing ? "yes" : "no",
                cmp.fitted_decay, kRsAbsTol, close ? "yes" : "no");
  return {decreasing && slope && close, detail};
}

std::vector<double> uniform_sample(RandomSource& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

Outcome metric_suite() {
  RandomSource rng(criterion_stream(8));
  int failures = 0;
  double worst_cdf = 0.0, worst_joint = 0.0;
  for (int r = 0; r < 100; ++r) {
    const std::size_t n = 1 + rng.index(200);
    const auto a = uniform_sample(rng, n), b = uniform_sample(rng, n), c = uniform_sample(rng, n);
    failures += w1_sorted(a, a) != 0.0;
    failures += std::abs(w1_sorted(a, b) - w1_sorted(b, a)) > kSymmetryTol;
    failures += w1_sorted(a, c) > w1_sorted(a, b) + w1_sorted(b, c) + kTriangleTol;
    worst_cdf = std::max(worst_cdf, std::abs(w1_cdf(a, b) - w1_sorted(a, b)));

    const auto bu = uniform_sample(rng, 1 + rng.index(200)), cu = uniform_sample(rng, 1 + rng.index(200));
    failures += w1_cdf(a, a) != 0.0;
    failures += std::abs(w1_cdf(a, bu) - w1_cdf(bu, a)) > kSymmetryTol;
    failures += w1_cdf(a, cu) > w1_cdf(a, bu) + w1_cdf(bu, cu) + kTriangleTol;

    const std::size_t m = 1 + rng.index(8), k = 1 + rng.index(128);
    const JointSample ja{m, uniform_sample(rng, k * m)}, jb{m, uniform_sample(rng, k * m)}, jc{m, uniform_sample(rng, k * m)};
    failures += w1_joint(ja, ja) != 0.0;
    failures += std::abs(w1_joint(ja, jb) - w1_joint(jb, ja)) > kSymmetryTol;
    failures += w1_joint(ja, jc) > w1_joint(ja, jb) + w1_joint(jb, jc) + kTriangleTol;
    for (std::size_t axis = 0; axis < m; ++axis)
      failures += w1_joint(ja, jb) < w1_sorted(ja.marginal(axis), jb.marginal(axis)) - kTriangleTol;

    const auto ka = uniform_sample(rng, k), kb = uniform_sample(rng, k);
    worst_joint = std::max(worst_joint, std::abs(w1_joint(JointSample{1, ka}, JointSample{1, kb}) - w1_sorted(ka, kb)));
  }
  const bool ok = failures == 0 && worst_cdf <= kCdfOracleTol && worst_joint <= kJointOracleTol;
  return {ok, fmt("%d axiom violations; cdf-vs-sorted %.1e (tol %.0e); joint-vs-sorted %.1e (tol %.0e)",
                  failures, worst_cdf, kCdfOracleTol, worst_joint, kJointOracleTol)};
}

Outcome mean_collapse() {
  const Stream root = criterion_stream(9);
  const std::size_t draws = 100000;
  int passed = 0;
  double worst_z = 0.0;
  for (int c = 0; c < 50; ++c) {
    RandomSource rng(root.child("case", static_cast<std::uint64_t>(c)));
    const std::size_t p = rng.index(7);
    std::vector<double> g(p);
    for (double& w : g) w = 1.5 * rng.normal();
    const auto u = BoundedPotential::scaled_tanh(0.2 + rng.uniform(), 0.5 + rng.uniform());
    std::vector<double> pop(1000);
    const double shift = 0.8 * (2.0 * rng.uniform() - 1.0);
    for (double& v : pop) v = std::clamp(shift + 0.6 * (2.0 * rng.uniform() - 1.0), -1.0, 1.0);
    double mbar = 0.0;
    for (double v : pop) mbar += v;
    mbar /= static_cast<double>(pop.size());

    double s = 0.0, s2 = 0.0;
    std::vector<double> x(p);
    for (std::size_t d = 0; d < draws; ++d) {
      for (double& xi : x) xi = pop[rng.index(pop.size())];
      double total = 0.0;
      for (std::uint32_t bits = 0; bits < (1u << p); ++bits) {
        double w = 1.0, arg = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
          const double sg = (bits >> i) & 1 ? -1.0 : 1.0;
          w *= (1.0 + sg * x[i]) / 2.0;
          arg += g[i] * sg;
        }
        total += w * std::exp(u(arg));
      }
      s += total;
      s2 += total * total;
    }
    const double mean = s / draws;
    const double se = std::sqrt(std::max(0.0, s2 / draws - mean * mean) / draws);
    const double diff = std::abs(mean - vbar(g, u, mbar));
    const bool ok = se > 0 ? diff < kCollapseSigmas * se : diff < 1e-12;
    passed += ok;
    if (se > 0) worst_z = std::max(worst_z, diff / se);
  }
  return {passed == 50, fmt("%d/50 cases within %.0f se; max |z| = %.2f", passed, kCollapseSigmas, worst_z)};
}

Outcome kappa_fidelity() {
  const Stream root = criterion_stream(10);
  const int n = 1000000;
  int cells = 0, bad = 0;
  double worst_z = 0.0;
  for (const auto& [alpha, gamma] : std::vector<std::pair<double, double>>{{0.1, 1.0}, {0.25, 2.0}}) {
    RandomSource rng(root.child(fmt("a%g-g%g", alpha, gamma)));
    std::map<std::vector<int>, int> counts;
    for (int i = 0; i < n; ++i) ++counts[sample_tree(alpha, gamma, rng).tau];
    // Cells with κ ≥ 10⁻³ have expected count ≥ 1000, so none can be unobserved.
    for (const auto& [tau, count] : counts) {
      const double k = tree_weight(alpha, gamma, tau);
      if (k < kKappaFloor) continue;
      ++cells;
      const double z = std::abs(static_cast<double>(count) / n - k) / std::sqrt(k * (1 - k) / n);
      worst_z = std::max(worst_z, z);
      bad += z >= kKappaSigmas;
    }
  }
  return {bad == 0 && cells > 0, fmt("%d cells with kappa >= %.0e over 2 parameter sets x 1e6 trees; max |z| = %.2f (limit %.0f)",
                                     cells, kKappaFloor, worst_z, kKappaSigmas)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "cavity identity", 10, cavity_identity},
      {2, "closed-form potentials", 5, closed_forms},
      {3, "spin decorrelation", 300, decorrelation},
      {4, "contraction of T", 60, contraction},
      {5, "fixed-point uniqueness", 120, uniqueness},
      {6, "magnetization law", 600, magnetization_law},
      {7, "replica-symmetric formula", 900, rs_formula},
      {8, "metric suite", 30, metric_suite},
      {9, "mean-collapse identity", 60, mean_collapse},
      {10, "kappa mixture fidelity", 30, kappa_fidelity},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %2d %-26s %s [%.1fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", too slow");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
