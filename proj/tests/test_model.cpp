#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "dperc/errors.hpp"
#include "dperc/model.hpp"
#include "dperc/potential.hpp"
#include "dperc/random.hpp"

using namespace dperc;

namespace {

std::vector<BoundedPotential> family() {
  return {BoundedPotential::zero(),
          BoundedPotential::constant(-0.7),
          BoundedPotential::scaled_tanh(0.2, 1.0),
          BoundedPotential::scaled_tanh(-1.5, 3.0),
          BoundedPotential::gaussian_bump(0.4, 0.8),
          BoundedPotential::gaussian_bump(-2.0, 3.0),
          BoundedPotential::smooth_step(0.5, 2.0),
          BoundedPotential::smooth_step(-1.0, -4.0)};
}

Instance empty_instance(int N, int M) {
  Instance inst{ModelParams::with_constraints(N, M, 0.0), {}};
  inst.constraints.resize(static_cast<std::size_t>(M));
  return inst;
}

}  // namespace

TEST_CASE("potential values and sup norms") {
  CHECK(BoundedPotential::zero()(3.0) == 0.0);
  CHECK(BoundedPotential::constant(0.3)(-8.0) == 0.3);
  CHECK(BoundedPotential::scaled_tanh(0.2, 1.0)(0.5) == doctest::Approx(0.2 * std::tanh(0.5)));
  CHECK(BoundedPotential::gaussian_bump(2.0, 0.5)(1.0) == doctest::Approx(2.0 * std::exp(-4.0)));
  CHECK(BoundedPotential::smooth_step(1.0, 3.0)(0.0) == doctest::Approx(0.5));

  CHECK(BoundedPotential::zero().sup_norm() == 0.0);
  CHECK(BoundedPotential::constant(-0.7).sup_norm() == 0.7);
  CHECK(BoundedPotential::scaled_tanh(-1.5, 3.0).sup_norm() == 1.5);
  CHECK(BoundedPotential::scaled_tanh(1.5, 0.0).sup_norm() == 0.0);
  CHECK(BoundedPotential::gaussian_bump(-2.0, 3.0).sup_norm() == 2.0);
  CHECK(BoundedPotential::smooth_step(-1.0, 0.0).sup_norm() == 0.5);
  CHECK_THROWS_AS(BoundedPotential::gaussian_bump(1.0, 0.0), ParameterError);
}

TEST_CASE("potential bounded by its sup norm on a dense grid and random points") {
  RandomSource rng(7);
  for (const auto& u : family()) {
    CAPTURE(u.descriptor());
    const double U = u.sup_norm();
    for (int i = 0; i <= 100000; ++i) {
      const double x = -50.0 + 100.0 * i / 100000.0;
      REQUIRE(std::isfinite(u(x)));
      REQUIRE(std::abs(u(x)) <= U);
    }
    for (int i = 0; i < 10000; ++i) {
      const double x = 1e3 * (2.0 * rng.uniform() - 1.0);
      REQUIRE(std::abs(u(x)) <= U);
    }
  }
}

TEST_CASE("potential descriptors round-trip") {
  for (const auto& u : family()) CHECK(BoundedPotential::parse(u.descriptor()) == u);
  CHECK(BoundedPotential::parse("tanh:0.2:1") == BoundedPotential::scaled_tanh(0.2, 1.0));
  CHECK_THROWS_AS(BoundedPotential::parse("tanh:0.2"), ParameterError);
  CHECK_THROWS_AS(BoundedPotential::parse("cubic:1"), ParameterError);
  CHECK_THROWS_AS(BoundedPotential::parse("const:abc"), ParameterError);
}

TEST_CASE("model parameters") {
  const auto p = ModelParams::make(20, 0.1, 1.0);
  CHECK(p.M == 2);
  CHECK(p.eta == std::vector<std::uint8_t>(2, 1));
  CHECK(ModelParams::make(10, 0.25, 1.0).M == 3);
  CHECK_THROWS_AS(ModelParams::make(4, 0.1, 1.0), ParameterError);   // M = 0
  CHECK_THROWS_AS(ModelParams::make(10, 1.0, 1.0), ParameterError);
  CHECK_THROWS_AS(ModelParams::make(2, 0.5, 3.0), ParameterError);   // γ/N > 1
  CHECK_THROWS_AS(ModelParams::make(10, 0.5, -1.0), ParameterError);
  const auto q = ModelParams::with_constraints(2, 1, 0.0);
  CHECK(q.alpha == 0.5);
  auto bad = p;
  bad.eta[0] = 2;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("sample_instance at gamma 0 has no couplings") {
  RandomSource rng(3);
  const auto inst = sample_instance(ModelParams::make(12, 0.5, 0.0), rng);
  CHECK(inst.constraints.size() == 6);
  CHECK(inst.active_count() == 0);
}

TEST_CASE("sample_instance is deterministic given the stream") {
  const auto params = ModelParams::make(16, 0.25, 2.0);
  RandomSource a(Stream(99).child("x", 4));
  RandomSource b(Stream(99).child("x", 4));
  const auto i1 = sample_instance(params, a);
  const auto i2 = sample_instance(params, b);
  CHECK(serialize_instance(i1) == serialize_instance(i2));
  CHECK(i1.constraints == i2.constraints);
}

TEST_CASE("active coupling count is Binomial(N M, gamma/N)") {
  const auto params = ModelParams::with_constraints(10, 5, 2.0);
  const int draws = 10000;
  const Stream root(2024);
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < draws; ++s) {
    RandomSource rng(root.child("count", static_cast<std::uint64_t>(s)));
    const double c = static_cast<double>(sample_instance(params, rng).active_count());
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / draws;
  const double var = (sum2 - draws * mean * mean) / (draws - 1);
  const double n = 50.0, q = 0.2;
  const double true_mean = n * q;              // M·γ = 10
  const double true_var = n * q * (1.0 - q);   // 8
  CHECK(std::abs(mean - true_mean) < 3.0 * std::sqrt(true_var / draws));
  // Var of the sample variance for a binomial: (μ4 − σ⁴(n−3)/(n−1)) / n_draws
  const double mu4 = n * q * (1 - q) * (1 + 3 * (n - 2) * q * (1 - q));
  const double var_se = std::sqrt((mu4 - true_var * true_var * (draws - 3.0) / (draws - 1.0)) / draws);
  CHECK(std::abs(var - true_var) < 3.0 * var_se);
}

TEST_CASE("instance weights are standard Gaussian") {
  const auto params = ModelParams::make(20, 0.5, 4.0);
  RandomSource rng(11);
  double s = 0.0, s2 = 0.0;
  int n = 0;
  for (int r = 0; r < 2000; ++r)
    for (const auto& row : sample_instance(params, rng).constraints)
      for (const auto& c : row) {
        s += c.weight;
        s2 += c.weight * c.weight;
        ++n;
      }
  CHECK(n > 1000);
  CHECK(std::abs(s / n) < 3.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("hamiltonian examples") {
  const auto u = BoundedPotential::scaled_tanh(0.8, 1.3);
  SUBCASE("zero potential") {
    RandomSource rng(5);
    const auto inst = sample_instance(ModelParams::make(8, 0.5, 2.0), rng);
    const std::vector<int> sigma{1, -1, 1, 1, -1, -1, 1, -1};
    CHECK(hamiltonian_value(inst, BoundedPotential::zero(), sigma) == 0.0);
  }
  SUBCASE("no active couplings gives M u(0)") {
    const auto inst = empty_instance(6, 3);
    const std::vector<int> sigma{1, 1, -1, 1, -1, 1};
    const auto bump = BoundedPotential::gaussian_bump(0.6, 1.0);
    CHECK(hamiltonian_value(inst, bump, sigma) == doctest::Approx(3 * 0.6));
  }
  SUBCASE("single constraint on two sites") {
    auto inst = empty_instance(5, 2);
    const double g1 = 0.37, g2 = -1.21;
    inst.constraints[0] = {{0, g1}, {1, g2}};
    for (int s1 : {-1, 1})
      for (int s2 : {-1, 1}) {
        const std::vector<int> sigma{s1, s2, 1, -1, 1};
        CHECK(hamiltonian_value(inst, u, sigma) ==
              doctest::Approx(u(g1 * s1 + g2 * s2) + u(0.0)).epsilon(1e-15));
      }
  }
  SUBCASE("shape mismatch") {
    const auto inst = empty_instance(4, 2);
    const std::vector<int> sigma{1, 1};
    CHECK_THROWS_AS((void)hamiltonian_value(inst, u, sigma), ParameterError);
  }
}

TEST_CASE("hamiltonian bound and eta masking") {
  const auto u = BoundedPotential::smooth_step(-0.9, 2.5);
  const Stream root(77);
  for (int r = 0; r < 200; ++r) {
    RandomSource rng(root.child("inst", static_cast<std::uint64_t>(r)));
    auto inst = sample_instance(ModelParams::make(10, 0.4, 3.0), rng);
    std::vector<int> sigma(10);
    for (int& s : sigma) s = rng.bernoulli(0.5) ? 1 : -1;
    const double h = hamiltonian_value(inst, u, sigma);
    REQUIRE(std::abs(h) <= inst.params.M * u.sup_norm() + 1e-12);

    const std::size_t k = rng.index(static_cast<std::size_t>(inst.params.M));
    double arg = 0.0;
    for (const auto& c : inst.constraints[k]) arg += c.weight * sigma[static_cast<std::size_t>(c.site)];
    auto masked = inst;
    masked.params.eta[k] = 0;
    REQUIRE(h - hamiltonian_value(masked, u, sigma) == doctest::Approx(u(arg)).epsilon(1e-14));
  }
}

TEST_CASE("instance validation") {
  auto inst = empty_instance(4, 2);
  inst.constraints[0] = {{0, 1.0}, {0, 2.0}};
  CHECK_THROWS_AS(inst.validate(), ParameterError);
  inst.constraints[0] = {{4, 1.0}};
  CHECK_THROWS_AS(inst.validate(), ParameterError);
  inst.constraints[0] = {{1, NAN}};
  CHECK_THROWS_AS(inst.validate(), ParameterError);
}

TEST_CASE("instance JSON round-trip is exact") {
  RandomSource rng(123);
  const auto inst = sample_instance(ModelParams::make(14, 0.3, 2.0), rng);
  const std::string text = serialize_instance(inst);
  const auto back = parse_instance(text);
  CHECK(back.constraints == inst.constraints);
  CHECK(back.params.N == 14);
  CHECK(back.params.M == inst.params.M);
  CHECK(back.params.eta == inst.params.eta);
  CHECK(serialize_instance(back) == text);
  CHECK_THROWS_AS(parse_instance("{\"N\": 3"), ParameterError);
}

TEST_CASE("condition checks") {
  SUBCASE("zero potential passes with zero contraction") {
    const auto r = check_conditions(0.3, 2.0, BoundedPotential::zero());
    CHECK(r.e712_ok);
    CHECK(r.e750_ok);
    CHECK(r.contraction_factor == 0.0);
  }
  SUBCASE("gamma0 = 0") {
    const auto r = check_conditions(0.3, 0.0, BoundedPotential::scaled_tanh(2.0, 1.0));
    CHECK(r.e712_lhs == 0.0);
    CHECK(r.e750_lhs == 0.0);
    CHECK(r.e712_ok);
    CHECK(r.e750_ok);
  }
  SUBCASE("alpha 0.1, gamma0 1, U 0.2") {
    const auto r = check_conditions(0.1, 1.0, BoundedPotential::scaled_tanh(0.2, 1.0));
    CHECK(r.contraction_factor == doctest::Approx(2 * 0.2 * std::exp(0.4) * 0.1));
    CHECK(r.contraction_factor == doctest::Approx(0.0597).epsilon(1e-3));
    CHECK(r.e750_ok);
    const double U = 0.2, a = 0.1, g = 1.0, e4 = std::exp(4 * U);
    const double lhs = 4 * U * a * g * g * e4 * std::exp(a * g * (e4 - 1)) *
                        (3 + 2 * g + a * (g * g + g * g * g) * e4);
    CHECK(r.e712_lhs == doctest::Approx(lhs));
    CHECK(r.e754_magnitude == doctest::Approx(a * U * std::exp(2 * U)));
  }
  SUBCASE("uniqueness condition implies contraction factor below one half") {
    RandomSource rng(8);
    for (int i = 0; i < 1000; ++i) {
      const double alpha = 0.01 + 0.98 * rng.uniform();
      const double gamma0 = 3.0 * rng.uniform();
      const auto u = BoundedPotential::scaled_tanh(2.0 * rng.uniform(), 1.0);
      const auto r = check_conditions(alpha, gamma0, u);
      if (r.e750_ok) REQUIRE(r.contraction_factor < 0.5);
    }
  }
  CHECK_THROWS_AS(check_conditions(1.5, 1.0, BoundedPotential::zero()), ParameterError);
}
