#include "dperc/potential.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "dperc/errors.hpp"
#include "dperc/stats.hpp"

namespace dperc {
namespace {

void require_finite(double v, std::string_view what) {
  if (!std::isfinite(v))
    throw ParameterError("potential parameter " + std::string(what) + " must be finite");
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(const std::string& token, std::string_view descriptor) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != token.size())
    throw ParameterError("bad number '" + token + "' in potential descriptor '" +
                         std::string(descriptor) + "'");
  return v;
}

}  // namespace

BoundedPotential BoundedPotential::zero() { return {Kind::Zero, 0.0, 0.0}; }

BoundedPotential BoundedPotential::constant(double c) {
  require_finite(c, "c");
  return {Kind::Constant, c, 0.0};
}

BoundedPotential BoundedPotential::scaled_tanh(double a, double b) {
  require_finite(a, "a");
  require_finite(b, "b");
  return {Kind::ScaledTanh, a, b};
}

BoundedPotential BoundedPotential::gaussian_bump(double a, double width) {
  require_finite(a, "a");
  require_finite(width, "w");
  if (!(width > 0.0)) throw ParameterError("gaussian bump width must be > 0");
  return {Kind::GaussianBump, a, width};
}

BoundedPotential BoundedPotential::smooth_step(double a, double steepness) {
  require_finite(a, "a");
  require_finite(steepness, "k");
  return {Kind::SmoothStep, a, steepness};
}

BoundedPotential BoundedPotential::parse(std::string_view descriptor) {
  const auto parts = split(descriptor, ':');
  const std::string& name = parts.front();
  auto args = [&](std::size_t expected) {
    if (parts.size() != expected + 1)
      throw ParameterError("potential '" + name + "' takes " + std::to_string(expected) +
                           " argument(s): '" + std::string(descriptor) + "'");
    std::vector<double> v;
    for (std::size_t i = 1; i < parts.size(); ++i) v.push_back(parse_number(parts[i], descriptor));
    return v;
  };
  if (name == "zero") {
    args(0);
    return zero();
  }
  if (name == "const") return constant(args(1)[0]);
  if (name == "tanh") {
    const auto v = args(2);
    return scaled_tanh(v[0], v[1]);
  }
  if (name == "bump") {
    const auto v = args(2);
    return gaussian_bump(v[0], v[1]);
  }
  if (name == "step") {
    const auto v = args(2);
    return smooth_step(v[0], v[1]);
  }
  throw ParameterError("unknown potential kind '" + name +
                       "' (expected zero, const, tanh, bump or step)");
}

std::string BoundedPotential::descriptor() const {
  switch (kind_) {
    case Kind::Zero:
      return "zero";
    case Kind::Constant:
      return "const:" + format_double(a_);
    case Kind::ScaledTanh:
      return "tanh:" + format_double(a_) + ":" + format_double(b_);
    case Kind::GaussianBump:
      return "bump:" + format_double(a_) + ":" + format_double(b_);
    case Kind::SmoothStep:
      return "step:" + format_double(a_) + ":" + format_double(b_);
  }
  return "zero";
}

double BoundedPotential::operator()(double x) const noexcept {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return a_;
    case Kind::ScaledTanh:
      return a_ * std::tanh(b_ * x);
    case Kind::GaussianBump: {
      const double z = x / b_;
      return a_ * std::exp(-z * z);
    }
    case Kind::SmoothStep:
      return a_ / (1.0 + std::exp(-b_ * x));
  }
  return 0.0;
}

double BoundedPotential::sup_norm() const noexcept {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
    case Kind::GaussianBump:
      return std::abs(a_);
    case Kind::ScaledTanh:
      return b_ == 0.0 ? 0.0 : std::abs(a_);
    case Kind::SmoothStep:
      // Range is (0, a) unless the step is flat, where u ≡ a/2.
      return b_ == 0.0 ? std::abs(a_) / 2.0 : std::abs(a_);
  }
  return 0.0;
}

bool BoundedPotential::is_even() const noexcept {
  switch (kind_) {
    case Kind::Zero:
    case Kind::Constant:
    case Kind::GaussianBump:
      return true;
    case Kind::ScaledTanh:
      return a_ == 0.0 || b_ == 0.0;
    case Kind::SmoothStep:
      return a_ == 0.0 || b_ == 0.0;
  }
  return false;
}

}  // namespace dperc
