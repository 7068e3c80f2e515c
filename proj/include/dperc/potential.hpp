#pragma once

#include <string>
#include <string_view>

namespace dperc {

/// The bounded interaction u applied to each constraint's weighted spin sum.
///
/// A closed family, so the sup-norm U∞ that every high-temperature bound is
/// written in terms of is always known in closed form.
///
/// Descriptor syntax (used by the CLI and all file formats):
///   zero | const:c | tanh:a:b | bump:a:w | step:a:k
/// for u ≡ 0, u ≡ c, a·tanh(b·x), a·exp(−x²/w²), a/(1+exp(−k·x)).
class BoundedPotential {
 public:
  enum class Kind { Zero, Constant, ScaledTanh, GaussianBump, SmoothStep };

  BoundedPotential() = default;

  static BoundedPotential zero();
  static BoundedPotential constant(double c);
  static BoundedPotential scaled_tanh(double a, double b);
  static BoundedPotential gaussian_bump(double a, double width);
  static BoundedPotential smooth_step(double a, double steepness);

  /// Throws ParameterError on malformed descriptors.
  static BoundedPotential parse(std::string_view descriptor);

  [[nodiscard]] std::string descriptor() const;

  [[nodiscard]] double operator()(double x) const noexcept;

  /// U∞ = sup |u(x)|.
  [[nodiscard]] double sup_norm() const noexcept;

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double amplitude() const noexcept { return a_; }
  [[nodiscard]] double shape() const noexcept { return b_; }

  /// u(−x) = u(x) for all x.
  [[nodiscard]] bool is_even() const noexcept;

  friend bool operator==(const BoundedPotential&, const BoundedPotential&) = default;

 private:
  BoundedPotential(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  Kind kind_ = Kind::Zero;
  double a_ = 0.0;
  double b_ = 0.0;
};

}  // namespace dperc
