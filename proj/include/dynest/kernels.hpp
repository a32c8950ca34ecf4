#pragma once

// Compactly supported, nonnegative, unit-mass smoothing kernels together
// with the semi-norm metadata used by the deviation envelopes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynest/detail/numeric.hpp"

namespace dynest {

/// Semi-norm C(.) attached to the function space a kernel is measured in.
class SeminormFamily {
public:
  enum class Kind { bounded_variation, lipschitz, holder };

  static SeminormFamily bounded_variation() { return SeminormFamily(Kind::bounded_variation, 0.0); }
  static SeminormFamily lipschitz() { return SeminormFamily(Kind::lipschitz, 1.0); }
  static SeminormFamily holder(double exponent) {
    if (!(exponent > 0.0 && exponent <= 1.0)) {
      throw std::invalid_argument("Holder exponent must lie in (0, 1]");
    }
    return SeminormFamily(Kind::holder, exponent);
  }

  Kind kind() const { return kind_; }
  double exponent() const { return exponent_; }

  /// Exponent beta in C(K_{h,x}) <= C(K) / h^beta.
  double scaling_exponent() const { return exponent_; }

  std::string name() const {
    switch (kind_) {
      case Kind::bounded_variation: return "bounded_variation";
      case Kind::lipschitz: return "lipschitz";
      case Kind::holder: return "holder(" + detail::format_double(exponent_) + ")";
    }
    return "unknown";
  }

private:
  SeminormFamily(Kind k, double e) : kind_(k), exponent_(e) {}
  Kind kind_;
  double exponent_;
};

/// An admissible kernel K on R^d.
///
/// The profile is only ever evaluated inside the sup-norm ball of radius
/// support_diameter / 2; outside of it the kernel is zero by construction.
/// Immutable after construction.
class Kernel {
public:
  using Profile = std::function<double(std::span<const double>)>;

  /// Builds a kernel and numerically checks its unit mass.
  /// Throws std::invalid_argument when |mass - 1| > 1e-6.
  Kernel(std::string name, std::size_t dimension, Profile profile, double support_diameter,
         double seminorm_constant, SeminormFamily family)
      : name_(std::move(name)),
        dimension_(dimension),
        profile_(std::move(profile)),
        support_diameter_(support_diameter),
        seminorm_constant_(seminorm_constant),
        family_(family) {
    if (dimension_ == 0 || dimension_ > 2) {
      throw std::invalid_argument("kernel dimension must be 1 or 2");
    }
    if (!(support_diameter_ > 0.0) || !std::isfinite(support_diameter_)) {
      throw std::invalid_argument("kernel support diameter must be positive");
    }
    if (!(seminorm_constant_ >= 0.0)) {
      throw std::invalid_argument("kernel semi-norm constant C(K) must be nonnegative");
    }
    const double r = radius();
    const std::vector<double> lo(dimension_, -r);
    const std::vector<double> hi(dimension_, r);
    integral_check_ = detail::integrate_box([this](std::span<const double> z) { return (*this)(z); },
                                            lo, hi, 1e-13);
    if (std::abs(integral_check_ - 1.0) > 1e-6) {
      throw std::invalid_argument("kernel '" + name_ + "' does not have unit mass (integral = " +
                                  detail::format_double(integral_check_) + ")");
    }
  }

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return dimension_; }
  double support_diameter() const { return support_diameter_; }
  double radius() const { return 0.5 * support_diameter_; }
  double seminorm_constant() const { return seminorm_constant_; }
  const SeminormFamily& family() const { return family_; }
  double scaling_exponent() const { return family_.scaling_exponent(); }
  double integral_check() const { return integral_check_; }

  /// The deviation theory asks for beta < 1; Lipschitz kernels (beta = 1) are
  /// accepted but flagged.
  std::optional<std::string> warning() const {
    if (scaling_exponent() >= 1.0) {
      return "kernel '" + name_ + "' has scaling exponent beta = " +
             detail::format_double(scaling_exponent()) + " >= 1";
    }
    return std::nullopt;
  }

  /// K(z); zero outside the support.
  double operator()(std::span<const double> z) const {
    if (detail::sup_norm(z) > radius()) {
      return 0.0;
    }
    return profile_(z);
  }

  /// K((x - t) / h), coordinatewise scaling.
  double eval_scaled(std::span<const double> x, std::span<const double> t, double h) const {
    if (!(h > 0.0)) {
      throw std::invalid_argument("bandwidth h must be positive");
    }
    if (x.size() != dimension_ || t.size() != dimension_) {
      throw std::invalid_argument("eval_scaled: dimension mismatch");
    }
    return eval_scaled_unchecked(x, t, h);
  }

  /// Hot-path variant of eval_scaled without argument validation.
  double eval_scaled_unchecked(std::span<const double> x, std::span<const double> t,
                               double h) const {
    std::array<double, detail::kMaxDim> z{};
    const double r = radius();
    for (std::size_t j = 0; j < dimension_; ++j) {
      z[j] = (x[j] - t[j]) / h;
      if (std::abs(z[j]) > r) {
        return 0.0;
      }
    }
    return profile_(std::span<const double>(z.data(), dimension_));
  }

  /// C(K) / h^beta.
  double scaled_seminorm_bound(double h) const {
    if (!(h > 0.0)) {
      throw std::invalid_argument("bandwidth h must be positive");
    }
    return seminorm_constant_ / std::pow(h, scaling_exponent());
  }

private:
  std::string name_;
  std::size_t dimension_;
  Profile profile_;
  double support_diameter_;
  double seminorm_constant_;
  SeminormFamily family_;
  double integral_check_ = 0.0;
};

/// Epanechnikov kernel (3/4)(1 - x^2) on [-1, 1]. Lipschitz with C(K) = 3/2.
inline Kernel make_epanechnikov() {
  return Kernel(
      "epanechnikov", 1,
      [](std::span<const double> z) { return 0.75 * (1.0 - z[0] * z[0]); }, 2.0, 1.5,
      SeminormFamily::lipschitz());
}

/// Box kernels: d = 1 is the indicator of [-1/2, 1/2] (total variation 2);
/// d = 2 is (1/4) times the indicator of [-1, 1]^2 (perimeter 8 times height 1/4).
inline Kernel make_box(std::size_t d) {
  if (d == 1) {
    return Kernel(
        "box1d", 1, [](std::span<const double>) { return 1.0; }, 1.0, 2.0,
        SeminormFamily::bounded_variation());
  }
  if (d == 2) {
    return Kernel(
        "box2d", 2, [](std::span<const double>) { return 0.25; }, 2.0, 2.0,
        SeminormFamily::bounded_variation());
  }
  throw std::invalid_argument("box kernel dimension must be 1 or 2");
}

/// "epanechnikov" | "box1d" | "box2d".
inline Kernel make_kernel(const std::string& id) {
  if (id == "epanechnikov") {
    return make_epanechnikov();
  }
  if (id == "box1d") {
    return make_box(1);
  }
  if (id == "box2d") {
    return make_box(2);
  }
  throw std::invalid_argument("unknown kernel '" + id + "' (expected epanechnikov | box1d | box2d)");
}

inline double eval_scaled(const Kernel& k, std::span<const double> x, std::span<const double> t,
                          double h) {
  return k.eval_scaled(x, t, h);
}

inline double scaled_seminorm_bound(const Kernel& k, double h) {
  return k.scaled_seminorm_bound(h);
}

}  // namespace dynest
