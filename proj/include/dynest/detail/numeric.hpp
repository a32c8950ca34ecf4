#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <system_error>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace dynest::detail {

/// Largest dimension supported by the point-wise kernel machinery.
inline constexpr std::size_t kMaxDim = 4;

/// Neumaier compensated summation.
class CompensatedSum {
public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Adaptive Gauss-Kronrod integral of a scalar function on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, unsigned max_depth = 18) {
  if (!(a < b)) {
    return 0.0;
  }
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, tol);
}

/// Integral over an axis-aligned box in dimension 1 or 2 (nested 1-D rules).
inline double integrate_box(const std::function<double(std::span<const double>)>& f,
                            std::span<const double> lo, std::span<const double> hi,
                            double tol = 1e-12) {
  if (lo.size() == 1) {
    return integrate(
        [&](double x) {
          const std::array<double, 1> p{x};
          return f(p);
        },
        lo[0], hi[0], tol);
  }
  if (lo.size() == 2) {
    return integrate(
        [&](double y) {
          return integrate(
              [&](double x) {
                const std::array<double, 2> p{x, y};
                return f(p);
              },
              lo[0], hi[0], tol, 12);
        },
        lo[1], hi[1], tol, 12);
  }
  throw std::invalid_argument("integrate_box: only dimensions 1 and 2 are supported");
}

/// Shortest round-trip decimal representation; platform independent.
inline std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf.data(), end);
}

/// Strict full-string double parse.
inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  if (!s.empty() && s.front() == '+') {
    s.remove_prefix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Parses "p/q" fractions as well as plain decimals.
inline double parse_real(std::string_view s) {
  const auto slash = s.find('/');
  if (slash == std::string_view::npos) {
    return parse_double(s);
  }
  const double num = parse_double(s.substr(0, slash));
  const double den = parse_double(s.substr(slash + 1));
  if (den == 0.0) {
    throw std::invalid_argument("zero denominator in '" + std::string(s) + "'");
  }
  return num / den;
}

inline double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

}  // namespace dynest::detail
