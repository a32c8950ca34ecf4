#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynest/detail/numeric.hpp"

namespace dynest {

/// Axis-aligned box [lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}].
class Box {
public:
  Box(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.empty() || lo_.size() != hi_.size()) {
      throw std::invalid_argument("box endpoints must be non-empty and of equal dimension");
    }
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      if (!(lo_[j] < hi_[j])) {
        throw std::invalid_argument("box needs lo < hi in every coordinate");
      }
    }
  }

  static Box interval(double a, double b) { return Box({a}, {b}); }
  static Box unit(std::size_t d) { return Box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)); }

  std::size_t dimension() const { return lo_.size(); }
  std::span<const double> lo() const { return lo_; }
  std::span<const double> hi() const { return hi_; }
  double lo(std::size_t j) const { return lo_[j]; }
  double hi(std::size_t j) const { return hi_[j]; }
  double width(std::size_t j) const { return hi_[j] - lo_[j]; }

  double volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      v *= width(j);
    }
    return v;
  }

  bool contains(std::span<const double> x, double tol = 0.0) const {
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      if (x[j] < lo_[j] - tol || x[j] > hi_[j] + tol) {
        return false;
      }
    }
    return true;
  }

  /// Sup-norm distance from x to the box (0 inside).
  double excess(std::span<const double> x) const {
    double e = 0.0;
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      e = std::max({e, lo_[j] - x[j], x[j] - hi_[j]});
    }
    return e;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t j = 0; j < lo_.size(); ++j) {
      if (j) s += 'x';
      s += "[" + detail::format_double(lo_[j]) + "," + detail::format_double(hi_[j]) + "]";
    }
    return s;
  }

private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// A flat, row-major list of points in R^d.
class PointSet {
public:
  PointSet() = default;
  explicit PointSet(std::size_t dim, std::size_t count = 0) : dim_(dim), coords_(dim * count, 0.0) {
    if (dim_ == 0) {
      throw std::invalid_argument("point dimension must be positive");
    }
  }
  PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ == 0 || coords_.size() % dim_ != 0) {
      throw std::invalid_argument("coordinate count is not a multiple of the dimension");
    }
  }

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return coords_.empty(); }

  std::span<const double> operator[](std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  std::span<double> operator[](std::size_t i) { return {coords_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> p) {
    if (p.size() != dim_) {
      throw std::invalid_argument("point dimension mismatch");
    }
    coords_.insert(coords_.end(), p.begin(), p.end());
  }

  /// Coordinate j of every point.
  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = coords_[i * dim_ + j];
    }
    return out;
  }

  const std::vector<double>& raw() const { return coords_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

private:
  std::size_t dim_ = 1;
  std::vector<double> coords_;
};

/// Cell-centred grid: p points per axis, x_k = lo + (k + 1/2)(hi - lo)/p.
/// In d = 2 the first coordinate varies fastest.
inline PointSet make_grid(const Box& box, std::size_t p) {
  if (p == 0) {
    throw std::invalid_argument("grid needs at least one point per axis");
  }
  const std::size_t d = box.dimension();
  auto axis = [&](std::size_t j, std::size_t k) {
    return box.lo(j) + (static_cast<double>(k) + 0.5) * box.width(j) / static_cast<double>(p);
  };
  if (d == 1) {
    PointSet out(1, p);
    for (std::size_t k = 0; k < p; ++k) {
      out[k][0] = axis(0, k);
    }
    return out;
  }
  if (d == 2) {
    PointSet out(2, p * p);
    for (std::size_t b = 0; b < p; ++b) {
      for (std::size_t a = 0; a < p; ++a) {
        auto pt = out[b * p + a];
        pt[0] = axis(0, a);
        pt[1] = axis(1, b);
      }
    }
    return out;
  }
  throw std::invalid_argument("grids are supported in dimension 1 and 2 only");
}

}  // namespace dynest
