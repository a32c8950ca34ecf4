#pragma once

// Kernel density estimator, Nadaraya-Watson regression and the coordinatewise
// map estimator, evaluated on point sets.
//
//   f_n(x) = 1/(n h^d) sum_{i<n}   K((x - X_i)/h)
//   g_n(x) = 1/(n h^d) sum_{i<n-1} Y_i K((x - X_i)/h)
//   r_n(x) = g_n(x) / f_n'(x)  (0 where the denominator vanishes)
//
// f_n' is f_n restricted to the n - 1 states that have a target, so a
// constant response is reproduced exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynest/detail/numeric.hpp"
#include "dynest/dynamics.hpp"
#include "dynest/kernels.hpp"
#include "dynest/points.hpp"
#include "dynest/regularity.hpp"

namespace dynest {

enum class Evaluation {
  direct,    // every sample for every point
  windowed,  // samples sorted on the first coordinate, binary-searched window
};

/// Kernel sums at one point.
struct PointEstimate {
  double f = 0.0;          // density estimate
  double denominator = 0;  // sum over the first n - 1 states, same scaling as f
  std::array<double, detail::kMaxDim> r{};  // regression per coordinate
};

/// Precomputed evaluator for one (trajectory, kernel, h).
class KernelEstimator {
public:
  KernelEstimator(const Trajectory& traj, Kernel kernel, double h, Evaluation mode = Evaluation::windowed)
      : kernel_(std::move(kernel)), h_(h), mode_(mode), d_(traj.dimension), n_(traj.size()) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw std::invalid_argument("bandwidth h must be positive and finite");
    }
    if (n_ == 0) {
      throw std::invalid_argument("trajectory is empty");
    }
    if (kernel_.dimension() != d_) {
      throw std::invalid_argument("kernel dimension " + std::to_string(kernel_.dimension()) +
                                  " does not match trajectory dimension " + std::to_string(d_));
    }
    has_targets_ = traj.targets.size() == (n_ - 1) * d_ && n_ >= 2;
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (mode_ == Evaluation::windowed) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return traj.states[a * d_] < traj.states[b * d_];
      });
    }
    x_.resize(n_ * d_);
    y_.assign(n_ * d_, 0.0);
    has_y_.assign(n_, 0);
    key_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i = order[k];
      std::copy_n(traj.states.begin() + static_cast<std::ptrdiff_t>(i * d_), d_, x_.begin() + static_cast<std::ptrdiff_t>(k * d_));
      key_[k] = x_[k * d_];
      if (has_targets_ && i + 1 < n_) {
        std::copy_n(traj.targets.begin() + static_cast<std::ptrdiff_t>(i * d_), d_, y_.begin() + static_cast<std::ptrdiff_t>(k * d_));
        has_y_[k] = 1;
      }
    }
    scale_ = 1.0 / (static_cast<double>(n_) * std::pow(h_, static_cast<double>(d_)));
  }

  std::size_t dimension() const { return d_; }
  std::size_t size() const { return n_; }
  double bandwidth() const { return h_; }
  const Kernel& kernel() const { return kernel_; }
  bool has_targets() const { return has_targets_; }

  PointEstimate evaluate(std::span<const double> x) const {
    if (x.size() != d_) {
      throw std::invalid_argument("evaluation point dimension mismatch");
    }
    std::size_t first = 0;
    std::size_t last = n_;
    if (mode_ == Evaluation::windowed) {
      // Slightly widened so the window never drops a sample the kernel keeps.
      const double reach = kernel_.radius() * h_ * (1.0 + 1e-9) + 1e-300;
      first = static_cast<std::size_t>(std::lower_bound(key_.begin(), key_.end(), x[0] - reach) - key_.begin());
      last = static_cast<std::size_t>(std::upper_bound(key_.begin(), key_.end(), x[0] + reach) - key_.begin());
    }
    // Targets are summed as offsets from the first contributing one, so a
    // constant response comes back exactly.
    double s0 = 0.0;
    double s1 = 0.0;
    bool anchored = false;
    std::array<double, detail::kMaxDim> anchor{};
    std::array<double, detail::kMaxDim> sy{};
    std::array<double, detail::kMaxDim> lo{};
    std::array<double, detail::kMaxDim> hi{};
    for (std::size_t k = first; k < last; ++k) {
      std::span<const double> xi(x_.data() + k * d_, d_);
      const double w = kernel_.eval_scaled_unchecked(x, xi, h_);
      if (w == 0.0) continue;
      s0 += w;
      if (has_y_[k]) {
        s1 += w;
        for (std::size_t j = 0; j < d_; ++j) {
          const double y = y_[k * d_ + j];
          if (!anchored) {
            anchor[j] = lo[j] = hi[j] = y;
          }
          lo[j] = std::min(lo[j], y);
          hi[j] = std::max(hi[j], y);
          sy[j] += w * (y - anchor[j]);
        }
        anchored = true;
      }
    }
    PointEstimate e;
    e.f = s0 * scale_;
    e.denominator = s1 * scale_;
    if (s1 > 0.0) {
      for (std::size_t j = 0; j < d_; ++j) {
        e.r[j] = std::clamp(anchor[j] + sy[j] / s1, lo[j], hi[j]);
      }
    }
    return e;
  }

  /// Regression for one coordinate, recomputing the weights.
  double regression(std::span<const double> x, std::size_t j) const {
    if (j >= d_) {
      throw std::invalid_argument("coordinate index out of range");
    }
    return evaluate(x).r[j];
  }

private:
  Kernel kernel_;
  double h_;
  Evaluation mode_;
  std::size_t d_;
  std::size_t n_;
  bool has_targets_ = false;
  double scale_ = 1.0;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<char> has_y_;
  std::vector<double> key_;
};

namespace detail {

inline void check_points(const Trajectory& traj, const PointSet& points) {
  if (points.dimension() != traj.dimension) {
    throw std::invalid_argument("grid dimension does not match trajectory dimension");
  }
}

inline void check_regression(const Trajectory& traj) {
  if (traj.size() < 2) {
    throw std::invalid_argument("regression needs n >= 2");
  }
  if (traj.targets.size() != (traj.size() - 1) * traj.dimension) {
    throw std::invalid_argument("trajectory targets must have length n - 1");
  }
}

}  // namespace detail

inline std::vector<double> density_estimate(const Trajectory& traj, const Kernel& k, double h,
                                            const PointSet& points, Evaluation mode = Evaluation::windowed) {
  detail::check_points(traj, points);
  const KernelEstimator est(traj, k, h, mode);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = est.evaluate(points[i]).f;
  }
  return out;
}

inline std::vector<double> regression_estimate(const Trajectory& traj, const Kernel& k, double h,
                                               const PointSet& points, std::size_t coordinate,
                                               Evaluation mode = Evaluation::windowed) {
  detail::check_points(traj, points);
  detail::check_regression(traj);
  if (coordinate >= traj.dimension) {
    throw std::invalid_argument("coordinate index out of range");
  }
  const KernelEstimator est(traj, k, h, mode);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = est.evaluate(points[i]).r[coordinate];
  }
  return out;
}

/// T_n at every point, flattened point-major (p * d values). One pass.
inline std::vector<double> map_estimate(const Trajectory& traj, const Kernel& k, double h, const PointSet& points,
                                        Evaluation mode = Evaluation::windowed) {
  detail::check_points(traj, points);
  detail::check_regression(traj);
  const std::size_t d = traj.dimension;
  const KernelEstimator est(traj, k, h, mode);
  std::vector<double> out(points.size() * d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto e = est.evaluate(points[i]);
    std::copy_n(e.r.begin(), d, out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return out;
}

/// Same as map_estimate, one full pass per coordinate.
inline std::vector<double> map_estimate_two_pass(const Trajectory& traj, const Kernel& k, double h,
                                                 const PointSet& points, Evaluation mode = Evaluation::windowed) {
  const std::size_t d = traj.dimension;
  std::vector<double> out(points.size() * d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = regression_estimate(traj, k, h, points, j, mode);
    for (std::size_t i = 0; i < points.size(); ++i) {
      out[i * d + j] = col[i];
    }
  }
  return out;
}

struct EstimateGrid {
  PointSet points;
  double h = 0.0;
  std::vector<double> f_hat;
  std::vector<double> t_hat;   // p * d, empty when not estimated
  std::vector<double> f_true;  // empty without a density oracle
  std::vector<double> t_true;  // p * d, empty without a system
  std::size_t n_used = 0;      // samples behind the regression

  std::size_t size() const { return points.size(); }
  std::size_t dimension() const { return points.dimension(); }
};

/// f_n and T_n on `points`, with truths from `sys` when given.
inline EstimateGrid estimate_on_grid(const Trajectory& traj, const Kernel& k, double h, const PointSet& points,
                                     const DynamicalSystem* sys = nullptr, Evaluation mode = Evaluation::windowed) {
  detail::check_points(traj, points);
  const std::size_t d = traj.dimension;
  const KernelEstimator est(traj, k, h, mode);
  EstimateGrid g;
  g.points = points;
  g.h = h;
  g.f_hat.resize(points.size());
  if (est.has_targets()) {
    g.t_hat.resize(points.size() * d);
    g.n_used = traj.size() - 1;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto e = est.evaluate(points[i]);
    g.f_hat[i] = e.f;
    if (est.has_targets()) {
      std::copy_n(e.r.begin(), d, g.t_hat.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  }
  if (sys != nullptr) {
    if (sys->dimension() != d) {
      throw std::invalid_argument("system dimension does not match trajectory");
    }
    if (sys->has_density()) {
      g.f_true.resize(points.size());
      for (std::size_t i = 0; i < points.size(); ++i) {
        g.f_true[i] = sys->density(points[i]);
      }
    }
    g.t_true.resize(points.size() * d);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sys->apply(points[i], std::span<double>(g.t_true.data() + i * d, d));
    }
  }
  return g;
}

/// (1/p) sum |estimate - truth|.
inline double ame(std::span<const double> estimates, std::span<const double> truths) {
  if (estimates.size() != truths.size()) {
    throw std::invalid_argument("ame: length mismatch");
  }
  if (estimates.empty()) {
    throw std::invalid_argument("ame: empty input");
  }
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    s.add(std::abs(estimates[i] - truths[i]));
  }
  return s.value() / static_cast<double>(estimates.size());
}

struct VectorAme {
  std::vector<double> per_coordinate;
  double sup = 0.0;  // mean over points of the sup-norm error
};

/// AME of point-major vector values with d coordinates.
inline VectorAme ame_vector(std::span<const double> estimates, std::span<const double> truths, std::size_t d) {
  if (d == 0 || estimates.size() != truths.size() || estimates.size() % d != 0) {
    throw std::invalid_argument("ame_vector: length mismatch");
  }
  if (estimates.empty()) {
    throw std::invalid_argument("ame_vector: empty input");
  }
  const std::size_t p = estimates.size() / d;
  VectorAme out;
  out.per_coordinate.assign(d, 0.0);
  std::vector<detail::CompensatedSum> col(d);
  detail::CompensatedSum sup;
  for (std::size_t i = 0; i < p; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = std::abs(estimates[i * d + j] - truths[i * d + j]);
      col[j].add(e);
      m = std::max(m, e);
    }
    sup.add(m);
  }
  for (std::size_t j = 0; j < d; ++j) {
    out.per_coordinate[j] = col[j].value() / static_cast<double>(p);
  }
  out.sup = sup.value() / static_cast<double>(p);
  return out;
}

struct BiasCheck {
  std::vector<double> expected;  // E f_n(x) = int K(y) f(x - h y) dy
  std::vector<double> truth;
  std::vector<char> pass;        // |E f_n - f| <= u^alpha
  std::vector<std::size_t> failures;
  BadSetReport bad_set;          // scan of B_f(u, h diam D)
  bool failures_confined = true;  // every failure within one scan cell of the bad set
};

/// Deterministic bias diagnostic against the density oracle of `sys`.
inline BiasCheck bias_bound_check(const DynamicalSystem& sys, const Kernel& k, double h, double u, double alpha,
                                  const PointSet& points) {
  if (!sys.has_density()) {
    throw std::invalid_argument("bias_bound_check needs a density oracle");
  }
  if (!(h > 0.0)) {
    throw std::invalid_argument("bandwidth h must be positive");
  }
  const double reach = h * k.support_diameter();
  if (u < reach) {
    throw std::invalid_argument("bias_bound_check: u = " + detail::format_double(u) + " is below h diam(D) = " +
                                detail::format_double(reach));
  }
  if (k.dimension() != sys.dimension() || points.dimension() != sys.dimension()) {
    throw std::invalid_argument("bias_bound_check: dimension mismatch");
  }
  const std::size_t d = sys.dimension();
  const double threshold = std::pow(u, alpha);
  const std::vector<double> lo(d, -k.radius());
  const std::vector<double> hi(d, k.radius());

  BiasCheck out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto x = points[i];
    const double e = detail::integrate_box(
        [&](std::span<const double> y) {
          std::array<double, detail::kMaxDim> z{};
          for (std::size_t j = 0; j < d; ++j) z[j] = x[j] - h * y[j];
          return k(y) * sys.density(std::span<const double>(z.data(), d));
        },
        lo, hi, 1e-10);
    const double f = sys.density(x);
    out.expected.push_back(e);
    out.truth.push_back(f);
    const bool ok = std::abs(e - f) <= threshold;
    out.pass.push_back(ok ? 1 : 0);
    if (!ok) out.failures.push_back(i);
  }

  // The density is zero outside the domain; scan a margin so that edge jumps count.
  std::vector<double> slo(d);
  std::vector<double> shi(d);
  for (std::size_t j = 0; j < d; ++j) {
    slo[j] = sys.domain().lo(j) - reach;
    shi[j] = sys.domain().hi(j) + reach;
  }
  const Box scan(slo, shi);
  out.bad_set = oscillation_bad_set([&sys](std::span<const double> x) { return sys.density(x); }, scan, u, reach,
                                    alpha, reach / 8.0, Threshold::condition);
  const double tol = *std::max_element(out.bad_set.resolution.begin(), out.bad_set.resolution.end());
  for (std::size_t i : out.failures) {
    const auto x = points[i];
    const bool near = std::any_of(out.bad_set.components.begin(), out.bad_set.components.end(),
                                  [&](const Box& c) { return c.contains(x, tol); });
    if (!near) {
      out.failures_confined = false;
      break;
    }
  }
  return out;
}

}  // namespace dynest
