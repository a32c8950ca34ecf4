#pragma once

// Oscillation bad sets B_g(u, h), total variation, and the bounded-variation
// bad-set bounds. All sets are grid approximations; every report carries the
// grid step it was computed at.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynest/detail/numeric.hpp"
#include "dynest/points.hpp"

namespace dynest {

using ScalarFn = std::function<double(std::span<const double>)>;
using VectorFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Piecewise-constant function on [a, b]: values[k] holds on
/// (breaks[k-1], breaks[k]) with breaks[-1] = a and breaks[m] = b.
struct StepFunction {
  double a = 0.0;
  double b = 1.0;
  std::vector<double> breaks;
  std::vector<double> values;  // breaks.size() + 1 entries

  double total_variation() const {
    double tv = 0.0;
    for (std::size_t k = 1; k < values.size(); ++k) {
      tv += std::abs(values[k] - values[k - 1]);
    }
    return tv;
  }
};

/// How the oscillation threshold is formed from (u, alpha).
enum class Threshold {
  condition,  // u^alpha, as in the regularity condition
  raw,        // u, as in the bounded-variation lemma
};

struct BadSetReport {
  double u = 0.0;
  double h = 0.0;
  double alpha = 1.0;
  double threshold = 0.0;
  std::vector<double> resolution;  // effective grid step per axis
  double measure_estimate = 0.0;
  double slack = 0.0;               // 2 * max step * component count
  std::vector<Box> components;      // disjoint
  std::size_t flagged_cells = 0;

  bool empty() const { return components.empty(); }

  bool contains(std::span<const double> x) const {
    return std::any_of(components.begin(), components.end(),
                       [&](const Box& c) { return c.contains(x); });
  }
};

namespace detail {

/// Sliding-window max (sign = +1) or min (sign = -1) over [i - m, i + m].
inline std::vector<double> sliding_extreme(std::span<const double> v, std::size_t m, double sign) {
  const std::size_t n = v.size();
  std::vector<double> out(n);
  std::deque<std::size_t> q;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t right = std::min(n - 1, i + m);
    while (next <= right) {
      while (!q.empty() && sign * v[q.back()] <= sign * v[next]) {
        q.pop_back();
      }
      q.push_back(next);
      ++next;
    }
    const std::size_t left = i >= m ? i - m : 0;
    while (q.front() < left) {
      q.pop_front();
    }
    out[i] = v[q.front()];
  }
  return out;
}

inline std::size_t window_half_width(double h, double step) {
  // Largest m with m * step < h.
  auto m = static_cast<std::size_t>(std::ceil(h / step));
  while (m > 0 && static_cast<double>(m) * step >= h) {
    --m;
  }
  return m;
}

}  // namespace detail

/// Grid scan of B_g(u, h) for g with `channels` output coordinates on a 1-D or
/// 2-D box. The oscillation at a cell centre is the sup-norm over channels of
/// max |g(x) - g(y)| for sampled y with |x - y|_inf < h.
inline BadSetReport oscillation_bad_set(const VectorFn& g, std::size_t channels, const Box& domain,
                                        double u, double h, double alpha, double resolution,
                                        Threshold mode = Threshold::condition) {
  if (!(u > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("oscillation_bad_set: u and h must be positive");
  }
  if (!(resolution > 0.0) || resolution > h / 4.0) {
    throw std::invalid_argument("oscillation_bad_set: resolution must be in (0, h/4]");
  }
  if (channels == 0) {
    throw std::invalid_argument("oscillation_bad_set: need at least one output channel");
  }
  const std::size_t d = domain.dimension();
  if (d > 2) {
    throw std::invalid_argument("oscillation_bad_set: dimension must be 1 or 2");
  }

  BadSetReport rep;
  rep.u = u;
  rep.h = h;
  rep.alpha = alpha;
  rep.threshold = mode == Threshold::condition ? std::pow(u, alpha) : u;

  std::vector<std::size_t> cells(d);
  std::vector<double> step(d);
  std::vector<std::size_t> half(d);
  for (std::size_t j = 0; j < d; ++j) {
    cells[j] = static_cast<std::size_t>(std::ceil(domain.width(j) / resolution - 1e-9));
    cells[j] = std::max<std::size_t>(cells[j], 1);
    step[j] = domain.width(j) / static_cast<double>(cells[j]);
    half[j] = detail::window_half_width(h, step[j]);
  }
  rep.resolution = step;
  const std::size_t nx = cells[0];
  const std::size_t ny = d == 2 ? cells[1] : 1;
  const std::size_t total = nx * ny;

  // Sample every channel at every cell centre.
  std::vector<std::vector<double>> samples(channels, std::vector<double>(total));
  {
    std::vector<double> x(d);
    std::vector<double> gx(channels);
    for (std::size_t b = 0; b < ny; ++b) {
      for (std::size_t a = 0; a < nx; ++a) {
        x[0] = domain.lo(0) + (static_cast<double>(a) + 0.5) * step[0];
        if (d == 2) {
          x[1] = domain.lo(1) + (static_cast<double>(b) + 0.5) * step[1];
        }
        g(x, gx);
        for (std::size_t c = 0; c < channels; ++c) {
          samples[c][b * nx + a] = gx[c];
        }
      }
    }
  }

  std::vector<double> osc(total, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const auto& v = samples[c];
    std::vector<double> mx(total);
    std::vector<double> mn(total);
    // Along the first axis, row by row.
    for (std::size_t b = 0; b < ny; ++b) {
      std::span<const double> row(v.data() + b * nx, nx);
      auto rmax = detail::sliding_extreme(row, half[0], 1.0);
      auto rmin = detail::sliding_extreme(row, half[0], -1.0);
      std::copy(rmax.begin(), rmax.end(), mx.begin() + static_cast<std::ptrdiff_t>(b * nx));
      std::copy(rmin.begin(), rmin.end(), mn.begin() + static_cast<std::ptrdiff_t>(b * nx));
    }
    if (d == 2) {
      std::vector<double> col(ny);
      for (std::size_t a = 0; a < nx; ++a) {
        for (std::size_t b = 0; b < ny; ++b) col[b] = mx[b * nx + a];
        auto cmax = detail::sliding_extreme(col, half[1], 1.0);
        for (std::size_t b = 0; b < ny; ++b) col[b] = mn[b * nx + a];
        auto cmin = detail::sliding_extreme(col, half[1], -1.0);
        for (std::size_t b = 0; b < ny; ++b) {
          mx[b * nx + a] = cmax[b];
          mn[b * nx + a] = cmin[b];
        }
      }
    }
    for (std::size_t i = 0; i < total; ++i) {
      osc[i] = std::max({osc[i], mx[i] - v[i], v[i] - mn[i]});
    }
  }

  // Merge flagged cells into runs along the first axis (one box per run).
  double max_step = *std::max_element(step.begin(), step.end());
  for (std::size_t b = 0; b < ny; ++b) {
    std::size_t a = 0;
    while (a < nx) {
      if (!(osc[b * nx + a] > rep.threshold)) {
        ++a;
        continue;
      }
      std::size_t end = a;
      while (end + 1 < nx && osc[b * nx + end + 1] > rep.threshold) {
        ++end;
      }
      std::vector<double> lo{domain.lo(0) + static_cast<double>(a) * step[0]};
      std::vector<double> hi{end + 1 == nx ? domain.hi(0)
                                           : domain.lo(0) + static_cast<double>(end + 1) * step[0]};
      if (d == 2) {
        lo.push_back(domain.lo(1) + static_cast<double>(b) * step[1]);
        hi.push_back(b + 1 == ny ? domain.hi(1) : domain.lo(1) + static_cast<double>(b + 1) * step[1]);
      }
      rep.components.emplace_back(std::move(lo), std::move(hi));
      rep.flagged_cells += end - a + 1;
      a = end + 1;
    }
  }
  double cell_volume = 1.0;
  for (double s : step) cell_volume *= s;
  rep.measure_estimate = std::min(static_cast<double>(rep.flagged_cells) * cell_volume, domain.volume());
  rep.slack = 2.0 * max_step * static_cast<double>(rep.components.size());
  return rep;
}

/// Scalar convenience overload.
inline BadSetReport oscillation_bad_set(const ScalarFn& g, const Box& domain, double u, double h,
                                        double alpha, double resolution,
                                        Threshold mode = Threshold::condition) {
  VectorFn wrapped = [&g](std::span<const double> x, std::span<double> out) { out[0] = g(x); };
  return oscillation_bad_set(wrapped, 1, domain, u, h, alpha, resolution, mode);
}

/// Variation of g along the subdivision a, a + r, a + 2r, ..., b.
/// Halving r refines the subdivision, so the result never decreases.
inline double total_variation(const std::function<double(double)>& g, double a, double b,
                              double resolution) {
  if (!(a < b)) {
    throw std::invalid_argument("total_variation: need a < b");
  }
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("total_variation: resolution must be positive");
  }
  detail::CompensatedSum tv;
  double prev = g(a);
  for (std::size_t i = 1;; ++i) {
    const double offset = static_cast<double>(i) * resolution;
    const bool last = !(offset < b - a);
    const double cur = g(last ? b : a + offset);
    tv.add(std::abs(cur - prev));
    prev = cur;
    if (last) break;
  }
  return tv.value();
}

/// Exact variation of a step function.
inline double total_variation(const StepFunction& f) { return f.total_variation(); }

struct BvBound {
  double b_set = 0.0;  // 3 V h^(alpha/2)
  double a_set = 0.0;  // 2 V h / u
};

/// Bounded-variation bad-set bounds for each (u_n, h_n).
/// Requires both sequences positive, nonincreasing, and h_n^(2-alpha) <= u_n^2.
inline std::vector<BvBound> bv_lemma_bounds(double variation, std::span<const double> u_n,
                                            std::span<const double> h_n, double alpha) {
  if (u_n.size() != h_n.size() || u_n.empty()) {
    throw std::invalid_argument("bv_lemma_bounds: u_n and h_n must be non-empty and equally long");
  }
  if (!(variation >= 0.0)) {
    throw std::invalid_argument("bv_lemma_bounds: variation must be nonnegative");
  }
  if (!(alpha > 0.0 && alpha < 2.0)) {
    throw std::invalid_argument("bv_lemma_bounds: alpha must lie in (0, 2)");
  }
  std::vector<BvBound> out;
  out.reserve(u_n.size());
  for (std::size_t i = 0; i < u_n.size(); ++i) {
    const double u = u_n[i];
    const double h = h_n[i];
    if (!(u > 0.0) || !(h > 0.0)) {
      throw std::invalid_argument("bv_lemma_bounds: sequences must be positive");
    }
    if (i > 0 && (u > u_n[i - 1] || h > h_n[i - 1])) {
      throw std::invalid_argument("bv_lemma_bounds: sequences must be nonincreasing");
    }
    const double lhs = std::pow(h, 2.0 - alpha);
    const double rhs = u * u;
    if (lhs > rhs * (1.0 + 1e-12)) {
      throw std::invalid_argument("bv_lemma_bounds: hypothesis h^(2-alpha) <= u^2 fails at index " +
                                  std::to_string(i) + " (" + detail::format_double(lhs) + " > " +
                                  detail::format_double(rhs) + ")");
    }
    out.push_back({3.0 * variation * std::pow(h, alpha / 2.0), 2.0 * variation * h / u});
  }
  return out;
}

struct BvValidation {
  double u = 0.0;
  double h = 0.0;
  double empirical = 0.0;  // grid measure of A_n
  double bound = 0.0;      // 2 V h / u
  double slack = 0.0;      // 4 * resolution
  bool ok = false;
};

/// Empirical m(A_n) (raw threshold u_n) against 2 V h_n / u_n on a 1-D domain.
inline std::vector<BvValidation> validate_bv_lemma(const ScalarFn& g, const Box& domain,
                                                   double variation, std::span<const double> u_n,
                                                   std::span<const double> h_n, double alpha,
                                                   double resolution) {
  const auto bounds = bv_lemma_bounds(variation, u_n, h_n, alpha);
  std::vector<BvValidation> out;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto rep = oscillation_bad_set(g, domain, u_n[i], h_n[i], alpha,
                                         std::min(resolution, h_n[i] / 4.0), Threshold::raw);
    BvValidation v;
    v.u = u_n[i];
    v.h = h_n[i];
    v.empirical = rep.measure_estimate;
    v.bound = bounds[i].a_set;
    v.slack = 4.0 * rep.resolution.front();
    v.ok = v.empirical <= v.bound + v.slack;
    out.push_back(v);
  }
  return out;
}

}  // namespace dynest
