#pragma once

// Interval and torus maps with their invariant-density oracles, stationary
// sampling, and noisy trajectory generation.
//
// Estimation runs on the forward orbit X_0, T X_0, T^2 X_0, ... The
// time-reversed process used by the mixing argument has the same joint law
// as (X_0, ..., X_n), so nothing separate is simulated for it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynest/detail/numeric.hpp"
#include "dynest/points.hpp"
#include "dynest/regularity.hpp"
#include "dynest/stochastics.hpp"

namespace dynest {

/// T : Sigma -> Sigma on an axis-aligned box, with optional oracles.
/// Immutable and cheap to copy (callables are shared).
class DynamicalSystem {
public:
  using MapFn = std::function<void(std::span<const double>, std::span<double>)>;
  using DensityFn = std::function<double(std::span<const double>)>;

  DynamicalSystem(std::string id, Box domain, MapFn map)
      : id_(std::move(id)), domain_(std::move(domain)), map_(std::move(map)) {}

  DynamicalSystem with_density(DensityFn f) && {
    density_ = std::move(f);
    return std::move(*this);
  }
  DynamicalSystem with_support(Box s) && {
    support_ = std::move(s);
    return std::move(*this);
  }
  DynamicalSystem with_note(std::string note) && {
    notes_.push_back(std::move(note));
    return std::move(*this);
  }

  const std::string& id() const { return id_; }
  std::size_t dimension() const { return domain_.dimension(); }
  const Box& domain() const { return domain_; }
  const std::optional<Box>& support() const { return support_; }
  bool has_density() const { return static_cast<bool>(density_); }
  const std::vector<std::string>& notes() const { return notes_; }

  void apply(std::span<const double> x, std::span<double> out) const { map_(x, out); }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(dimension());
    map_(x, out);
    return out;
  }

  double apply1(double x) const {
    std::array<double, 1> in{x};
    std::array<double, 1> out{};
    map_(in, out);
    return out[0];
  }

  /// Invariant density; zero outside Sigma. Throws when there is no oracle.
  double density(std::span<const double> x) const {
    if (!density_) {
      throw std::logic_error("system '" + id_ + "' has no invariant-density oracle");
    }
    return domain_.contains(x) ? density_(x) : 0.0;
  }

  double density1(double x) const {
    std::array<double, 1> in{x};
    return density(in);
  }

private:
  std::string id_;
  Box domain_;
  MapFn map_;
  DensityFn density_;
  std::optional<Box> support_;
  std::vector<std::string> notes_;
};

/// Invariant density of x -> beta x mod 1:
/// f(x) = C * sum_i beta^-(i+1) 1_[0, T^i 1](x).
class ParryDensity {
public:
  explicit ParryDensity(double beta) : beta_(beta) {
    if (!(beta > 1.0) || !std::isfinite(beta)) {
      throw std::invalid_argument("beta must be a finite real > 1");
    }
    // Orbit of 1 with T(1) taken as the left limit beta - floor(beta).
    double endpoint = 1.0;
    double weight = 1.0 / beta;
    std::vector<std::pair<double, double>> terms;
    for (int i = 0; weight >= 1e-12; ++i) {
      if (endpoint <= 0.0) {
        break;  // 1_[0,0] is a null set, and the orbit stays at 0
      }
      terms.emplace_back(endpoint, weight);
      endpoint = beta * endpoint;
      endpoint -= std::floor(endpoint);
      weight /= beta;
    }
    detail::CompensatedSum mass;
    for (const auto& [a, w] : terms) {
      mass.add(w * a);
    }
    normalizer_ = 1.0 / mass.value();

    // Distinct endpoints, sorted ascending, with f on (a_{k-1}, a_k].
    std::sort(terms.begin(), terms.end());
    for (const auto& [a, w] : terms) {
      if (!ends_.empty() && ends_.back() == a) {
        weights_.back() += w;
      } else {
        ends_.push_back(a);
        weights_.push_back(w);
      }
    }
    // level_[k] = C * sum of weights with endpoint >= ends_[k].
    level_.assign(ends_.size(), 0.0);
    double acc = 0.0;
    for (std::size_t k = ends_.size(); k-- > 0;) {
      acc += weights_[k];
      level_[k] = normalizer_ * acc;
    }
  }

  double beta() const { return beta_; }
  double normalizer() const { return normalizer_; }

  /// Distinct points T^i(1) in (0, 1], ascending.
  const std::vector<double>& endpoints() const { return ends_; }

  double operator()(double x) const {
    if (x < 0.0 || x > 1.0) {
      return 0.0;
    }
    const auto it = std::lower_bound(ends_.begin(), ends_.end(), x);
    if (it == ends_.end()) {
      return 0.0;
    }
    return level_[static_cast<std::size_t>(it - ends_.begin())];
  }

  /// Jump locations strictly inside (0, 1).
  std::vector<double> jumps() const {
    std::vector<double> out;
    for (double a : ends_) {
      if (a < 1.0) out.push_back(a);
    }
    return out;
  }

  StepFunction as_step_function() const {
    StepFunction s;
    s.a = 0.0;
    s.b = 1.0;
    for (std::size_t k = 0; k < ends_.size(); ++k) {
      if (ends_[k] < 1.0) {
        s.breaks.push_back(ends_[k]);
        s.values.push_back(level_[k]);
      }
    }
    s.values.push_back(level_.back());
    return s;
  }

private:
  double beta_;
  double normalizer_ = 1.0;
  std::vector<double> ends_;
  std::vector<double> weights_;
  std::vector<double> level_;
};

inline ParryDensity parry_density(double beta) { return ParryDensity(beta); }

namespace detail {

/// Safe prime p = 2q + 1 (q prime) just below 2^51. Every residue other than
/// 0 and +-1 has multiplicative order q or 2q modulo p.
inline constexpr std::uint64_t kLatticeModulus = 2251799813684783ULL;

/// x -> beta x mod 1 for integer beta, computed exactly on the lattice
/// {k / p}. Binary floating point collapses orbits of x -> 2x mod 1 onto 0
/// within 53 steps; on the odd-modulus lattice the orbit is the exact orbit of
/// the rational k/p, with period at least q (about 1.1e15).
inline double integer_beta_step(std::uint64_t beta, double x) {
  const auto p = kLatticeModulus;
  const double scaled = std::nearbyint(x * static_cast<double>(p));
  auto k = static_cast<std::uint64_t>(std::clamp(scaled, 0.0, static_cast<double>(p)));
  if (k == p) k = 0;
  const auto next = static_cast<std::uint64_t>((static_cast<unsigned __int128>(beta) * k) % p);
  return static_cast<double>(next) / static_cast<double>(p);
}

}  // namespace detail

/// x -> beta x mod 1 on [0, 1] with the Parry density oracle.
inline DynamicalSystem beta_map(double beta) {
  auto parry = std::make_shared<const ParryDensity>(beta);
  const bool integer = beta == std::floor(beta) && beta < 4096.0;
  DynamicalSystem::MapFn map;
  if (integer) {
    const auto b = static_cast<std::uint64_t>(beta);
    map = [b](std::span<const double> x, std::span<double> out) { out[0] = detail::integer_beta_step(b, x[0]); };
  } else {
    map = [beta](std::span<const double> x, std::span<double> out) {
      const double y = beta * x[0];
      out[0] = y - std::floor(y);
    };
  }
  auto sys = DynamicalSystem("beta:" + detail::format_double(beta), Box::unit(1), std::move(map))
                 .with_density([parry](std::span<const double> x) { return (*parry)(x[0]); });
  if (integer) {
    return std::move(sys).with_note("integer beta: orbits computed exactly on the lattice k/p, p = " +
                                    std::to_string(detail::kLatticeModulus));
  }
  return sys;
}

/// x -> 1/x mod 1 on (0, 1) with density 1 / (ln 2 (1 + x)); T(0) := 0.
inline DynamicalSystem gauss_map() {
  return DynamicalSystem("gauss", Box::unit(1),
                         [](std::span<const double> x, std::span<double> out) {
                           if (x[0] == 0.0) {
                             out[0] = 0.0;
                             return;
                           }
                           const double y = 1.0 / x[0];
                           out[0] = y - std::floor(y);
                         })
      .with_density([](std::span<const double> x) { return 1.0 / (std::log(2.0) * (1.0 + x[0])); });
}

/// T(x) = |1/x| - floor(|1/x| + 1 - alpha) on [alpha - 1, alpha]; T(0) := 0.
inline DynamicalSystem alpha_gauss_map(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1]");
  }
  return DynamicalSystem("alphagauss:" + detail::format_double(alpha), Box::interval(alpha - 1.0, alpha),
                         [alpha](std::span<const double> x, std::span<double> out) {
                           if (x[0] == 0.0) {
                             out[0] = 0.0;
                             return;
                           }
                           const double y = std::abs(1.0 / x[0]);
                           out[0] = y - std::floor(y + 1.0 - alpha);
                         });
}

/// x -> a x (1 - x) on [0, 1]; invariant support [T^2(1/2), T(1/2)].
inline DynamicalSystem logistic_map(double a) {
  if (!(a > 0.0 && a <= 4.0)) {
    throw std::invalid_argument("logistic parameter must lie in (0, 4]");
  }
  auto map = [a](std::span<const double> x, std::span<double> out) { out[0] = a * x[0] * (1.0 - x[0]); };
  const double top = a * 0.5 * 0.5;
  const double bottom = a * top * (1.0 - top);
  auto sys = DynamicalSystem("logistic:" + detail::format_double(a), Box::unit(1), map);
  if (bottom < top) {
    return std::move(sys).with_support(Box::interval(bottom, top));
  }
  return sys;
}

/// Row-major 2x2 matrix.
using Matrix2 = std::array<double, 4>;

/// Smallest singular value of a 2x2 matrix.
inline double smallest_singular_value(const Matrix2& m) {
  const double fro2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
  const double det = m[0] * m[3] - m[1] * m[2];
  const double disc = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * det * det));
  return std::sqrt(std::max(0.0, 0.5 * (fro2 - disc)));
}

/// x -> B x mod Z^2 on [0, 1]^2.
inline DynamicalSystem matrix_beta_map(const Matrix2& b) {
  for (double v : b) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("matrix entries must be finite");
    }
  }
  std::string id = "matrixbeta:";
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) id += ',';
    id += detail::format_double(b[i]);
  }
  auto sys = DynamicalSystem(std::move(id), Box::unit(2), [b](std::span<const double> x, std::span<double> out) {
    const double y0 = b[0] * x[0] + b[1] * x[1];
    const double y1 = b[2] * x[0] + b[3] * x[1];
    out[0] = y0 - std::floor(y0);
    out[1] = y1 - std::floor(y1);
  });
  const double smin = smallest_singular_value(b);
  if (!(smin > 1.0)) {
    return std::move(sys).with_note("matrix is not expanding: smallest singular value " +
                                    detail::format_double(smin) + " <= 1");
  }
  return sys;
}

/// The 2x2 example matrix with rows (2.5, 3.4) and (4.6, 3.2).
inline constexpr Matrix2 kExampleMatrix{2.5, 3.4, 4.6, 3.2};

/// "beta:<b>" | "gauss" | "alphagauss:<a>" | "logistic:<a>" | "matrixbeta:<b11,b12,b21,b22>".
/// Reals accept "p/q" fractions.
inline DynamicalSystem make_system(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "gauss" && arg.empty()) {
    return gauss_map();
  }
  if (arg.empty()) {
    throw std::invalid_argument("system '" + spec + "' needs a parameter");
  }
  if (kind == "beta") return beta_map(detail::parse_real(arg));
  if (kind == "alphagauss") return alpha_gauss_map(detail::parse_real(arg));
  if (kind == "logistic") return logistic_map(detail::parse_real(arg));
  if (kind == "matrixbeta") {
    Matrix2 m{};
    std::size_t start = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto comma = arg.find(',', start);
      if ((i < 3) == (comma == std::string::npos)) {
        throw std::invalid_argument("matrixbeta needs exactly four comma-separated entries");
      }
      m[i] = detail::parse_real(arg.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      start = comma + 1;
    }
    return matrix_beta_map(m);
  }
  throw std::invalid_argument("unknown system '" + spec + "'");
}

/// Data for the regression problem Y_i = X_{i+1} + eps_i.
///
/// states[i+1] == map(states[i]) except at the indices in `restarts`, where
/// the floating-point orbit landed exactly on a fixed point and was replaced by
/// a fresh stationary draw. targets[i] == map(states[i]) + eps_i everywhere.
struct Trajectory {
  std::string system_id;
  std::size_t dimension = 1;
  std::vector<double> states;   // n * d
  std::vector<double> targets;  // (n - 1) * d
  NoiseLaw noise = NoiseLaw::none();
  std::vector<std::size_t> restarts;

  std::size_t size() const { return states.size() / dimension; }
  std::span<const double> state(std::size_t i) const { return {states.data() + i * dimension, dimension}; }
  std::span<const double> target(std::size_t i) const { return {targets.data() + i * dimension, dimension}; }

  /// Builds a trajectory from given states and targets (tests, replays).
  static Trajectory from_data(std::size_t d, std::vector<double> x, std::vector<double> y) {
    if (d == 0 || x.size() % d != 0 || y.size() % d != 0) {
      throw std::invalid_argument("trajectory data sizes are not multiples of the dimension");
    }
    if (!x.empty() && y.size() + d != x.size()) {
      throw std::invalid_argument("trajectory needs exactly n - 1 targets");
    }
    Trajectory t;
    t.system_id = "data";
    t.dimension = d;
    t.states = std::move(x);
    t.targets = std::move(y);
    t.noise = NoiseLaw::none(d);
    return t;
  }
};

struct SamplerOptions {
  std::size_t burnin = 1000;
  double envelope_factor = 1.01;
  std::size_t envelope_grid = 10000;
  double escape_tolerance = 1e-9;
};

namespace detail {

inline double density_envelope(const DynamicalSystem& sys, const SamplerOptions& opt) {
  const std::size_t d = sys.dimension();
  const auto per_axis = d == 1 ? opt.envelope_grid
                               : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(opt.envelope_grid))));
  const auto grid = make_grid(sys.domain(), per_axis);
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sup = std::max(sup, sys.density(grid[i]));
  }
  return sup * opt.envelope_factor;
}

inline void uniform_point(const Box& box, RngState& rng, std::span<double> out) {
  for (std::size_t j = 0; j < box.dimension(); ++j) {
    out[j] = rng.uniform(box.lo(j), box.hi(j));
  }
}

}  // namespace detail

/// Rejection sampler for a fixed system; the envelope is computed once.
class StationarySampler {
public:
  explicit StationarySampler(DynamicalSystem sys, SamplerOptions opt = {})
      : sys_(std::move(sys)), opt_(opt) {
    if (sys_.has_density()) {
      envelope_ = detail::density_envelope(sys_, opt_);
      if (!(envelope_ > 0.0)) {
        throw std::runtime_error("density envelope of '" + sys_.id() + "' is not positive");
      }
    }
  }

  const DynamicalSystem& system() const { return sys_; }
  const SamplerOptions& options() const { return opt_; }

  /// One draw from the invariant law (exact rejection sampling when a density
  /// oracle exists, otherwise a uniform start followed by burn-in).
  std::vector<double> draw(RngState& rng) const {
    const std::size_t d = sys_.dimension();
    std::vector<double> x(d);
    if (sys_.has_density()) {
      for (;;) {
        detail::uniform_point(sys_.domain(), rng, x);
        const double fx = sys_.density(x);
        if (fx > envelope_) {
          throw std::runtime_error("rejection envelope " + detail::format_double(envelope_) +
                                   " exceeded by density " + detail::format_double(fx) + " at x = " +
                                   detail::format_double(x[0]) + " for '" + sys_.id() + "'");
        }
        if (rng.uniform() * envelope_ < fx) {
          return x;
        }
      }
    }
    detail::uniform_point(sys_.support().value_or(sys_.domain()), rng, x);
    std::vector<double> next(d);
    for (std::size_t i = 0; i < opt_.burnin; ++i) {
      sys_.apply(x, next);
      if (next == x) {
        detail::uniform_point(sys_.support().value_or(sys_.domain()), rng, next);
      }
      std::swap(x, next);
    }
    return x;
  }

private:
  DynamicalSystem sys_;
  SamplerOptions opt_;
  double envelope_ = 0.0;
};

inline std::vector<double> sample_stationary(const DynamicalSystem& sys, RngState& rng,
                                             const SamplerOptions& opt = {}) {
  return StationarySampler(sys, opt).draw(rng);
}

/// X_0 stationary, X_{i+1} = T(X_i), Y_i = T(X_i) + eps_i.
/// Initial/restart draws and noise use separate child streams of rng.
inline Trajectory generate_trajectory(const StationarySampler& sampler, std::size_t n, const NoiseLaw& noise,
                                      const RngState& rng) {
  const auto& sys = sampler.system();
  if (n < 2) {
    throw std::invalid_argument("trajectory length must be at least 2");
  }
  const std::size_t d = sys.dimension();
  if (noise.dimension() != d) {
    throw std::invalid_argument("noise dimension does not match the system");
  }
  RngState init_rng = rng.split("init");
  RngState noise_rng = rng.split("noise");

  Trajectory traj;
  traj.system_id = sys.id();
  traj.dimension = d;
  traj.noise = noise;
  traj.states.resize(n * d);
  traj.targets.resize((n - 1) * d);

  const auto x0 = sampler.draw(init_rng);
  std::copy(x0.begin(), x0.end(), traj.states.begin());
  const double tol = sampler.options().escape_tolerance;
  std::vector<double> eps(d);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::span<const double> cur(traj.states.data() + i * d, d);
    std::span<double> next(traj.states.data() + (i + 1) * d, d);
    sys.apply(cur, next);
    if (sys.domain().excess(next) > tol) {
      throw std::runtime_error("orbit of '" + sys.id() + "' left its domain at step " + std::to_string(i + 1));
    }
    noise.draw(noise_rng, eps);
    for (std::size_t j = 0; j < d; ++j) {
      traj.targets[i * d + j] = next[j] + eps[j];
    }
    if (std::equal(next.begin(), next.end(), cur.begin())) {
      const auto fresh = sampler.draw(init_rng);
      std::copy(fresh.begin(), fresh.end(), next.begin());
      traj.restarts.push_back(i + 1);
    }
  }
  return traj;
}

inline Trajectory generate_trajectory(const DynamicalSystem& sys, std::size_t n, const NoiseLaw& noise,
                                      const RngState& rng, const SamplerOptions& opt = {}) {
  return generate_trajectory(StationarySampler(sys, opt), n, noise, rng);
}

}  // namespace dynest
