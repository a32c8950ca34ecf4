#pragma once

// Exponential deviation envelopes for kernel estimators of weakly dependent
// processes, evaluated for parametric mixing-coefficient models.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynest/detail/numeric.hpp"

namespace dynest {

/// Summable coefficient sequence Phi(k).
class MixingModel {
public:
  enum class Kind { geometric, explicit_sequence };

  /// Phi(k) = C gamma^k.
  static MixingModel geometric(double c, double gamma) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("geometric model needs C > 0");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
      throw std::invalid_argument("geometric model needs gamma in (0, 1)");
    }
    MixingModel m;
    m.kind_ = Kind::geometric;
    m.c_ = c;
    m.gamma_ = gamma;
    return m;
  }

  /// Phi(k) = phi[k], zero beyond the end.
  static MixingModel explicit_sequence(std::vector<double> phi) {
    if (phi.empty()) {
      throw std::invalid_argument("explicit mixing sequence is empty");
    }
    for (double v : phi) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("mixing coefficients must be finite and nonnegative");
      }
    }
    MixingModel m;
    m.kind_ = Kind::explicit_sequence;
    m.phi_ = std::move(phi);
    return m;
  }

  /// "geometric:C,gamma" or "explicit:p0,p1,...".
  static MixingModel parse(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("bad mixing model '" + spec + "'");
    }
    const std::string kind = spec.substr(0, colon);
    std::vector<double> vals;
    std::size_t start = colon + 1;
    for (;;) {
      const auto comma = spec.find(',', start);
      vals.push_back(detail::parse_real(spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (kind == "geometric") {
      if (vals.size() != 2) {
        throw std::invalid_argument("geometric model needs C,gamma");
      }
      return geometric(vals[0], vals[1]);
    }
    if (kind == "explicit") {
      return explicit_sequence(std::move(vals));
    }
    throw std::invalid_argument("unknown mixing model '" + kind + "'");
  }

  Kind kind() const { return kind_; }
  double c() const { return c_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& sequence() const { return phi_; }

  double phi(std::size_t k) const {
    if (kind_ == Kind::geometric) {
      return c_ * std::pow(gamma_, static_cast<double>(k));
    }
    return k < phi_.size() ? phi_[k] : 0.0;
  }

  double phi0() const { return phi(0); }

  std::string to_string() const {
    if (kind_ == Kind::geometric) {
      return "geometric:" + detail::format_double(c_) + "," + detail::format_double(gamma_);
    }
    std::string s = "explicit:";
    for (std::size_t i = 0; i < phi_.size(); ++i) {
      if (i) s += ',';
      s += detail::format_double(phi_[i]);
    }
    return s;
  }

private:
  MixingModel() = default;
  Kind kind_ = Kind::geometric;
  double c_ = 1.0;
  double gamma_ = 0.5;
  std::vector<double> phi_;
};

/// sum_{k<n} (n - k) Phi(k) by compensated direct summation.
inline double weighted_phi_sum_direct(const MixingModel& m, std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("weighted_phi_sum: n must be at least 1");
  }
  detail::CompensatedSum s;
  std::size_t last = n;
  if (m.kind() == MixingModel::Kind::explicit_sequence) {
    last = std::min(n, m.sequence().size());
  }
  double g = m.kind() == MixingModel::Kind::geometric ? m.c() : 0.0;
  for (std::size_t k = 0; k < last; ++k) {
    const double phi = m.kind() == MixingModel::Kind::geometric ? g : m.sequence()[k];
    s.add(static_cast<double>(n - k) * phi);
    g *= m.gamma();
  }
  return s.value();
}

/// sum_{k<n} (n - k) Phi(k); closed form for geometric models.
inline double weighted_phi_sum(const MixingModel& m, std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("weighted_phi_sum: n must be at least 1");
  }
  if (m.kind() == MixingModel::Kind::explicit_sequence) {
    return weighted_phi_sum_direct(m, n);
  }
  // C [n(1 - g) - g(1 - g^n)] / (1 - g)^2
  const double g = m.gamma();
  const double nn = static_cast<double>(n);
  const double one_minus_gn = -std::expm1(nn * std::log(g));
  const double one_minus_g = 1.0 - g;
  return m.c() * (nn * one_minus_g - g * one_minus_gn) / (one_minus_g * one_minus_g);
}

/// Smallest R with sum_{k<n} (n - k) Phi(k) <= R n for all n <= n_max.
inline double smallest_linear_majorant(const MixingModel& m, std::size_t n_max) {
  if (n_max == 0) {
    throw std::invalid_argument("smallest_linear_majorant: n_max must be at least 1");
  }
  if (m.kind() == MixingModel::Kind::geometric) {
    // W(n)/n = sum_k (1 - k/n) Phi(k) is nondecreasing in n.
    return weighted_phi_sum(m, n_max) / static_cast<double>(n_max);
  }
  // W(n+1) = W(n) + sum_{k<=n} Phi(k); beyond the support W grows linearly.
  const auto& phi = m.sequence();
  const std::size_t horizon = std::min(n_max, phi.size() + 1);
  detail::CompensatedSum partial;
  double w = 0.0;
  double best = 0.0;
  for (std::size_t n = 1; n <= horizon; ++n) {
    partial.add(m.phi(n - 1));
    w += partial.value();
    best = std::max(best, w / static_cast<double>(n));
  }
  if (n_max > horizon) {
    best = std::max(best, weighted_phi_sum_direct(m, n_max) / static_cast<double>(n_max));
  }
  return best;
}

/// A probability bound kept both raw and clipped to [0, 1].
struct Envelope {
  double raw = 0.0;
  double clipped = 0.0;
  bool vacuous = false;                   // raw >= 1 or threshold not reached
  std::optional<double> bad_set_budget;   // R h^gamma', the excluded measure

  static Envelope from_raw(double raw) {
    Envelope e;
    e.raw = raw;
    e.clipped = std::min(1.0, raw);
    e.vacuous = raw >= 1.0;
    return e;
  }
};

inline const double kEInvE = std::exp(1.0 / std::numbers::e);

/// e^{1/e} exp(-t^2 / (2e C(phi)^2 Phi(0) W(n))) for the un-normalized sum.
inline Envelope concentration_bound(const MixingModel& m, double c_phi, std::size_t n, double t) {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("concentration_bound: t must be nonnegative");
  }
  if (!(c_phi >= 0.0)) {
    throw std::invalid_argument("concentration_bound: C(phi) must be nonnegative");
  }
  const double denom = 2.0 * std::numbers::e * c_phi * c_phi * m.phi0() * weighted_phi_sum(m, n);
  if (denom == 0.0) {
    // A constant test function never deviates.
    return Envelope::from_raw(t > 0.0 ? 0.0 : kEInvE);
  }
  return Envelope::from_raw(kEInvE * std::exp(-t * t / denom));
}

/// Bound on (E|S_n - E S_n|^p)^{1/p}: C(phi) (2 p W(n))^{1/2}.
inline double moment_bound(const MixingModel& m, double c_phi, std::size_t n, double p) {
  if (!(p >= 2.0)) {
    throw std::invalid_argument("moment_bound: p must be at least 2");
  }
  return c_phi * std::sqrt(2.0 * p * weighted_phi_sum(m, n));
}

struct BoundParams {
  std::size_t n = 0;
  double h = 0.0;
  double beta = 0.0;            // kernel scaling exponent
  double c_k = 0.0;             // C(K)
  double diameter = 1.0;        // diam(D)
  double inf_f = 0.0;
  std::optional<double> y_max;  // |Y| <= y_max
  std::optional<double> r_max;  // |r| <= r_max
  double t = 0.0;
  double u = 0.0;
  double alpha = 1.0;
  double gamma_prime = 1.0;     // exponent of the bad-set budget

  double nh() const { return static_cast<double>(n) * std::pow(h, beta + 2.0); }

  void validate() const {
    if (n == 0) throw std::invalid_argument("bound parameters: n must be positive");
    if (!(h > 0.0)) throw std::invalid_argument("bound parameters: h must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("bound parameters: beta must be nonnegative");
    if (!(c_k > 0.0)) throw std::invalid_argument("bound parameters: C(K) must be positive");
    if (!(t >= 0.0)) throw std::invalid_argument("bound parameters: t must be nonnegative");
    if (!(u >= h * diameter * (1.0 - 1e-12))) {
      throw std::invalid_argument("bound parameters: u = " + detail::format_double(u) + " is below h diam(D) = " +
                                  detail::format_double(h * diameter));
    }
  }
};

/// 2 e^{1/e} exp(-t^2 n h^{beta+2} / (2e R Phi(0) C(K))), valid off the bad set.
inline Envelope density_deviation_envelope(const BoundParams& p, const MixingModel& m) {
  p.validate();
  const double r = smallest_linear_majorant(m, p.n);
  Envelope e;
  if (!(p.t > std::pow(p.u, p.alpha))) {
    e = Envelope::from_raw(1.0);
    e.vacuous = true;
  } else {
    const double denom = 2.0 * std::numbers::e * r * m.phi0() * p.c_k;
    e = Envelope::from_raw(2.0 * kEInvE * std::exp(-p.t * p.t * p.nh() / denom));
  }
  e.bad_set_budget = r * std::pow(p.h, p.gamma_prime);
  return e;
}

/// Exponent constants of the regression envelope.
struct RegressionConstants {
  double l = 0.0;        // t^2 coefficient
  double l_mass = 0.0;   // constant of the f_n < inf f / 2 term (r_max case only)
};

inline RegressionConstants regression_constants(const BoundParams& p, const MixingModel& model_f,
                                                const MixingModel& model_g, bool bounded_y) {
  if (!(p.inf_f > 0.0)) {
    throw std::invalid_argument("regression envelope needs inf f > 0");
  }
  const double e = std::numbers::e;
  const double r_f = smallest_linear_majorant(model_f, p.n);
  const double r_g = smallest_linear_majorant(model_g, p.n);
  const double f2 = p.inf_f * p.inf_f;
  RegressionConstants c;
  if (bounded_y) {
    if (!p.y_max || !(*p.y_max > 0.0)) {
      throw std::invalid_argument("bounded-Y regression envelope needs y_max > 0");
    }
    const double y2 = *p.y_max * *p.y_max;
    c.l = std::min(f2 / (8.0 * e * r_g * model_g.phi0() * p.c_k), f2 / (8.0 * e * r_f * model_f.phi0() * p.c_k * y2));
  } else {
    if (!p.r_max || !(*p.r_max > 0.0)) {
      throw std::invalid_argument("bounded-r regression envelope needs r_max > 0");
    }
    const double r2 = *p.r_max * *p.r_max;
    c.l = std::min(f2 / (32.0 * e * r_g * model_g.phi0() * p.c_k),
                   f2 / (32.0 * e * r_f * model_f.phi0() * p.c_k * r2));
    c.l_mass = f2 / (8.0 * e * r_f * model_f.phi0() * p.c_k);
  }
  return c;
}

/// Deviation of r_n from r beyond t - u^alpha, off the bad sets of f and r.
inline Envelope regression_deviation_envelope(const BoundParams& p, const MixingModel& model_f,
                                              const MixingModel& model_g, bool bounded_y) {
  p.validate();
  const auto c = regression_constants(p, model_f, model_g, bounded_y);
  const double nh = p.nh();
  double raw = 2.0 * kEInvE * std::exp(-p.t * p.t * c.l * nh);
  if (!bounded_y) {
    raw += kEInvE * std::exp(-c.l_mass * nh);
  }
  Envelope e = Envelope::from_raw(raw);
  if (!(p.t > std::pow(p.u, p.alpha))) {
    e.raw = std::max(e.raw, 1.0);
    e.clipped = 1.0;
    e.vacuous = true;
  }
  e.bad_set_budget = smallest_linear_majorant(model_f, p.n) * std::pow(p.h, p.gamma_prime);
  return e;
}

/// Sup-norm deviation of the d-coordinate map estimator: 2 d e^{1/e} exp(-t^2 L n h^{beta+2}).
inline Envelope map_deviation_envelope(const BoundParams& p, const MixingModel& model_f, const MixingModel& model_g,
                                       bool bounded_y, std::size_t d) {
  p.validate();
  if (d == 0) {
    throw std::invalid_argument("map envelope needs d >= 1");
  }
  const auto c = regression_constants(p, model_f, model_g, bounded_y);
  const double nh = p.nh();
  const double dd = static_cast<double>(d);
  double raw = 2.0 * dd * kEInvE * std::exp(-p.t * p.t * c.l * nh);
  if (!bounded_y) {
    raw += dd * kEInvE * std::exp(-c.l_mass * nh);
  }
  Envelope e = Envelope::from_raw(raw);
  if (!(p.t > std::pow(p.u, p.alpha))) {
    e.raw = std::max(e.raw, 1.0);
    e.clipped = 1.0;
    e.vacuous = true;
  }
  return e;
}

struct BandwidthSchedule {
  double h = 0.0;
  double nh = 0.0;  // n h^{beta+2}
};

/// h_n = n^{-xi} with 0 < xi < 1/(beta + 2).
inline BandwidthSchedule bandwidth_schedule(double xi, std::size_t n, double beta) {
  if (!(beta >= 0.0)) {
    throw std::invalid_argument("bandwidth_schedule: beta must be nonnegative");
  }
  const double limit = 1.0 / (beta + 2.0);
  if (!(xi > 0.0 && xi < limit)) {
    throw std::invalid_argument("bandwidth_schedule: xi = " + detail::format_double(xi) + " must lie in (0, " +
                                detail::format_double(limit) + ")");
  }
  if (n == 0) {
    throw std::invalid_argument("bandwidth_schedule: n must be positive");
  }
  const double nn = static_cast<double>(n);
  return {std::pow(nn, -xi), std::pow(nn, 1.0 - xi * (beta + 2.0))};
}

}  // namespace dynest
