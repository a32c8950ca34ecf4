#pragma once

// Seeded, splittable random streams and the observation-noise laws.
//
// The generator is Philox4x32-10 (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3"): a counter-based bijection keyed by 64 bits. A stream
// is (key, counter); child streams get a key derived from the parent key and a
// label through SplitMix64/FNV-1a mixing, so children are reproducible from
// (seed, label path) alone. All conversions to floating point are done here
// rather than through <random> distributions, whose algorithms differ between
// standard libraries.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynest/detail/numeric.hpp"

namespace dynest {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline constexpr std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                            std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53U;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

/// A counter-based random stream. Not shareable between threads; hand each
/// worker its own child via split().
class RngState {
public:
  explicit RngState(std::uint64_t seed) : seed_(seed), key_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }

  /// Independent child stream, deterministic in (parent key, label).
  RngState split(std::string_view label) const {
    RngState child(seed_);
    child.key_ = detail::splitmix64(key_ ^ detail::splitmix64(detail::fnv1a64(label)));
    return child;
  }

  std::uint64_t next_u64() {
    if (buffered_ == 0) {
      refill();
    }
    --buffered_;
    return buffer_[buffered_];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; uses both variates of each pair.
  double normal() {
    if (has_spare_normal_) {
      has_spare_normal_ = false;
      return spare_normal_;
    }
    double u1 = uniform();
    while (u1 == 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = radius * std::sin(angle);
    has_spare_normal_ = true;
    return radius * std::cos(angle);
  }

private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter_),
                                           static_cast<std::uint32_t>(counter_ >> 32), 0U, 0U};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(key_),
                                           static_cast<std::uint32_t>(key_ >> 32)};
    const auto out = detail::philox4x32_10(ctr, key);
    ++counter_;
    // Popped from the back: element 1 first, then element 0.
    buffer_[1] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[0] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
  }

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

inline RngState split_stream(const RngState& rng, std::string_view label) { return rng.split(label); }

/// Zero-mean i.i.d. noise with independent coordinates.
class NoiseLaw {
public:
  enum class Kind { none, uniform, gaussian };

  static NoiseLaw none(std::size_t dimension = 1) { return NoiseLaw(Kind::none, 0.0, 0.0, dimension); }

  /// Uniform on [a, b]; requires a = -b < b.
  static NoiseLaw uniform(double a, double b, std::size_t dimension = 1) {
    if (!(a < b)) {
      throw std::invalid_argument("uniform noise needs a < b");
    }
    if (a != -b) {
      throw std::invalid_argument("uniform noise must have zero mean (a = -b)");
    }
    return NoiseLaw(Kind::uniform, a, b, dimension);
  }

  /// Normal with the given mean and standard deviation; requires mean = 0.
  static NoiseLaw gaussian(double mean, double sd, std::size_t dimension = 1) {
    if (mean != 0.0) {
      throw std::invalid_argument("gaussian noise must have zero mean");
    }
    if (!(sd > 0.0)) {
      throw std::invalid_argument("gaussian noise needs sd > 0");
    }
    return NoiseLaw(Kind::gaussian, mean, sd, dimension);
  }

  /// "none" | "uniform:<b>" | "gaussian:<sd>".
  static NoiseLaw parse(std::string_view spec, std::size_t dimension = 1) {
    if (spec == "none" || spec == "no") {
      return none(dimension);
    }
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) {
      throw std::invalid_argument("bad noise spec '" + std::string(spec) + "'");
    }
    const auto kind = spec.substr(0, colon);
    const double v = detail::parse_real(spec.substr(colon + 1));
    if (kind == "uniform") {
      return uniform(-v, v, dimension);
    }
    if (kind == "gaussian") {
      return gaussian(0.0, v, dimension);
    }
    throw std::invalid_argument("unknown noise kind '" + std::string(kind) + "'");
  }

  Kind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  double first() const { return first_; }
  double second() const { return second_; }

  NoiseLaw with_dimension(std::size_t d) const { return NoiseLaw(kind_, first_, second_, d); }

  std::string to_string() const {
    switch (kind_) {
      case Kind::none: return "none";
      case Kind::uniform: return "uniform:" + detail::format_double(second_);
      case Kind::gaussian: return "gaussian:" + detail::format_double(second_);
    }
    return "none";
  }

  /// Writes one draw into out (size = dimension), advancing rng.
  void draw(RngState& rng, std::span<double> out) const {
    for (double& v : out) {
      switch (kind_) {
        case Kind::none: v = 0.0; break;
        case Kind::uniform: v = rng.uniform(first_, second_); break;
        case Kind::gaussian: v = first_ + second_ * rng.normal(); break;
      }
    }
  }

private:
  NoiseLaw(Kind k, double a, double b, std::size_t d) : kind_(k), first_(a), second_(b), dimension_(d) {
    if (dimension_ == 0) {
      throw std::invalid_argument("noise dimension must be positive");
    }
  }

  Kind kind_;
  double first_;   // a for uniform, mean for gaussian
  double second_;  // b for uniform, sd for gaussian
  std::size_t dimension_;
};

inline std::vector<double> draw_noise(const NoiseLaw& law, RngState& rng) {
  std::vector<double> out(law.dimension());
  law.draw(rng, out);
  return out;
}

}  // namespace dynest
