#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dynest/bounds.hpp"
#include "oracles.hpp"

using namespace dynest;

TEST(WeightedPhiSum, SingleTerm) {
  EXPECT_DOUBLE_EQ(weighted_phi_sum(MixingModel::geometric(2.5, 0.3), 1), 2.5);
  EXPECT_DOUBLE_EQ(weighted_phi_sum(MixingModel::explicit_sequence({0.7, 0.1}), 1), 0.7);
}

TEST(WeightedPhiSum, SmallGeometric) {
  EXPECT_NEAR(weighted_phi_sum(MixingModel::geometric(1.0, 0.5), 3), 4.25, 1e-14);
}

// Property: closed form equals direct summation across a parameter sweep.
TEST(WeightedPhiSum, ClosedFormMatchesDirect) {
  for (double g : {0.1, 0.5, 0.9, 0.99}) {
    const auto m = MixingModel::geometric(1.3, g);
    for (std::size_t n : {10u, 1000u, 1000000u}) {
      const double closed = weighted_phi_sum(m, n);
      const double direct = weighted_phi_sum_direct(m, n);
      const double ref = oracle::weighted_sum([&](std::size_t k) { return 1.3 * std::pow(g, static_cast<double>(k)); }, n);
      EXPECT_NEAR(closed / direct, 1.0, 1e-10) << g << " " << n;
      EXPECT_NEAR(closed / ref, 1.0, 1e-10) << g << " " << n;
    }
  }
}

TEST(WeightedPhiSum, Errors) {
  EXPECT_THROW(MixingModel::geometric(1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(MixingModel::geometric(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(MixingModel::explicit_sequence({1.0, -0.1}), std::invalid_argument);
  EXPECT_THROW(weighted_phi_sum(MixingModel::geometric(1.0, 0.5), 0), std::invalid_argument);
}

TEST(Majorant, Geometric) {
  const auto m = MixingModel::geometric(1.0, 0.5);
  EXPECT_DOUBLE_EQ(smallest_linear_majorant(m, 1), 1.0);
  double prev = 0.0;
  for (std::size_t n : {10u, 100u, 10000u, 1000000u}) {
    const double r = smallest_linear_majorant(m, n);
    EXPECT_LE(r, 2.0);
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_NEAR(prev, 2.0, 1e-5);
}

TEST(Majorant, ExplicitSequence) {
  EXPECT_DOUBLE_EQ(smallest_linear_majorant(MixingModel::explicit_sequence({1.0, 0.0, 0.0}), 1000), 1.0);
  // Brute force max over n of W(n)/n.
  const auto m = MixingModel::explicit_sequence({1.0, 0.8, 0.05, 0.3});
  double best = 0.0;
  for (std::size_t n = 1; n <= 50; ++n) {
    best = std::max(best, oracle::weighted_sum([&](std::size_t k) { return m.phi(k); }, n) / static_cast<double>(n));
  }
  EXPECT_NEAR(smallest_linear_majorant(m, 50), best, 1e-14);
}

TEST(Concentration, Values) {
  const auto m = MixingModel::geometric(1.0, 0.5);
  const double e1e = std::exp(1.0 / std::numbers::e);
  const auto zero = concentration_bound(m, 1.0, 100, 0.0);
  EXPECT_NEAR(zero.raw, e1e, 1e-15);
  EXPECT_NEAR(e1e, 1.4447, 1e-4);
  EXPECT_EQ(zero.clipped, 1.0);
  EXPECT_TRUE(zero.vacuous);
  const double w = oracle::weighted_sum([](std::size_t k) { return std::pow(0.5, static_cast<double>(k)); }, 100);
  const auto b = concentration_bound(m, 1.0, 100, 50.0);
  EXPECT_NEAR(std::log(b.raw / e1e), -2500.0 / (2.0 * std::numbers::e * w), 1e-10);
  // Doubling t raises the exponential factor to the fourth power.
  const auto b2 = concentration_bound(m, 1.0, 100, 100.0);
  EXPECT_NEAR(std::log(b2.raw / e1e), 4.0 * std::log(b.raw / e1e), 1e-9);
  EXPECT_EQ(concentration_bound(m, 0.0, 100, 1.0).raw, 0.0);
}

TEST(Moment, ClosedForm) {
  const auto m = MixingModel::geometric(1.0, 0.5);
  EXPECT_NEAR(moment_bound(m, 2.0, 3, 2.0), 2.0 * std::sqrt(4.0 * 4.25), 1e-14);
  EXPECT_THROW(moment_bound(m, 1.0, 3, 1.0), std::invalid_argument);
}

namespace {

BoundParams box_params(std::size_t n, double t) {
  BoundParams p;
  p.n = n;
  p.h = 0.007;
  p.beta = 0.0;
  p.c_k = 2.0;
  p.diameter = 1.0;
  p.u = 0.007;
  p.alpha = 1.0;
  p.t = t;
  p.inf_f = 0.5;
  p.y_max = 1.0;
  p.r_max = 1.0;
  return p;
}

}  // namespace

TEST(DensityEnvelope, TableScaleInstance) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  const auto e = density_deviation_envelope(box_params(50000, 0.5), m);
  EXPECT_GT(e.raw, 0.0);
  EXPECT_TRUE(std::isfinite(e.raw));
  ASSERT_TRUE(e.bad_set_budget.has_value());
  const double r = smallest_linear_majorant(m, 50000);
  const double expect = 2.0 * std::exp(1.0 / std::numbers::e) *
                        std::exp(-0.25 * 50000 * 0.007 * 0.007 / (2.0 * std::numbers::e * r * 1.0 * 2.0));
  EXPECT_NEAR(e.raw, expect, 1e-15);
  // At this scale the exponent is about -0.006, so the envelope stays above 1.
  EXPECT_TRUE(e.vacuous);
  EXPECT_GT(e.raw, 2.8);
}

TEST(DensityEnvelope, LargeTLimit) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  double prev = 10.0;
  for (double t = 1.0; t <= 1024.0; t *= 2.0) {
    const double b = density_deviation_envelope(box_params(50000, t), m).raw;
    if (prev > 0.0) {
      EXPECT_LT(b, prev);
    }
    EXPECT_GE(b, 0.0);
    prev = b;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(DensityEnvelope, VacuousBelowBias) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  auto p = box_params(50000, 0.007);
  const auto e = density_deviation_envelope(p, m);
  EXPECT_TRUE(e.vacuous);
  EXPECT_EQ(e.clipped, 1.0);
  p.u = 0.001;
  EXPECT_THROW(density_deviation_envelope(p, m), std::invalid_argument);
}

TEST(DensityEnvelope, DoublingNHalvesLogBound) {
  const auto m = MixingModel::explicit_sequence({1.0});
  const double c = std::log(2.0 * std::exp(1.0 / std::numbers::e));
  const auto a = density_deviation_envelope(box_params(1000, 3.0), m);
  const auto b = density_deviation_envelope(box_params(2000, 3.0), m);
  EXPECT_NEAR(std::log(b.raw) - c, 2.0 * (std::log(a.raw) - c), 1e-9);
}

// Property: nonincreasing in t and n, within (0, 2 e^{1/e}].
TEST(Envelopes, MonotoneInTAndN) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  const double cap = 2.0 * std::exp(1.0 / std::numbers::e);
  for (std::size_t n : {1000u, 10000u, 100000u}) {
    double prev = cap + 1.0;
    for (double t = 0.01; t < 20.0; t *= 1.5) {
      const auto d = density_deviation_envelope(box_params(n, t), m);
      const auto c = concentration_bound(m, 1.0, n, t);
      EXPECT_LE(d.raw, prev);
      EXPECT_GE(d.raw, 0.0);
      EXPECT_LE(d.raw, cap);
      EXPECT_LE(c.raw, std::exp(1.0 / std::numbers::e));
      EXPECT_LE(concentration_bound(m, 1.0, n, t * 1.5).raw, c.raw);
      prev = d.raw;
    }
  }
  for (double t : {0.5, 2.0, 8.0}) {
    double prev = cap + 1.0;
    for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
      const auto d = density_deviation_envelope(box_params(n, t), m);
      EXPECT_LE(d.raw, prev);
      prev = d.raw;
      const auto r = regression_deviation_envelope(box_params(n, t), m, m, true);
      EXPECT_LE(r.raw, 2.0 * std::exp(1.0 / std::numbers::e));
    }
  }
}

TEST(RegressionEnvelope, BoundedY) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  auto p = box_params(50000, 0.0);
  EXPECT_TRUE(regression_deviation_envelope(p, m, m, true).vacuous);
  p.t = 2.0;
  const auto base = regression_deviation_envelope(p, m, m, true);
  // Constant by hand.
  const double r = smallest_linear_majorant(m, 50000);
  const double l = std::min(0.25 / (8 * std::numbers::e * r * 2.0), 0.25 / (8 * std::numbers::e * r * 2.0 * 1.0));
  EXPECT_NEAR(base.raw, 2.0 * std::exp(1.0 / std::numbers::e) * std::exp(-4.0 * l * 50000 * 0.007 * 0.007), 1e-15);
  p.y_max = 1e8;
  EXPECT_NEAR(regression_deviation_envelope(p, m, m, true).raw, 2.0 * std::exp(1.0 / std::numbers::e), 1e-6);
  p.y_max = 1.0;
  p.inf_f = 0.9;
  EXPECT_LT(regression_deviation_envelope(p, m, m, true).raw, base.raw);
  p.y_max.reset();
  EXPECT_THROW(regression_deviation_envelope(p, m, m, true), std::invalid_argument);
}

TEST(RegressionEnvelope, BoundedR) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  auto p = box_params(50000, 3.0);
  const auto e = regression_deviation_envelope(p, m, m, false);
  const double r = smallest_linear_majorant(m, 50000);
  const double nh = 50000 * 0.007 * 0.007;
  const double lp = 0.25 / (32 * std::numbers::e * r * 2.0);
  const double lpp = 0.25 / (8 * std::numbers::e * r * 2.0);
  const double e1e = std::exp(1.0 / std::numbers::e);
  EXPECT_NEAR(e.raw, 2 * e1e * std::exp(-9.0 * lp * nh) + e1e * std::exp(-lpp * nh), 1e-15);
  p.r_max.reset();
  EXPECT_THROW(regression_deviation_envelope(p, m, m, false), std::invalid_argument);
  p.r_max = 1.0;
  p.inf_f = 0.0;
  EXPECT_THROW(regression_deviation_envelope(p, m, m, false), std::invalid_argument);
}

TEST(MapEnvelope, DimensionFactor) {
  const auto m = MixingModel::geometric(1.0, 0.9);
  const auto p = box_params(500000, 3.0);
  const auto one = map_deviation_envelope(p, m, m, true, 1);
  const auto two = map_deviation_envelope(p, m, m, true, 2);
  EXPECT_NEAR(two.raw, 2.0 * one.raw, 1e-15);
  EXPECT_NEAR(one.raw, regression_deviation_envelope(p, m, m, true).raw, 1e-15);
}

TEST(Bandwidth, Schedule) {
  const auto a = bandwidth_schedule(1.0 / 3.0, 1000000, 0.0);
  EXPECT_NEAR(a.h, 0.01, 1e-15);
  EXPECT_NEAR(a.nh, 100.0, 1e-9);
  const auto b = bandwidth_schedule(0.25, 10000, 1.0);
  EXPECT_NEAR(b.h, 0.1, 1e-15);
  EXPECT_NEAR(b.nh, 10.0, 1e-9);
  EXPECT_THROW(bandwidth_schedule(0.5, 100, 0.0), std::invalid_argument);
  EXPECT_THROW(bandwidth_schedule(0.0, 100, 0.0), std::invalid_argument);
  EXPECT_THROW(bandwidth_schedule(1.0 / 3.0, 100, 1.0), std::invalid_argument);
}

TEST(MixingModel, Parse) {
  const auto g = MixingModel::parse("geometric:1,0.9");
  EXPECT_EQ(g.kind(), MixingModel::Kind::geometric);
  EXPECT_DOUBLE_EQ(g.phi(2), 0.81);
  const auto e = MixingModel::parse("explicit:1,0.5");
  EXPECT_DOUBLE_EQ(e.phi(1), 0.5);
  EXPECT_DOUBLE_EQ(e.phi(7), 0.0);
  EXPECT_EQ(MixingModel::parse(g.to_string()).gamma(), 0.9);
  EXPECT_THROW(MixingModel::parse("geometric:1"), std::invalid_argument);
  EXPECT_THROW(MixingModel::parse("power:1,2"), std::invalid_argument);
}
