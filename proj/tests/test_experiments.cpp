#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "dynest/experiments.hpp"

using namespace dynest;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.label = "small";
  s.system = "beta:27/11";
  s.n = 5000;
  s.h = 0.02;
  s.grid = 100;
  s.seed = 3;
  return s;
}

}  // namespace

TEST(Spec, SerializeRoundTrip) {
  ExperimentSpec s = small_spec();
  s.xi = 0.3;
  s.noise = "gaussian:0.3";
  s.restrict_to = std::make_pair(0.2, 1.0);
  s.grid_region = "support";
  s.replications = 4;
  s.out = "x.csv";
  EXPECT_EQ(ExperimentSpec::parse(s.serialize()), s);
  EXPECT_EQ(ExperimentSpec::parse(ExperimentSpec{}.serialize()), ExperimentSpec{});
}

TEST(Spec, ReadSpecLines) {
  std::ostringstream os;
  write_spec_line(os, small_spec());
  os << "a,b\n1,2\n";
  std::istringstream in(os.str());
  const auto specs = read_spec_lines(in);
  ASSERT_EQ(specs.size(), 1u);
  EXPECT_EQ(specs[0], small_spec());
}

TEST(Spec, ConfigThenFlags) {
  std::istringstream cfg("# comment\nsystem = \"gauss\"\nn = 2000  # trailing\nh = 0.01\nnoise = uniform:0.2\n");
  ExperimentSpec s;
  s.apply(parse_config(cfg));
  EXPECT_EQ(s.system, "gauss");
  EXPECT_EQ(s.n, 2000u);
  EXPECT_EQ(*s.h, 0.01);
  // A later flag overrides the file value.
  s.set("n", "3000");
  EXPECT_EQ(s.n, 3000u);
  EXPECT_THROW(s.set("colour", "red"), std::invalid_argument);
  EXPECT_THROW(s.set("n", "-4"), std::invalid_argument);
}

TEST(Spec, Validation) {
  ExperimentSpec s = small_spec();
  s.h.reset();
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.xi = 1.0 / 3.0;
  EXPECT_NO_THROW(s.validate());
  EXPECT_NEAR(s.bandwidth(0.0), std::pow(5000.0, -1.0 / 3.0), 1e-15);
  EXPECT_THROW(s.bandwidth(1.0), std::invalid_argument);
}

TEST(Table, Empty) { EXPECT_TRUE(run_table({}).empty()); }

TEST(Table, ErrorRowDoesNotStopOthers) {
  auto bad = small_spec();
  bad.system = "tent";
  const auto rows = run_table({small_spec(), bad, small_spec()});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_NE(rows[1].status.find("error"), std::string::npos);
  EXPECT_EQ(rows[2].status, "ok");
  EXPECT_TRUE(rows[0].same_result(rows[2]));
}

TEST(Table, ReplayIsBitExact) {
  auto a = small_spec();
  auto b = small_spec();
  b.system = "matrixbeta:2.5,3.4,4.6,3.2";
  b.kernel = "box2d";
  b.grid = 20;
  b.h = 0.02;
  b.noise = "uniform:0.1";
  const auto rows = run_table({a, b});
  std::ostringstream os;
  write_table_csv(os, rows);
  std::istringstream in(os.str());
  const auto replayed = run_table(read_spec_lines(in));
  ASSERT_EQ(replayed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_TRUE(rows[i].same_result(replayed[i]));
}

TEST(Table, FirstReferenceRowInBand) {
  const auto specs = reproduce_paper_suite_specs(7);
  const auto row = run_experiment(specs[0]);
  ASSERT_EQ(row.status, "ok");
  EXPECT_GE(row.ame_f, 0.04);
  EXPECT_LE(row.ame_f, 0.17);
  EXPECT_GE(row.ame_t[0], 0.004);
  EXPECT_LE(row.ame_t[0], 0.02);
}

TEST(Table, NoiseDoesNotHelp) {
  auto clean = small_spec();
  clean.replications = 5;
  auto noisy = clean;
  noisy.noise = "uniform:0.3";
  const auto a = run_experiment(clean);
  const auto b = run_experiment(noisy);
  EXPECT_LE(a.ame_t[0], b.ame_t[0]);
  EXPECT_EQ(a.ame_t_replications.size(), 5u);
}

TEST(Table, CsvHasSpecLineAndHeader) {
  std::ostringstream os;
  write_table_csv(os, run_table({small_spec()}), false);
  const auto text = os.str();
  EXPECT_EQ(text.rfind("# spec: ", 0), 0u);
  EXPECT_EQ(text.find("runtime"), std::string::npos);
}

TEST(EstimateCsv, OneLinePerPoint) {
  const auto out = run_replication(small_spec(), 0);
  std::ostringstream os;
  write_estimate_csv(os, small_spec(), out.grid);
  const auto text = os.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 2u + out.grid.size());
}

TEST(Sweep, ConstantEstimatorHasFlatSlope) {
  auto base = small_spec();
  base.kernel = "box1d";
  const MapEstimator constant = [](const Trajectory&, const Kernel&, double, const PointSet& p) {
    return std::vector<double>(p.size(), 0.5);
  };
  const auto res = convergence_sweep(base, {1000, 4000, 16000}, 1.0 / 3.0, constant);
  EXPECT_NEAR(res.slope_t, 0.0, 1e-9);
}

TEST(Sweep, ReplicationsGiveSpread) {
  auto base = small_spec();
  base.kernel = "box1d";
  base.replications = 5;
  const auto res = convergence_sweep(base, {1000, 4000, 16000}, 1.0 / 3.0);
  for (const auto& p : res.points) {
    EXPECT_EQ(p.ame_t_replications.size(), 5u);
    EXPECT_GT(p.ame_t_sd, 0.0);
  }
  EXPECT_LT(res.slope_t, 0.0);
}

TEST(Sweep, Errors) {
  EXPECT_THROW(convergence_sweep(small_spec(), {1000, 2000}, 0.3), std::invalid_argument);
  EXPECT_THROW(convergence_sweep(small_spec(), {1000, 500, 2000}, 0.3), std::invalid_argument);
  // Epanechnikov has scaling exponent 1, so xi must stay below 1/3.
  EXPECT_THROW(convergence_sweep(small_spec(), {1000, 2000, 4000}, 1.0 / 3.0), std::invalid_argument);
}

TEST(Coverage, Guards) {
  ExperimentSpec s;
  s.system = "beta:27/11";
  s.n = 2000;
  s.h = 0.05;
  s.kernel = "box1d";
  const auto model = MixingModel::geometric(1.0, 0.9);
  EXPECT_THROW(coverage_study(s, model, {0.5}, 49), std::invalid_argument);
  // The first Parry jump of 27/11 is at T(1) = 27/11 - 2.
  CoverageOptions at_jump;
  at_jump.x = 27.0 / 11.0 - 2.0;
  EXPECT_THROW(coverage_study(s, model, {0.5}, 50, at_jump), std::invalid_argument);
}

TEST(Coverage, UniformDensity) {
  ExperimentSpec s;
  s.system = "beta:2";
  s.n = 2000;
  s.h = 0.05;
  s.kernel = "box1d";
  const auto res = coverage_study(s, MixingModel::geometric(1.0, 0.9), linspace(0.05, 15.0, 20), 50);
  EXPECT_EQ(res.deviations.size(), 50u);
  EXPECT_EQ(res.points.size(), 20u);
  EXPECT_TRUE(res.all_pass);
  for (std::size_t i = 1; i < res.points.size(); ++i) {
    EXPECT_LE(res.points[i].frequency, res.points[i - 1].frequency);
  }
}

TEST(TGrid, Parse) {
  const auto g = parse_t_grid("0:1:5");
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g[1], 0.25);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  EXPECT_THROW(parse_t_grid("0:1"), std::invalid_argument);
  EXPECT_THROW(parse_t_grid("1:0:5"), std::invalid_argument);
}

// Property: a check passes exactly when its value lies in its interval.
TEST(Suite, ChecksRespectBounds) {
  const auto rep = reproduce_paper_suite(7);
  EXPECT_EQ(rep.rows.size(), rep.specs.size());
  for (const auto& c : rep.checks) {
    const bool inside = std::isfinite(c.value) && c.value >= c.lower && c.value <= c.upper;
    EXPECT_EQ(c.pass, inside) << c.experiment << ' ' << c.metric;
  }
  double total = 0.0;
  for (const auto& b : rep.histogram) total += b[2];
  EXPECT_EQ(total, 100.0 * 100.0);
  std::ostringstream a, b;
  write_suite_csv(a, rep);
  write_suite_csv(b, reproduce_paper_suite(7));
  EXPECT_EQ(a.str(), b.str());
}
