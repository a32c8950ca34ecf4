// dynest: command line front end for the estimators, envelopes and experiment suite.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dynest/dynest.hpp"

namespace {

using namespace dynest;

// Experiment keys settable from flags; a flag beats the same key in --config.
struct SpecFlags {
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void add(CLI::App* app, bool with_out = true) {
    app->add_option("--config", config, "TOML-style key = value file")->check(CLI::ExistingFile);
    auto opt = [&](const std::string& key, const std::string& flag, const std::string& help) {
      options.emplace_back(key, app->add_option(flag, values[key], help));
    };
    opt("system", "--system", "beta:<b> | gauss | alphagauss:<a> | logistic:<a> | matrixbeta:<b11,b12,b21,b22>");
    opt("n", "--n", "trajectory length");
    opt("h", "--h", "bandwidth");
    opt("xi", "--xi", "bandwidth exponent, h = n^-xi");
    opt("kernel", "--kernel", "epanechnikov | box1d | box2d");
    opt("noise", "--noise", "none | uniform:<b> | gaussian:<sd>");
    opt("grid", "--grid", "grid points per axis");
    opt("grid_region", "--grid-region", "domain | support | lo:hi");
    opt("restrict", "--restrict", "extra AMEs on lo:hi of the first coordinate");
    opt("seed", "--seed", "random seed");
    opt("replications", "--replications", "independent replications");
    opt("burnin", "--burnin", "burn-in steps without a density oracle");
    opt("label", "--label", "row label");
    if (with_out) opt("out", "--out", "output CSV (default stdout)");
  }

  ExperimentSpec build() const {
    ExperimentSpec spec;
    if (!config.empty()) {
      std::ifstream in(config);
      spec.apply(parse_config(in));
    }
    for (const auto& [key, o] : options) {
      if (o->count() > 0) spec.set(key, values.at(key));
    }
    return spec;
  }
};

// Writes through `fn` to `path`, or to stdout when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  fn(out);
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const double v = detail::parse_real(tok);
    if (!(v >= 1.0) || v != std::floor(v)) throw std::invalid_argument("bad size '" + tok + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void warn_notes(const DynamicalSystem& sys, const Kernel& k) {
  for (const auto& note : sys.notes()) std::cerr << "note: " << note << '\n';
  if (auto w = k.warning()) std::cerr << "warning: " << *w << '\n';
}

int cmd_estimate(const SpecFlags& flags) {
  const auto spec = flags.build();
  const auto sys = make_system(spec.system);
  const auto kernel = make_kernel(spec.kernel);
  warn_notes(sys, kernel);
  const auto out = run_replication(spec, 0);
  emit(spec.out, [&](std::ostream& os) { write_estimate_csv(os, spec, out.grid); });
  if (!out.grid.f_true.empty()) std::cerr << "ame_f " << detail::format_double(ame(out.grid.f_hat, out.grid.f_true)) << '\n';
  const auto at = ame_vector(out.grid.t_hat, out.grid.t_true, sys.dimension());
  for (std::size_t j = 0; j < at.per_coordinate.size(); ++j) {
    std::cerr << "ame_t" << j + 1 << ' ' << detail::format_double(at.per_coordinate[j]) << '\n';
  }
  return 0;
}

int cmd_table(const std::string& specs_file, const std::string& replay, const std::string& out_path, bool reference) {
  std::vector<ExperimentSpec> specs;
  if (!specs_file.empty()) {
    std::ifstream in(specs_file);
    std::string line;
    while (std::getline(in, line)) {
      line = detail::trim(line);
      if (line.empty() || line.front() == '#') continue;
      specs.push_back(ExperimentSpec::parse(line));
    }
  }
  if (!replay.empty()) {
    std::ifstream in(replay);
    auto more = read_spec_lines(in);
    specs.insert(specs.end(), more.begin(), more.end());
  }
  if (reference) {
    const auto suite_specs = reproduce_paper_suite_specs(1);
    specs.insert(specs.end(), suite_specs.begin(), suite_specs.end());
  }
  const auto rows = run_table(specs);
  emit(out_path, [&](std::ostream& os) { write_table_csv(os, rows); });
  for (const auto& r : rows) {
    if (r.status != "ok") std::cerr << r.spec.label << ": " << r.status << '\n';
  }
  return 0;
}

int cmd_sweep(const SpecFlags& flags, const std::string& sizes, double xi) {
  const auto spec = flags.build();
  const auto res = convergence_sweep(spec, parse_sizes(sizes), xi);
  emit(spec.out, [&](std::ostream& os) { write_sweep_csv(os, spec, xi, res); });
  std::cerr << "slope_t " << detail::format_double(res.slope_t) << '\n';
  return 0;
}

int cmd_coverage(const SpecFlags& flags, const std::string& model, const std::string& t_grid, std::size_t reps,
                 const CoverageOptions& opt) {
  const auto spec = flags.build();
  const auto m = MixingModel::parse(model);
  std::vector<double> ts;
  if (t_grid.empty()) {
    const auto kernel = make_kernel(spec.kernel);
    const double u = opt.u > 0.0 ? opt.u : spec.bandwidth(kernel.scaling_exponent()) * kernel.support_diameter();
    ts = linspace(std::pow(u, opt.alpha), 15.0, 20);
  } else {
    ts = parse_t_grid(t_grid);
  }
  const auto res = coverage_study(spec, m, ts, reps, opt);
  emit(spec.out, [&](std::ostream& os) { write_coverage_csv(os, spec, m, res); });
  std::cerr << (res.all_pass ? "coverage: pass" : "coverage: FAIL") << '\n';
  return res.all_pass ? 0 : 2;
}

struct BoundsArgs {
  std::string model = "geometric:1,0.9";
  std::string kind = "density";
  std::size_t n = 50000;
  double h = 0.007;
  double beta = 0.0;
  double c_k = 2.0;
  double diam = 1.0;
  double u = 0.0;
  double alpha = 1.0;
  double inf_f = 0.5;
  double y_max = 1.0;
  double r_max = 1.0;
  double c_phi = 1.0;
  std::size_t dim = 1;
  std::string t_grid = "0:5:11";
  std::string out;
};

int cmd_bounds(const BoundsArgs& a) {
  const auto m = MixingModel::parse(a.model);
  const auto ts = parse_t_grid(a.t_grid);
  BoundParams p;
  p.n = a.n;
  p.h = a.h;
  p.beta = a.beta;
  p.c_k = a.c_k;
  p.diameter = a.diam;
  p.u = a.u > 0.0 ? a.u : a.h * a.diam;
  p.alpha = a.alpha;
  p.inf_f = a.inf_f;
  p.y_max = a.y_max;
  p.r_max = a.r_max;
  emit(a.out, [&](std::ostream& os) {
    os << "# bounds: kind=" << a.kind << " model=" << m.to_string() << " n=" << a.n << " h=" << detail::format_double(a.h)
       << " beta=" << detail::format_double(a.beta) << " cK=" << detail::format_double(a.c_k) << " u="
       << detail::format_double(p.u) << " alpha=" << detail::format_double(a.alpha) << '\n';
    os << "t,raw_bound,clipped_bound\n";
    for (double t : ts) {
      p.t = t;
      Envelope e;
      if (a.kind == "density") e = density_deviation_envelope(p, m);
      else if (a.kind == "concentration") e = concentration_bound(m, a.c_phi, a.n, t);
      else if (a.kind == "regression-bounded") e = regression_deviation_envelope(p, m, m, true);
      else if (a.kind == "regression") e = regression_deviation_envelope(p, m, m, false);
      else if (a.kind == "map") e = map_deviation_envelope(p, m, m, false, a.dim);
      else throw std::invalid_argument("unknown bound kind '" + a.kind + "'");
      os << detail::format_double(t) << ',' << detail::format_double(e.raw) << ',' << detail::format_double(e.clipped)
         << '\n';
    }
  });
  return 0;
}

struct RegularityArgs {
  std::string system = "beta:27/11";
  std::string target = "density";
  double u = 0.05;
  double h = 0.01;
  double alpha = 1.0;
  double resolution = 0.0;
  bool raw = false;
  std::string out;
};

int cmd_regularity(const RegularityArgs& a) {
  const auto sys = make_system(a.system);
  const double res = a.resolution > 0.0 ? a.resolution : a.h / 8.0;
  const auto mode = a.raw ? Threshold::raw : Threshold::condition;
  BadSetReport rep;
  if (a.target == "density") {
    rep = oscillation_bad_set([&sys](std::span<const double> x) { return sys.density(x); }, sys.domain(), a.u, a.h,
                              a.alpha, res, mode);
  } else if (a.target == "map") {
    rep = oscillation_bad_set([&sys](std::span<const double> x, std::span<double> y) { sys.apply(x, y); },
                              sys.dimension(), sys.domain(), a.u, a.h, a.alpha, res, mode);
  } else {
    throw std::invalid_argument("target must be density or map");
  }
  emit(a.out, [&](std::ostream& os) {
    os << "# regularity: system=" << sys.id() << " target=" << a.target << " u=" << detail::format_double(a.u)
       << " h=" << detail::format_double(a.h) << " alpha=" << detail::format_double(a.alpha)
       << " threshold=" << detail::format_double(rep.threshold) << '\n';
    os << "# measure: " << detail::format_double(rep.measure_estimate) << " slack: " << detail::format_double(rep.slack)
       << '\n';
    if (a.target == "density" && sys.dimension() == 1) {
      os << "# total_variation: "
         << detail::format_double(total_variation([&sys](double x) { return sys.density1(x); }, sys.domain().lo(0),
                                                  sys.domain().hi(0), res))
         << '\n';
    }
    os << "component,lo,hi\n";
    for (std::size_t i = 0; i < rep.components.size(); ++i) {
      const auto& c = rep.components[i];
      for (std::size_t j = 0; j < c.dimension(); ++j) {
        os << i << ',' << detail::format_double(c.lo(j)) << ',' << detail::format_double(c.hi(j)) << '\n';
      }
    }
  });
  return 0;
}

int cmd_suite(std::uint64_t seed, const std::string& out, const std::string& hist) {
  const auto rep = reproduce_paper_suite(seed);
  emit(out, [&](std::ostream& os) { write_suite_csv(os, rep); });
  if (!hist.empty()) emit(hist, [&](std::ostream& os) { write_histogram_csv(os, rep); });
  for (const auto& r : rep.rows) {
    if (r.status != "ok") std::cerr << r.spec.label << ": " << r.status << '\n';
  }
  for (const auto& c : rep.checks) {
    if (c.gated && !c.pass) {
      std::cerr << "FAIL " << c.experiment << ' ' << c.metric << ' ' << detail::csv_num(c.value) << " not in ["
                << detail::format_double(c.lower) << ", " << detail::format_double(c.upper) << "]\n";
    }
  }
  return rep.gated_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel estimation of invariant densities and maps of chaotic dynamical systems"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  SpecFlags est_flags;
  auto* est = app.add_subcommand("estimate", "estimate f and T on a grid and write per-point CSV");
  est_flags.add(est);

  std::string specs_file, replay, table_out;
  bool reference = false;
  auto* table = app.add_subcommand("table", "run a list of specs and write one row each");
  table->add_option("--specs", specs_file, "file with one serialized spec per line")->check(CLI::ExistingFile);
  table->add_option("--replay", replay, "re-run every '# spec:' line of a previous CSV")->check(CLI::ExistingFile);
  table->add_flag("--reference", reference, "append the reference experiments");
  table->add_option("--out", table_out, "output CSV (default stdout)");

  SpecFlags sweep_flags;
  std::string sizes = "1000,10000,100000";
  double xi = 1.0 / 3.0;
  std::string xi_text;
  auto* sweep = app.add_subcommand("sweep", "AME against n with h = n^-xi and the log-log slope");
  sweep_flags.add(sweep);
  sweep->add_option("--n-list", sizes, "comma-separated increasing sizes");
  sweep->add_option("--rate", xi_text, "bandwidth exponent xi (accepts p/q)");

  SpecFlags cov_flags;
  std::string cov_model = "geometric:1,0.9";
  std::string cov_t;
  std::size_t cov_reps = 200;
  CoverageOptions cov_opt;
  auto* cov = app.add_subcommand("coverage", "empirical exceedance frequency against the density envelope");
  cov_flags.add(cov);
  cov->add_option("--model", cov_model, "geometric:C,gamma | explicit:p0,p1,...");
  cov->add_option("--t-grid", cov_t, "a:b:steps (default u^alpha:15:20)");
  cov->add_option("--runs", cov_reps, "independent runs");
  cov->add_option("--x", cov_opt.x, "evaluation point");
  cov->add_option("--u", cov_opt.u, "bias level (default h diam)");
  cov->add_option("--alpha", cov_opt.alpha, "regularity exponent");

  BoundsArgs ba;
  auto* bounds = app.add_subcommand("bounds", "evaluate deviation envelopes over a t grid");
  bounds->add_option("--model", ba.model, "geometric:C,gamma | explicit:p0,p1,...");
  bounds->add_option("--kind", ba.kind, "density | concentration | regression | regression-bounded | map");
  bounds->add_option("--n", ba.n, "sample size");
  bounds->add_option("--h", ba.h, "bandwidth");
  bounds->add_option("--beta", ba.beta, "kernel scaling exponent");
  bounds->add_option("--cK", ba.c_k, "kernel semi-norm constant");
  bounds->add_option("--diam", ba.diam, "kernel support diameter");
  bounds->add_option("--u", ba.u, "bias level (default h diam)");
  bounds->add_option("--alpha", ba.alpha, "regularity exponent");
  bounds->add_option("--inf-f", ba.inf_f, "lower bound of the density");
  bounds->add_option("--y-max", ba.y_max, "bound on |Y|");
  bounds->add_option("--r-max", ba.r_max, "bound on |r|");
  bounds->add_option("--c-phi", ba.c_phi, "C(phi) for the concentration bound");
  bounds->add_option("--dim", ba.dim, "dimension for the map envelope");
  bounds->add_option("--t-grid", ba.t_grid, "a:b:steps");
  bounds->add_option("--out", ba.out, "output CSV (default stdout)");

  RegularityArgs ra;
  auto* reg = app.add_subcommand("regularity", "scan the oscillation bad set of a density or map");
  reg->add_option("--system", ra.system, "system spec");
  reg->add_option("--target", ra.target, "density | map");
  reg->add_option("--u", ra.u, "level u");
  reg->add_option("--h", ra.h, "radius h");
  reg->add_option("--alpha", ra.alpha, "exponent alpha");
  reg->add_option("--resolution", ra.resolution, "grid step (default h/8)");
  reg->add_flag("--raw", ra.raw, "threshold u instead of u^alpha");
  reg->add_option("--out", ra.out, "output CSV (default stdout)");

  std::uint64_t suite_seed = 7;
  std::string suite_out, suite_hist;
  auto* suite = app.add_subcommand("paper-suite", "run every reference experiment and compare");
  suite->add_option("--seed", suite_seed, "random seed");
  suite->add_option("--out", suite_out, "comparison CSV (default stdout)");
  suite->add_option("--hist", suite_hist, "histogram CSV of the 2-D coordinate differences");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*est) return cmd_estimate(est_flags);
    if (*table) return cmd_table(specs_file, replay, table_out, reference);
    if (*sweep) {
      if (!xi_text.empty()) xi = detail::parse_real(xi_text);
      return cmd_sweep(sweep_flags, sizes, xi);
    }
    if (*cov) return cmd_coverage(cov_flags, cov_model, cov_t, cov_reps, cov_opt);
    if (*bounds) return cmd_bounds(ba);
    if (*reg) return cmd_regularity(ra);
    if (*suite) return cmd_suite(suite_seed, suite_out, suite_hist);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
