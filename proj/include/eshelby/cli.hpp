#pragma once

// Command-line front end. run() is the whole program minus main(), so tests
// can drive it in-process.

#include <fftw3.h>

#include <chrono>
#include <cfloat>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eshelby/emt_bounds.hpp"
#include "eshelby/error.hpp"
#include "eshelby/geometry.hpp"
#include "eshelby/json_io.hpp"
#include "eshelby/potentials.hpp"
#include "eshelby/tensor_core.hpp"
#include "eshelby/uniformity.hpp"
#include "eshelby/variational.hpp"

namespace eshelby {

inline constexpr const char* kSchema = "eshelby-lab/1";
inline constexpr const char* kVersion = "1.0.0";

struct RunConfig {
  std::string command;
  MaterialPair pair{1.0, 1.0, 2.0, 2.0};
  int dim = 3;
  std::string shape;
  bool normalize = false;
  std::string method = "constant_strain";
  std::string moments = "analytic";
  int level = 4;
  int grid = 32;
  int samples = 80;
  std::uint64_t seed = 1;
  std::string loading = "hydro";
  std::string b1, b2;
  double from = 1.0, to = 3.0;
  int steps = 5;
  std::string output;
  std::string csv;
  bool timing = false;

  bool operator==(const RunConfig&) const = default;
};

inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["pair"] = to_json(c.pair);
  j["dim"] = c.dim;
  j["shape"] = c.shape;
  j["normalize"] = c.normalize;
  j["method"] = c.method;
  j["moments"] = c.moments;
  j["level"] = c.level;
  j["grid"] = c.grid;
  j["samples"] = c.samples;
  j["seed"] = c.seed;
  j["loading"] = c.loading;
  j["b1"] = c.b1;
  j["b2"] = c.b2;
  j["from"] = c.from;
  j["to"] = c.to;
  j["steps"] = c.steps;
  j["output"] = c.output;
  j["csv"] = c.csv;
  j["timing"] = c.timing;
  return j;
}

inline RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  RunConfig c;
  auto take = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(std::string("config: bad type for \"") + key + "\"");
    }
  };
  take("command", c.command);
  take("dim", c.dim);
  if (j.contains("pair")) c.pair = pair_from_json(j["pair"], c.dim);
  c.pair.dim = c.dim;
  take("shape", c.shape);
  take("normalize", c.normalize);
  take("method", c.method);
  take("moments", c.moments);
  take("level", c.level);
  take("grid", c.grid);
  take("samples", c.samples);
  take("seed", c.seed);
  take("loading", c.loading);
  take("b1", c.b1);
  take("b2", c.b2);
  take("from", c.from);
  take("to", c.to);
  take("steps", c.steps);
  take("output", c.output);
  take("csv", c.csv);
  take("timing", c.timing);
  return c;
}

namespace cli_detail {

inline Shape resolve_shape(const RunConfig& c) {
  if (c.shape.empty()) throw ValidationError("--shape is required");
  Shape s = parse_shape(c.shape);
  return c.normalize ? normalize_volume(s) : s;
}

inline void require_unit_volume(const Shape& s) {
  const double v = s.volume();
  if (std::abs(v - 1.0) > 1e-6)
    throw ValidationError("EMT needs a unit-volume shape (volume " + format_number(v) + "); pass --normalize");
}

/// Machine-level tolerance for closed-form values.
inline double exact_tol(double v) { return 8.0 * DBL_EPSILON * std::max(1.0, std::abs(v)); }

struct EmtOutcome {
  EMTReport<3> emt;
  BoundReport bounds;
  GapErrors errors;
};

inline EmtOutcome compute_emt(const RunConfig& c, const Shape& shape) {
  require_unit_volume(shape);
  EmtOutcome o;
  if (c.method == "constant_strain") {
    if (c.moments == "analytic")
      o.emt = emt_constant_strain(shape, c.pair);
    else if (c.moments == "quadrature")
      o.emt = emt_constant_strain_quadrature(shape, c.pair, c.level, c.seed);
    else
      throw ValidationError("--moments must be analytic or quadrature");
  } else if (c.method == "variational") {
    o.emt = emt_variational(shape, c.pair, c.grid);
  } else {
    throw ValidationError("--method must be constant_strain or variational");
  }
  o.bounds = bound_report(o.emt.M, c.pair);
  o.errors = gap_errors(o.emt, c.pair);
  return o;
}

inline Json bounds_json(const BoundReport& b) {
  return Json{{"K1", b.K1},       {"K2", b.K2},       {"tr1", b.tr1},
              {"tr2", b.tr2},     {"gap1", b.gap1},   {"gap2", b.gap2},
              {"total_gap", b.total_gap}, {"trace_inverse", b.trace_inverse},
              {"condition", b.condition}, {"direction", b.direction}};
}

inline void emt_results(const EmtOutcome& o, Json& results, Json& tol) {
  results["method"] = o.emt.method;
  results["M"] = to_json(o.emt.M);
  results["symmetry_defect"] = o.emt.symmetry_defect;
  results["definiteness_sign"] = o.emt.definiteness_sign;
  results["volume"] = o.emt.volume;
  const Json b = bounds_json(o.bounds);
  for (auto it = b.begin(); it != b.end(); ++it) results[it.key()] = it.value();
  tol["M"] = o.emt.error_estimate;
  tol["K1"] = exact_tol(o.bounds.K1);
  tol["K2"] = exact_tol(o.bounds.K2);
  tol["gap1"] = o.errors.gap1;
  tol["gap2"] = o.errors.gap2;
  tol["total_gap"] = o.errors.total_gap;
  tol["epsilon_num_gap1"] = epsilon_num(o.errors.gap1);
  tol["epsilon_num_gap2"] = epsilon_num(o.errors.gap2);
}

inline Json run_bounds(const RunConfig& c, Json& tol) {
  Json r;
  MaterialPair p = c.pair;
  p.dim = c.dim;
  const TraceBounds k = trace_bound_constants(p, c.dim);
  r["K1"] = k.K1;
  r["K2"] = k.K2;
  r["kappa_conv"] = p.kappa_conv();
  r["kappa_conv_tilde"] = p.kappa_conv_t();
  r["kappa_convex"] = p.kappa_convex();
  r["kappa_convex_tilde"] = p.kappa_convex_t();
  tol["K1"] = exact_tol(k.K1);
  tol["K2"] = exact_tol(k.K2);
  if (!c.shape.empty()) {
    if (c.dim != 3) throw ValidationError("shape-based bounds are three-dimensional");
    const Shape s = resolve_shape(c);
    r["shape"] = s.to_string();
    emt_results(compute_emt(c, s), r, tol);
  }
  return r;
}

inline void dump_variational_fields(const RunConfig& c, const Shape& s) {
  VariationalProblem prob(s, c.pair, c.grid);
  std::ofstream out(c.csv);
  if (!out) throw FileError("cannot write '" + c.csv + "'");
  out.precision(17);
  out << "loading,cell,strain0,strain1,strain2,strain3,strain4,strain5\n";
  const auto& basis = make_basis<3>();
  for (int l = 0; l < 6; ++l) {
    const Maximizer m = prob.maximize_EA(basis.elements[l]);
    const GreenApplication g = prob.green_apply(m.P);
    Coords6 a = Coords6::Zero();
    a(l) = 1.0;
    for (std::size_t cell = 0; cell < g.strain.size(); ++cell) {
      if (prob.grid().fractions[cell] <= 0.0) continue;
      const Coords6 e = a + g.strain[cell];
      out << l << ',' << cell;
      for (int k = 0; k < 6; ++k) out << ',' << e(k);
      out << '\n';
    }
  }
}

inline Json run_emt(const RunConfig& c, Json& tol) {
  const Shape s = resolve_shape(c);
  Json r;
  r["shape"] = s.to_string();
  emt_results(compute_emt(c, s), r, tol);
  if (c.method == "variational") tol["reference_grid"] = reference_grid(c.grid);
  if (!c.csv.empty()) {
    if (c.method != "variational") throw ValidationError("--csv field dumps exist for the variational method only");
    dump_variational_fields(c, s);
  }
  return r;
}

inline std::vector<Vec3> interior_samples(const Shape& s, const ShapePotentials& pot, int count, std::uint64_t seed) {
  return sample_interior(s, pot.quad(), count, seed);
}

inline Json run_uniformity(const RunConfig& c, Json& tol) {
  const Shape s = resolve_shape(c);
  const Mat3 a = parse_loading(c.loading);
  if (c.level < 2) throw ValidationError("--level must be >= 2");
  auto solve = [&](int level) {
    ShapePotentials pot(s, level);
    const auto fit = interior_samples(s, pot, c.samples, c.seed);
    const auto fresh = interior_samples(s, pot, c.samples, c.seed + 1);
    return uniformity_residual(pot, a, c.pair, fit, fresh);
  };
  const StrainSolution sol = solve(c.level);
  const StrainSolution coarse = solve(c.level - 1);
  const SymMat3 b = SymMat3::symmetrized(sol.B);
  Json r;
  r["shape"] = s.to_string();
  r["pair"] = to_json(c.pair);
  r["A"] = to_json(SymMat3::from_matrix(a));
  r["B"] = to_json(b);
  r["omega"] = matrix_to_json(sol.omega);
  r["v"] = std::vector<double>{sol.v(0), sol.v(1), sol.v(2)};
  r["residual"] = sol.residual;
  r["eigen_class"] = to_string(eigen_class(b));
  r["condition"] = sol.condition;
  tol["B"] = (sol.B - coarse.B).norm();
  tol["residual"] = std::abs(sol.residual - coarse.residual);
  if (s.is_ellipsoid()) {
    const StrainSolution exact = interior_strain_ellipsoid(a, analytic_ellipsoid_moments(s), c.pair);
    r["B_constant_strain"] = to_json(SymMat3::symmetrized(exact.B));
    tol["B_constant_strain"] = 1e-12;
  }
  return r;
}

inline Json run_potential_fit(const RunConfig& c, Json& tol) {
  const Shape s = resolve_shape(c);
  if (c.level < 2) throw ValidationError("--level must be >= 2");
  auto fit_at = [&](int level, std::vector<Vec3>* pts, std::vector<double>* vals) {
    ShapePotentials pot(s, level);
    const auto samples = interior_samples(s, pot, c.samples, c.seed);
    const QuadraticFit f = quadratic_fit_w(pot, samples);
    if (pts) {
      *pts = samples;
      vals->resize(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) (*vals)[i] = pot.w(samples[i]);
    }
    return f;
  };
  std::vector<Vec3> pts;
  std::vector<double> vals;
  const QuadraticFit fine = fit_at(c.level, c.csv.empty() ? nullptr : &pts, &vals);
  const QuadraticFit coarse = fit_at(c.level - 1, nullptr, nullptr);
  Json r;
  r["shape"] = s.to_string();
  r["rel_residual"] = fine.rel_residual;
  r["coeffs"] = std::vector<double>(fine.coeffs.data(), fine.coeffs.data() + 10);
  r["coeff_order"] = std::vector<std::string>{"1", "x", "y", "z", "xx", "yy", "zz", "xy", "xz", "yz"};
  r["samples"] = c.samples;
  r["quadratic"] = fine.rel_residual < 1e-3;
  tol["rel_residual"] = std::abs(fine.rel_residual - coarse.rel_residual);
  tol["coeffs"] = (fine.coeffs - coarse.coeffs).norm();
  if (!c.csv.empty()) {
    PotentialSamples ps;
    ps.kind = "w";
    ps.points = pts;
    for (double v : vals) ps.values.push_back({v});
    write_samples_csv(ps, c.csv);
  }
  return r;
}

inline Json run_pencil(const RunConfig& c, Json& tol) {
  if (c.b1.empty() || c.b2.empty()) throw ValidationError("pencil needs --b1 and --b2");
  const Mat3 b1 = parse_matrix3(c.b1, "--b1"), b2 = parse_matrix3(c.b2, "--b2");
  const PencilReport p = pencil_check(b1, b2);
  Json r;
  r["always_multiple"] = p.always_multiple;
  r["diagonalizer"] = p.diagonalizer ? matrix_to_json(*p.diagonalizer) : Json(nullptr);
  r["witness_t"] = p.witness_t ? Json(*p.witness_t) : Json(nullptr);
  r["discriminant"] = p.discriminant;
  r["eigen_class_b1"] = to_string(eigen_class(SymMat3::from_matrix(b1)));
  r["eigen_class_b2"] = to_string(eigen_class(SymMat3::from_matrix(b2)));
  tol["discriminant_relative"] = 1e-10;
  return r;
}

/// Prolate family ellipsoid(r, 1, 1) at unit volume for r in [from, to].
inline Json run_sweep(const RunConfig& c, Json& tol) {
  if (c.steps < 1) throw ValidationError("--steps must be >= 1");
  if (!(c.from > 0.0) || !(c.to >= c.from)) throw ValidationError("sweep needs 0 < from <= to");
  if (c.method != "constant_strain") throw ValidationError("sweep supports --method constant_strain");
  Json rows = Json::array();
  Json errs = Json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "aspect_ratio,gap1,gap2\n";
  for (int i = 0; i < c.steps; ++i) {
    const double r = c.steps == 1 ? c.from : c.from + (c.to - c.from) * i / (c.steps - 1);
    const Shape s = normalize_volume(Shape::ellipsoid(r, 1.0, 1.0));
    const EmtOutcome o = compute_emt(c, s);
    rows.push_back(Json{{"aspect_ratio", r}, {"gap1", o.bounds.gap1}, {"gap2", o.bounds.gap2}});
    errs.push_back(Json{{"gap1", o.errors.gap1}, {"gap2", o.errors.gap2}});
    csv << r << ',' << o.bounds.gap1 << ',' << o.bounds.gap2 << '\n';
  }
  if (!c.csv.empty()) {
    std::ofstream out(c.csv);
    if (!out) throw FileError("cannot write '" + c.csv + "'");
    out << csv.str();
  }
  tol["rows"] = errs;
  return Json{{"family", "ellipsoid(r,1,1) normalized"}, {"rows", rows}};
}

inline Json versions_json() {
  std::string eigen = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  return Json{{"eshelby-lab", kVersion}, {"eigen", eigen}, {"fftw", std::string(fftw_version)}};
}

}  // namespace cli_detail

/// Executes one configured command and returns the report.
inline Json execute(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  Json tol = Json::object();
  Json results;
  if (c.command == "bounds")
    results = cli_detail::run_bounds(c, tol);
  else if (c.command == "emt")
    results = cli_detail::run_emt(c, tol);
  else if (c.command == "uniformity")
    results = cli_detail::run_uniformity(c, tol);
  else if (c.command == "potential-fit")
    results = cli_detail::run_potential_fit(c, tol);
  else if (c.command == "pencil")
    results = cli_detail::run_pencil(c, tol);
  else if (c.command == "sweep")
    results = cli_detail::run_sweep(c, tol);
  else
    throw ValidationError("unknown command '" + c.command + "'");
  Json report;
  report["schema"] = kSchema;
  report["command"] = c.command;
  report["inputs"] = config_to_json(c);
  report["results"] = results;
  report["tolerances"] = tol;
  report["versions"] = cli_detail::versions_json();
  if (c.timing)
    report["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  std::string pair_text, config_path;

  CLI::App app{"Elastic inclusions: EMTs, trace bounds and uniformity checks", "eshelby_cli"};
  app.require_subcommand(0, 1);
  app.add_option("--config", config_path, "Run a saved config (the \"inputs\" object of a report)");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--pair", pair_text, "Material pair: inline JSON or a JSON file");
    sub->add_option("-o,--output", cfg.output, "Write the JSON report here instead of stdout");
    sub->add_flag("--timing", cfg.timing, "Include wall_time in the report");
  };
  auto shape_opts = [&](CLI::App* sub) {
    sub->add_option("--shape", cfg.shape, "ball:r | ellipsoid:a,b,c | cuboid:lx,ly,lz | superellipsoid:a,b,c,p | mesh:file.off[@s]");
    sub->add_flag("--normalize", cfg.normalize, "Rescale the shape to unit volume");
  };
  auto emt_opts = [&](CLI::App* sub) {
    sub->add_option("--method", cfg.method, "constant_strain | variational")
        ->check(CLI::IsMember({"constant_strain", "variational"}));
    sub->add_option("--moments", cfg.moments, "analytic | quadrature (constant_strain)")
        ->check(CLI::IsMember({"analytic", "quadrature"}));
    sub->add_option("--level", cfg.level, "Surface quadrature level")->check(CLI::Range(1, 8));
    sub->add_option("--grid", cfg.grid, "Voxel grid size (variational)")->check(CLI::Range(16, 64));
    sub->add_option("--seed", cfg.seed, "Seed for sample points");
  };

  auto* bounds = app.add_subcommand("bounds", "K1, K2 and, with --shape, the EMT gaps");
  common(bounds);
  shape_opts(bounds);
  emt_opts(bounds);
  bounds->add_option("--dim", cfg.dim, "Dimension (2 or 3)")->check(CLI::IsMember({2, 3}));

  auto* emt = app.add_subcommand("emt", "Elastic moment tensor of a shape");
  common(emt);
  shape_opts(emt);
  emt_opts(emt);
  emt->add_option("--csv", cfg.csv, "Dump cell strains of the variational maximizers");

  auto* uni = app.add_subcommand("uniformity", "Least-squares uniform-strain residual");
  common(uni);
  shape_opts(uni);
  uni->add_option("--loading", cfg.loading, "hydro | shear:ij | inline 3x3 JSON");
  uni->add_option("--level", cfg.level, "Surface quadrature level")->check(CLI::Range(2, 8));
  uni->add_option("--samples", cfg.samples, "Interior samples")->check(CLI::Range(60, 100000));
  uni->add_option("--seed", cfg.seed, "Seed for sample points");

  auto* pfit = app.add_subcommand("potential-fit", "Quadratic fit of the Newtonian potential");
  common(pfit);
  shape_opts(pfit);
  pfit->add_option("--level", cfg.level, "Surface quadrature level")->check(CLI::Range(2, 8));
  pfit->add_option("--samples", cfg.samples, "Interior samples")->check(CLI::Range(30, 100000));
  pfit->add_option("--seed", cfg.seed, "Seed for sample points");
  pfit->add_option("--csv", cfg.csv, "Dump the w samples (x,y,z,value,kind)");

  auto* pencil = app.add_subcommand("pencil", "Multiple-eigenvalue test for B1 + t B2");
  common(pencil);
  pencil->add_option("--b1", cfg.b1, "3x3 JSON array")->required();
  pencil->add_option("--b2", cfg.b2, "3x3 JSON array")->required();

  auto* sweep = app.add_subcommand("sweep", "Gaps along the prolate ellipsoid family");
  common(sweep);
  emt_opts(sweep);
  sweep->add_option("--from", cfg.from, "First aspect ratio");
  sweep->add_option("--to", cfg.to, "Last aspect ratio");
  sweep->add_option("--steps", cfg.steps, "Number of aspect ratios");
  sweep->add_option("--csv", cfg.csv, "CSV output (aspect_ratio,gap1,gap2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) {
      if (!app.get_subcommands().empty()) throw ValidationError("--config cannot be combined with a subcommand");
      cfg = config_from_json(read_json_file(config_path));
    } else {
      if (app.get_subcommands().empty()) {
        err << app.help();
        return 2;
      }
      cfg.command = app.get_subcommands().front()->get_name();
      if (!pair_text.empty()) cfg.pair = parse_pair(pair_text, cfg.dim);
      cfg.pair.dim = cfg.dim;
    }
    cfg.pair.validate();
    const Json report = execute(cfg);
    const std::string text = report.dump(2) + "\n";
    if (cfg.output.empty()) {
      out << text;
    } else {
      std::ofstream f(cfg.output);
      if (!f) throw FileError("cannot write '" + cfg.output + "'");
      f << text;
    }
    return 0;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace eshelby
