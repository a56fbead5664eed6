#include "cycleshift/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "cycleshift/errors.hpp"

namespace cycleshift {

namespace {

struct Options {
  std::string problem;
  std::string config;
  std::vector<std::string> params;
  std::string out;
  std::string csv;
  int threads = 0;
  std::vector<double> eps;
  std::string mode = "section";
  std::string source = "computed";
  bool exact_shift = false;
  double r0 = 0.0;
  int grid = 64;
  int samples = 64;
  std::vector<std::string> inputs;
};

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorKind::InputDomain, what); }

double number_field(const Json& doc, const std::string& key) {
  if (!doc.at(key).is_number()) usage(key + ": expected a number");
  const double v = doc.at(key).get<double>();
  if (!std::isfinite(v)) usage(key + ": must be finite");
  return v;
}

Vector vector_field(const Json& doc, const std::string& key) {
  const Json& a = doc.at(key);
  if (!a.is_array() || a.empty()) usage(key + ": expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) usage(key + "[" + std::to_string(i) + "]: expected a number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

std::vector<std::vector<Monomial>> monomials(const Json& poly) {
  if (!poly.is_array() || poly.empty()) usage("f.polynomial: expected one term list per component");
  std::vector<std::vector<Monomial>> terms;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const std::string where = "f.polynomial[" + std::to_string(i) + "]";
    if (!poly[i].is_array()) usage(where + ": expected a list of [coefficient, exponents...] terms");
    std::vector<Monomial> component;
    for (const auto& term : poly[i]) {
      if (!term.is_array() || term.size() != poly.size() + 1) {
        usage(where + ": each term is [coefficient, e1, ..., e" + std::to_string(poly.size()) + "]");
      }
      Monomial m;
      if (!term[0].is_number()) usage(where + ": coefficient must be a number");
      m.coefficient = term[0].get<double>();
      for (std::size_t k = 1; k < term.size(); ++k) {
        if (!term[k].is_number_integer()) usage(where + ": exponents must be integers");
        m.exponents.push_back(term[k].get<int>());
      }
      component.push_back(std::move(m));
    }
    terms.push_back(std::move(component));
  }
  return terms;
}

Params parse_params(const std::vector<std::string>& items) {
  Params out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) usage("param: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      usage("param " + key + ": '" + text + "' is not a number");
    }
    out[key] = value;
  }
  return out;
}

struct Resolved {
  ProblemDefinition definition;
  std::string origin;
  Json identity;
};

Resolved resolve_problem(const Options& o) {
  if (o.problem.empty() == o.config.empty()) usage("problem: give exactly one of --problem and --config");
  const Params overrides = parse_params(o.params);
  Resolved r;
  if (!o.problem.empty()) {
    r.definition = registry_problem(o.problem, overrides);
    r.origin = "registry";
    r.identity = {{"name", o.problem}, {"params", Json::object()}};
    for (const auto& [k, v] : r.definition.params) r.identity["params"][k] = v;
    return r;
  }
  std::ifstream in(o.config);
  if (!in) usage("config: cannot read '" + o.config + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    usage("config: malformed JSON in '" + o.config + "': " + e.what());
  }
  if (!overrides.empty()) {
    if (!doc.contains("params")) doc["params"] = Json::object();
    for (const auto& [k, v] : overrides) doc["params"][k] = v;
  }
  r.definition = problem_from_config(doc);
  r.origin = "config";
  r.identity = doc;
  return r;
}

int thread_count(int flag) {
  if (flag < 0) usage("threads: must be positive");
  if (flag == 0) return default_thread_count();
  int n = flag;
  if (const char* env = std::getenv("CYCLESHIFT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

SweepConfig sweep_config(const Options& o) {
  SweepConfig c;
  c.eps = o.eps;
  c.mode = surface_mode_from_string(o.mode);
  c.source = solution_source_from_string(o.source);
  c.exact_shift = o.exact_shift;
  c.r0 = o.r0;
  c.grid = o.grid;
  c.threads = thread_count(o.threads);
  if (c.exact_shift && c.mode != SurfaceMode::section) {
    usage("exact-shift: the closed-form shift is defined for section mode only");
  }
  validate(c);
  return c;
}

Json metadata(const std::string& command, const Resolved& r, const std::optional<SurfaceMode>& mode) {
  Json m;
  m["schema"] = kReportSchema;
  m["tool"] = "cycleshift";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["tolerances"] = {{"integration", kDefaultTolerance},
                     {"cycle_newton", CycleOptions{}.tol},
                     {"shooting", ShootingOptions{}.tol},
                     {"shift", ShiftOptions{}.tol},
                     {"quadrature_abs", 1e-11},
                     {"transversality", kTransversalityThreshold},
                     {"cluster", kDefaultClusterTol}};
  m["surface_mode"] = mode ? Json(to_string(*mode)) : Json(nullptr);
  Json p;
  p["name"] = r.definition.name;
  p["origin"] = r.origin;
  p["description"] = r.definition.description;
  p["params"] = Json::object();
  for (const auto& [k, v] : r.definition.params) p["params"][k] = v;
  p["hash"] = "fnv1a:" + hex64(fnv1a(dump(r.identity)));
  m["problem"] = p;
  return m;
}

Json error_json(const Error& e) {
  Json out = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
  out["value"] = std::isfinite(e.value()) ? Json(e.value()) : Json(nullptr);
  return out;
}

std::string csv_path_for(const Options& o) {
  if (!o.csv.empty()) return o.csv;
  if (o.out.empty()) return {};
  const auto dot = o.out.rfind('.');
  const auto slash = o.out.find_last_of('/');
  const std::string stem = (dot == std::string::npos || (slash != std::string::npos && dot < slash))
                               ? o.out
                               : o.out.substr(0, dot);
  return stem + ".csv";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InputDomain, "out: cannot write '" + path + "'");
  f << text;
}

/// Writes the document (and the optional CSV) and fills the manifest.
void emit(Json& doc, const Options& o, const std::string& csv_path, const std::string& csv,
          std::ostream& out) {
  Json files = Json::array();
  files.push_back({{"path", o.out.empty() ? "-" : o.out}, {"kind", "json"}});
  if (!csv_path.empty()) files.push_back({{"path", csv_path}, {"kind", "csv"}});
  doc["files"] = files;
  if (!csv_path.empty()) write_file(csv_path, csv);
  if (o.out.empty()) {
    out << dump(doc);
  } else {
    write_file(o.out, dump(doc));
  }
}

std::vector<double> sample_times(double period, int m) {
  std::vector<double> t(m);
  for (int j = 0; j < m; ++j) t[j] = period * j / m;
  return t;
}

Json cycle_json(const ProblemInstance& inst) {
  Json c;
  c["period"] = inst.cycle.period();
  c["anchor"] = to_json(inst.cycle.anchor());
  c["phase_offset"] = inst.phase_offset;
  c["newton_iterations"] = inst.cycle.iterations();
  c["newton_residual"] = inst.cycle.residual();
  c["closure_defect"] = inst.cycle.closure_defect();
  return c;
}

Json multipliers_json(const std::vector<Multiplier>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) {
    out.push_back({{"re", m.value.real()}, {"im", m.value.imag()}, {"multiplicity", m.multiplicity}});
  }
  return out;
}

int run_floquet(const Options& o, std::ostream& out) {
  const Resolved r = resolve_problem(o);
  if (o.samples < 2) usage("samples: needs at least 2");
  Json doc;
  doc["metadata"] = metadata("floquet", r, std::nullopt);
  Json payload;
  std::ostringstream csv;
  int status = kExitOk;
  try {
    const ProblemInstance inst = instantiate(r.definition);
    payload["cycle"] = cycle_json(inst);
    const MonodromyData mono = monodromy(inst.cycle);
    const NondegeneracyCert cert = check_nondegenerate(mono);
    payload["monodromy"] = {{"matrix", to_json(mono.matrix)},
                            {"multipliers", multipliers_json(mono.multipliers)},
                            {"liouville_determinant", liouville_determinant(inst.cycle)}};
    payload["nondegeneracy"] = {{"nondegenerate", cert.nondegenerate},
                                {"unit_multiplier_multiplicity", cert.unit_multiplier_multiplicity},
                                {"gap", cert.gap}};
    const FloquetBasis basis = floquet_basis(inst.cycle);
    const std::vector<double> t = sample_times(inst.cycle.period(), o.samples);
    Json adjoint = Json::array();
    Json entries = Json::array();
    csv << "# cycleshift floquet, problem " << r.definition.name << "\n";
    csv << "# comma separated; gnuplot: set datafile separator ','\n";
    csv << "# t";
    for (const auto& e : basis.entries) {
      for (int k = 0; k < inst.cycle.dimension(); ++k) csv << ',' << e.label() << '_' << k;
    }
    csv << "\n";
    for (const auto& e : basis.entries) {
      adjoint.push_back({{"label", e.label()}, {"value", e.multiplier()}});
      Json samples = Json::array();
      for (double s : t) samples.push_back(to_json(e(s)));
      entries.push_back({{"label", e.label()},
                         {"multiplier", e.multiplier()},
                         {"periodic", e.periodic()},
                         {"normalization", e.normalization()},
                         {"initial", to_json(e.initial())},
                         {"samples", samples}});
    }
    for (double s : t) {
      csv << format_real(s);
      for (const auto& e : basis.entries) {
        const Vector z = e(s);
        for (int k = 0; k < z.size(); ++k) csv << ',' << format_real(z[k]);
      }
      csv << "\n";
    }
    payload["adjoint"] = {{"monodromy", to_json(basis.adjoint_monodromy)},
                          {"multipliers", adjoint},
                          {"basis_condition", basis.condition}};
    payload["sample_times"] = t;
    payload["eigenfunctions"] = entries;
    payload["diagnostics"] = to_json(floquet_diagnostics(basis, inst.cycle));
    doc["status"] = "ok";
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InputDomain) throw;
    doc["status"] = "failed";
    doc["error"] = error_json(e);
    status = kExitFailure;
  }
  doc["payload"] = payload;
  emit(doc, o, o.csv, csv.str(), out);
  return status;
}

Json bifurcation_json(const ProblemInstance& inst, const FloquetBasis& basis, const std::vector<double>& t,
                      const std::optional<PeriodicSolution>& x_eps, double delta) {
  Json out;
  out["t"] = t;
  Json mp = Json::object();
  Json proj = Json::object();
  for (const auto& e : basis.non_periodic()) {
    Json values = Json::array();
    Json pvalues = Json::array();
    for (double s : t) {
      values.push_back(mperp(e, inst.cycle, inst.problem, s));
      if (x_eps) pvalues.push_back(scalar_projection(*x_eps, delta, e, inst.cycle, s));
    }
    mp[e.label()] = values;
    if (x_eps) proj[e.label()] = pvalues;
  }
  out["mperp"] = mp;
  out["scalar_projection"] = proj;
  Json malkin_values = Json::array();
  for (double s : t) malkin_values.push_back(malkin(basis.periodic(), inst.cycle, inst.problem, s));
  out["malkin"] = malkin_values;
  out["malkin_at_zero"] = malkin(basis.periodic(), inst.cycle, inst.problem, 0.0);
  return out;
}

int run_analyze(const Options& o, std::ostream& out) {
  if (o.eps.size() != 1) usage("eps: analyze takes exactly one value");
  const Resolved r = resolve_problem(o);
  const SweepConfig config = sweep_config(o);
  const double eps = config.eps.front();

  Json doc;
  doc["metadata"] = metadata("analyze", r, config.mode);
  Json payload;
  payload["eps"] = eps;
  payload["source"] = to_string(config.source);
  payload["exact_shift"] = config.exact_shift;
  payload["grid"] = config.grid;
  std::ostringstream csv;
  int status = kExitOk;
  try {
    const ProblemInstance inst = instantiate(r.definition);
    payload["cycle"] = cycle_json(inst);
    const FloquetBasis basis = floquet_basis(inst.cycle);
    payload["diagnostics"] = to_json(floquet_diagnostics(basis, inst.cycle));
    const std::vector<double> t = sample_times(inst.cycle.period(), config.grid);
    const double r0 = config.r0 > 0.0 ? config.r0 : default_r0(inst.cycle);
    payload["r0"] = r0;

    std::optional<PeriodicSolution> x_eps;
    std::optional<double> delta;
    try {
      x_eps = config.source == SolutionSource::exact ? PeriodicSolution::exact(inst.problem, eps)
                                                     : find_periodic_solution(inst.problem, eps, inst.cycle);
      payload["solution"] = {{"source", x_eps->source()},
                             {"initial", to_json(x_eps->initial())},
                             {"residual", x_eps->residual()},
                             {"iterations", x_eps->iterations()},
                             {"jacobian_condition", x_eps->jacobian_condition()},
                             {"warnings", x_eps->warnings()}};
      const Surface surface = build_surface(inst.cycle, std::nullopt, config.mode);
      payload["surface"] = {{"mode", to_string(surface.mode())},
                            {"basis", to_json(surface.basis())},
                            {"margin", surface.margin()}};
      if (config.exact_shift) {
        if (!inst.problem.exact_shift) usage("exact-shift: problem has no closed-form shift");
        delta = inst.problem.exact_shift(eps);
        payload["shift"] = {{"delta", *delta}, {"closed_form", true}};
      } else {
        const ShiftSolution s = solve_shift(*x_eps, surface, r0, config.shift);
        delta = s.delta;
        payload["shift"] = {{"delta", s.delta},
                            {"v", to_json(s.v)},
                            {"residual", s.residual},
                            {"iterations", s.iterations},
                            {"closed_form", false}};
      }
      // Report the shift in the other surface mode as well.
      const SurfaceMode other = config.mode == SurfaceMode::section ? SurfaceMode::flowed : SurfaceMode::section;
      Json cmp = {{"mode", to_string(other)}};
      try {
        const ShiftSolution s = solve_shift(*x_eps, build_surface(inst.cycle, std::nullopt, other), r0, config.shift);
        cmp["delta"] = s.delta;
        cmp["difference"] = s.delta - *delta;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::InputDomain) throw;
        cmp["error"] = error_json(e);
      }
      payload["other_mode_shift"] = cmp;

      const DeviationProfile shifted = shifted_deviation(*x_eps, inst.cycle, *delta, config.grid);
      const DeviationProfile unshifted = shifted_deviation(*x_eps, inst.cycle, 0.0, config.grid);
      payload["deviation"] = {{"t", shifted.t},
                              {"shifted", shifted.d},
                              {"unshifted", unshifted.d},
                              {"sup_shifted", shifted.sup},
                              {"sup_unshifted", unshifted.sup},
                              {"sup_ratio_shifted", shifted.sup_ratio},
                              {"sup_ratio_unshifted", unshifted.sup_ratio}};
      csv << "# cycleshift analyze, problem " << r.definition.name << ", eps " << format_real(eps)
          << ", mode " << to_string(config.mode) << "\n";
      csv << "# comma separated; gnuplot: set datafile separator ','\n";
      csv << "# t,d_shifted,d_unshifted\n";
      for (std::size_t j = 0; j < shifted.t.size(); ++j) {
        csv << format_real(shifted.t[j]) << ',' << format_real(shifted.d[j]) << ','
            << format_real(unshifted.d[j]) << "\n";
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InputDomain) throw;
      doc["status"] = "failed";
      doc["error"] = error_json(e);
      status = kExitFailure;
    }

    payload["bifurcation"] = bifurcation_json(inst, basis, t, x_eps, delta.value_or(0.0));

    Json fv;
    try {
      const FirstVariation y0 = first_variation(inst.cycle, inst.problem, basis.periodic());
      Json samples = Json::array();
      double worst = 0.0;
      for (double s : t) {
        samples.push_back(to_json(y0(s)));
        if (x_eps && delta) {
          const Vector scaled = ((*x_eps)(s + *delta) - inst.cycle.state(s)) / eps;
          worst = std::max(worst, (scaled - y0(s)).norm());
        }
      }
      fv = {{"available", true}, {"initial", to_json(y0.initial())}, {"residual", y0.residual()},
            {"samples", samples}};
      fv["max_difference_scaled_deviation"] = (x_eps && delta) ? Json(worst) : Json(nullptr);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InputDomain) throw;
      fv = {{"available", false}, {"reason", error_json(e)}};
    }
    payload["first_variation"] = fv;

    if (status == kExitOk) {
      payload["corollaries"] = to_json(corollary_checks(inst.problem, inst.cycle, basis, config));
      doc["status"] = "ok";
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InputDomain) throw;
    doc["status"] = "failed";
    doc["error"] = error_json(e);
    status = kExitFailure;
  }
  doc["payload"] = payload;
  emit(doc, o, o.csv, csv.str(), out);
  return status;
}

int run_sweep(const Options& o, std::ostream& out) {
  if (o.eps.empty()) usage("eps: sweep needs a comma separated list");
  const Resolved r = resolve_problem(o);
  const SweepConfig config = sweep_config(o);
  Json doc;
  doc["metadata"] = metadata("sweep", r, config.mode);
  Json payload;
  std::string csv;
  int status = kExitOk;
  try {
    const ProblemInstance inst = instantiate(r.definition);
    payload["cycle"] = cycle_json(inst);
    const ConvergenceReport report = sweep(inst.problem, inst.cycle, config);
    payload["convergence"] = to_json(report);
    csv = sweep_csv(report);
    const bool all_ok = std::all_of(report.records.begin(), report.records.end(),
                                    [](const SweepRecord& rec) { return rec.ok; });
    doc["status"] = all_ok ? "ok" : "partial";
    if (!all_ok) status = kExitFailure;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InputDomain) throw;
    doc["status"] = "failed";
    doc["error"] = error_json(e);
    status = kExitFailure;
  }
  doc["payload"] = payload;
  emit(doc, o, csv.empty() ? std::string() : csv_path_for(o), csv, out);
  return status;
}

int run_report(const Options& o, std::ostream& out) {
  if (o.inputs.empty()) usage("inputs: report needs at least one JSON document");
  Json docs = Json::array();
  bool all_ok = true;
  for (const auto& path : o.inputs) {
    std::ifstream in(path);
    if (!in) usage("inputs: cannot read '" + path + "'");
    Json d;
    try {
      d = Json::parse(in);
    } catch (const Json::parse_error& e) {
      usage("inputs: malformed JSON in '" + path + "': " + e.what());
    }
    if (!d.is_object() || !d.contains("metadata") || !d["metadata"].is_object() ||
        d["metadata"].value("schema", "") != kReportSchema) {
      usage("inputs: '" + path + "' is not a " + std::string(kReportSchema) + " document");
    }
    all_ok = all_ok && d.value("status", "") == "ok";
    docs.push_back({{"path", path}, {"document", d}});
  }
  Json doc;
  doc["metadata"] = {{"schema", kReportSchema}, {"tool", "cycleshift"}, {"version", kToolVersion},
                     {"command", "report"}};
  doc["status"] = all_ok ? "ok" : "partial";
  doc["documents"] = docs;
  emit(doc, o, {}, {}, out);
  return kExitOk;
}

void add_problem_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--problem", o.problem, "registry problem: paper-example, circle-soft, circle3d, vdp-forced");
  cmd->add_option("--config", o.config, "JSON problem config file");
  cmd->add_option("--param", o.params, "parameter override key=value (repeatable)");
  cmd->add_option("--out", o.out, "JSON output path (stdout when omitted)");
}

void add_eps_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "surface mode: section or flowed");
  cmd->add_option("--source", o.source, "x_eps source: computed or exact");
  cmd->add_flag("--exact-shift", o.exact_shift, "use the closed-form shift (section mode)");
  cmd->add_option("--r0", o.r0, "shift search radius (default from the cycle geometry)");
  cmd->add_option("--grid", o.grid, "time grid size for profiles and corollaries");
  cmd->add_option("--threads", o.threads, "worker threads (capped by CYCLESHIFT_THREADS)");
}

}  // namespace

ProblemDefinition problem_from_config(const Json& doc) {
  if (!doc.is_object()) usage("config: expected a JSON object");
  static const std::vector<std::string> keys = {"name", "description", "f", "g", "T", "params",
                                                "x_guess", "T_guess", "phase_lock"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
    usage(key + ": unknown config field");
  }
  if (!doc.contains("f")) usage("f: missing");
  if (!doc.contains("g")) usage("g: missing");

  Params params;
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) usage("params: expected an object");
    for (const auto& [k, v] : doc["params"].items()) {
      if (!v.is_number()) usage("params." + k + ": expected a number");
      params[k] = v.get<double>();
    }
  }
  std::vector<std::string> used;
  auto param = [&](const std::string& key, double fallback) {
    used.push_back(key);
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };

  ProblemDefinition d;
  d.name = doc.value("name", std::string("config"));
  d.description = doc.value("description", std::string());
  std::string f_name;
  const Json& f = doc["f"];
  if (f.is_string()) {
    f_name = f.get<std::string>();
  } else if (f.is_object() && f.contains("builtin") && f["builtin"].is_string() && f.size() == 1) {
    f_name = f["builtin"].get<std::string>();
  } else if (f.is_object() && f.contains("polynomial") && f.size() == 1) {
    f_name = "polynomial";
    d.field = polynomial_field(monomials(f["polynomial"]));
  } else {
    usage("f: expected a builtin name or {\"polynomial\": [...]}");
  }
  double lambda = 0.0;
  if (f_name == "circle" || f_name == "circle3d") {
    lambda = param("lambda", 1.0);
    if (!(lambda > 0.0)) usage("params.lambda: must be positive");
    d.field = f_name == "circle" ? circle_field(lambda) : circle3d_field(lambda);
    d.x_guess = Vector::Zero(d.field.dimension);
    d.x_guess[1] = 1.0;
    d.period_guess = 2.0 * std::numbers::pi;
  } else if (f_name == "van-der-pol") {
    const double mu = param("mu", 1.0);
    if (!(mu > 0.0)) usage("params.mu: must be positive");
    d.field = van_der_pol_field(mu);
    d.x_guess = Vector::Zero(2);
    d.x_guess[0] = 2.0;
    d.period_guess = 6.6;
  } else if (f_name != "polynomial") {
    usage("f: unknown builtin '" + f_name + "' (known: circle, circle3d, van-der-pol)");
  }
  const int n = d.field.dimension;

  if (doc.contains("x_guess")) {
    d.x_guess = vector_field(doc, "x_guess");
    if (d.x_guess.size() != n) usage("x_guess: expected " + std::to_string(n) + " components");
  } else if (f_name == "polynomial") {
    usage("x_guess: required for a polynomial field");
  }
  if (doc.contains("T_guess")) {
    d.period_guess = number_field(doc, "T_guess");
    if (!(d.period_guess > 0.0)) usage("T_guess: must be positive");
  } else if (f_name == "polynomial") {
    usage("T_guess: required for a polynomial field");
  }
  if (doc.contains("T")) {
    const double period = number_field(doc, "T");
    if (!(period > 0.0)) usage("T: must be positive");
    d.forcing_period = period;
  }
  if (doc.contains("phase_lock")) {
    if (!doc["phase_lock"].is_boolean()) usage("phase_lock: expected true or false");
    d.phase_lock = doc["phase_lock"].get<bool>();
  }

  if (!doc["g"].is_string()) usage("g: expected a builtin name");
  const std::string g_name = doc["g"].get<std::string>();
  if (g_name == "circle-shift") {
    if (n < 2) usage("g: circle-shift needs at least 2 components");
    const double g_lambda = param("lambda", 1.0);
    d.perturbation = [g_lambda, n](double) { return circle_shift_perturbation(g_lambda, n); };
    if (!d.forcing_period) d.forcing_period = 2.0 * std::numbers::pi;
    if ((f_name == "circle" || f_name == "circle3d") && g_lambda == lambda &&
        *d.forcing_period == 2.0 * std::numbers::pi) {
      d.exact_solution = [n](double t, double eps) {
        Vector x = Vector::Zero(n);
        x[0] = (1.0 + eps) * std::sin(t - std::sqrt(eps));
        x[1] = (1.0 + eps) * std::cos(t - std::sqrt(eps));
        return x;
      };
      d.exact_shift = [](double eps) { return std::sqrt(eps); };
    }
  } else if (g_name == "cosine") {
    const double amplitude = param("amplitude", 1.0);
    const double component = param("component", 0.0);
    if (component != std::floor(component) || component < 0 || component >= n) {
      usage("params.component: expected an integer in [0, " + std::to_string(n) + ")");
    }
    const int k = static_cast<int>(component);
    d.perturbation = [amplitude, k, n](double period) { return cosine_forcing(amplitude, k, n, period); };
  } else {
    usage("g: unknown builtin '" + g_name + "' (known: circle-shift, cosine)");
  }

  for (const auto& [k, v] : params) {
    if (std::find(used.begin(), used.end(), k) == used.end()) usage("params." + k + ": not used by f or g");
    d.params[k] = v;
  }
  return d;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cycleshift: limit cycle phase shifts under periodic perturbation"};
  app.require_subcommand(1);
  Options o;

  auto* floquet = app.add_subcommand("floquet", "multipliers, nondegeneracy and adjoint eigenfunctions");
  add_problem_options(floquet, o);
  floquet->add_option("--samples", o.samples, "eigenfunction samples per period");
  floquet->add_option("--csv", o.csv, "eigenfunction samples as CSV");

  auto* analyze = app.add_subcommand("analyze", "one eps end to end");
  add_problem_options(analyze, o);
  add_eps_options(analyze, o);
  analyze->add_option("--eps", o.eps, "perturbation size in (0,1]")->required();
  analyze->add_option("--csv", o.csv, "deviation profiles as CSV");

  auto* sweep_cmd = app.add_subcommand("sweep", "eps grid with order fits");
  add_problem_options(sweep_cmd, o);
  add_eps_options(sweep_cmd, o);
  sweep_cmd->add_option("--eps", o.eps, "decreasing comma separated eps grid")->required()->delimiter(',');
  sweep_cmd->add_option("--csv", o.csv, "CSV path (default: --out with .csv)");

  auto* report = app.add_subcommand("report", "merge prior JSON outputs");
  report->add_option("inputs", o.inputs, "documents to merge")->required();
  report->add_option("--out", o.out, "JSON output path (stdout when omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (floquet->parsed()) return run_floquet(o, out);
    if (analyze->parsed()) return run_analyze(o, out);
    if (sweep_cmd->parsed()) return run_sweep(o, out);
    return run_report(o, out);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InputDomain) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    }
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace cycleshift
