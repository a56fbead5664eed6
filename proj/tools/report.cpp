#include "cycleshift/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace cycleshift {

namespace {

bool is_scalar(const Json& v) { return !v.is_array() && !v.is_object(); }

void write(std::ostringstream& os, const Json& v, int indent) {
  const std::string pad(indent, ' ');
  const std::string inner(indent + 2, ' ');
  switch (v.type()) {
    case Json::value_t::number_float:
      os << format_real(v.get<double>());
      return;
    case Json::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) os << ",\n";
        first = false;
        os << inner << Json(key).dump() << ": ";
        write(os, item, indent + 2);
      }
      os << "\n" << pad << "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        os << "[]";
        return;
      }
      if (std::all_of(v.begin(), v.end(), is_scalar)) {
        os << "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i > 0) os << ", ";
          write(os, v[i], indent);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) os << ",\n";
        os << inner;
        write(os, v[i], indent + 2);
      }
      os << "\n" << pad << "]";
      return;
    }
    default:
      os << v.dump();
  }
}

Json real(double value) {
  if (!std::isfinite(value)) return nullptr;
  return value;
}

Json strings(const std::vector<std::string>& items) {
  Json out = Json::array();
  for (const auto& s : items) out.push_back(s);
  return out;
}

}  // namespace

std::string format_real(double value) {
  if (!std::isfinite(value)) return "null";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

std::string dump(const Json& value) {
  std::ostringstream os;
  write(os, value, 0);
  os << "\n";
  return os.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v[i]));
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

Json to_json(const OrderFit& fit) {
  Json out;
  out["fitted"] = fit.fitted;
  out["points"] = fit.points;
  if (fit.fitted) {
    out["p"] = real(fit.p);
    out["c"] = real(fit.c);
    out["residual"] = real(fit.residual);
  } else {
    out["note"] = fit.note;
  }
  return out;
}

Json to_json(const SweepRecord& r) {
  Json out;
  out["eps"] = real(r.eps);
  out["ok"] = r.ok;
  if (!r.error.empty()) out["error"] = {{"kind", r.error_kind}, {"message", r.error}};
  out["delta"] = real(r.delta);
  out["v_norm"] = real(r.v_norm);
  out["sup_shifted"] = real(r.sup_shifted);
  out["sup_unshifted"] = real(r.sup_unshifted);
  out["residual_solution"] = real(r.residual_solution);
  out["residual_shift"] = real(r.residual_shift);
  out["solution_iterations"] = r.solution_iterations;
  out["shift_iterations"] = r.shift_iterations;
  out["warnings"] = strings(r.warnings);
  return out;
}

Json to_json(const ConvergenceReport& r) {
  Json out;
  out["problem"] = r.problem;
  out["mode"] = to_string(r.mode);
  out["source"] = to_string(r.source);
  out["exact_shift"] = r.exact_shift;
  out["r0"] = real(r.r0);
  out["grid"] = r.grid;
  Json records = Json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  out["records"] = records;
  out["fit_shifted"] = to_json(r.shifted);
  out["fit_unshifted"] = to_json(r.unshifted);
  out["bound_constant"] = real(r.bound_constant);
  return out;
}

Json to_json(const CorollaryReport& r) {
  Json out;
  out["problem"] = r.problem;
  out["mode"] = to_string(r.mode);
  out["source"] = to_string(r.source);
  out["exact_shift"] = r.exact_shift;
  out["grid"] = r.grid;
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"eps", real(f.eps)}, {"kind", f.error_kind}, {"message", f.error}});
  }
  out["failures"] = failures;

  Json sign;
  sign["verdict"] = to_string(r.sign.verdict);
  sign["agreements"] = r.sign.agreements;
  sign["disagreements"] = r.sign.disagreements;
  sign["skipped"] = r.sign.skipped;
  sign["note"] = r.sign.note;
  Json checks = Json::array();
  for (const auto& c : r.sign.checks) {
    checks.push_back({{"eigenfunction", c.eigenfunction}, {"eps", real(c.eps)}, {"t", real(c.t)},
                      {"mperp", real(c.mperp)}, {"cosine", real(c.cosine)}, {"skipped", c.skipped},
                      {"agree", c.agree}});
  }
  sign["checks"] = checks;
  out["sign"] = sign;

  Json bounds;
  bounds["verdict"] = to_string(r.bounds.verdict);
  bounds["eigenfunction"] = r.bounds.eigenfunction;
  bounds["note"] = r.bounds.note;
  Json rows = Json::array();
  for (const auto& b : r.bounds.rows) rows.push_back({{"eps", real(b.eps)}, {"c1", real(b.c1)}, {"c2", real(b.c2)}});
  bounds["rows"] = rows;
  out["bounds"] = bounds;

  Json avoid;
  avoid["verdict"] = to_string(r.avoidance.verdict);
  avoid["eigenfunction"] = r.avoidance.eigenfunction;
  avoid["annotation"] = r.avoidance.annotation;
  avoid["note"] = r.avoidance.note;
  rows = Json::array();
  for (const auto& a : r.avoidance.rows) {
    rows.push_back({{"eps", real(a.eps)}, {"min_distance", real(a.min_distance)}, {"t_min", real(a.t_min)}});
  }
  avoid["rows"] = rows;
  out["avoidance"] = avoid;

  Json anchor;
  anchor["verdict"] = to_string(r.anchor.verdict);
  anchor["note"] = r.anchor.note;
  rows = Json::array();
  for (const auto& a : r.anchor.rows) rows.push_back({{"eps", real(a.eps)}, {"ratio", real(a.ratio)}});
  anchor["rows"] = rows;
  out["anchor"] = anchor;

  Json dich;
  dich["branch"] = r.dichotomy.branch;
  dich["eigenfunction"] = r.dichotomy.eigenfunction;
  dich["note"] = r.dichotomy.note;
  rows = Json::array();
  for (const auto& c : r.dichotomy.rows) {
    rows.push_back({{"eps", real(c.eps)}, {"eigenfunction", c.eigenfunction}, {"cosine", real(c.cosine)},
                    {"defined", c.defined}});
  }
  dich["rows"] = rows;
  out["dichotomy"] = dich;

  rows = Json::array();
  for (const auto& a : r.angles) {
    rows.push_back({{"eps", real(a.eps)}, {"max_abs_cosine", real(a.max_abs_cosine)}, {"defined", a.defined}});
  }
  out["angles"] = rows;
  return out;
}

Json to_json(const FloquetDiagnostics& d) {
  Json out;
  out["grid"] = d.grid;
  out["perron_defect"] = real(d.perron_defect);
  out["orthogonality_defect"] = real(d.orthogonality_defect);
  out["dual_basis_defect"] = real(d.dual_basis_defect);
  out["floquet_relation_defect"] = real(d.floquet_relation_defect);
  out["closure_defect"] = real(d.closure_defect);
  out["basis_condition"] = real(d.basis_condition);
  return out;
}

std::string sweep_csv(const ConvergenceReport& r) {
  std::ostringstream os;
  os << "# cycleshift sweep, problem " << r.problem << ", mode " << to_string(r.mode) << ", source "
     << to_string(r.source) << (r.exact_shift ? ", closed-form shift" : "") << "\n";
  os << "# comma separated; gnuplot: set datafile separator ','\n";
  os << "# failed eps points are listed as comments\n";
  os << "# eps,delta,v_norm,sup_shifted,sup_unshifted,residual_solution,residual_shift,mode\n";
  for (const auto& rec : r.records) {
    if (!rec.ok) {
      os << "# eps " << format_real(rec.eps) << " failed: " << rec.error_kind << "\n";
      continue;
    }
    auto cell = [](double v) { return std::isfinite(v) ? format_real(v) : std::string("nan"); };
    os << cell(rec.eps) << ',' << cell(rec.delta) << ',' << cell(rec.v_norm) << ',' << cell(rec.sup_shifted)
       << ',' << cell(rec.sup_unshifted) << ',' << cell(rec.residual_solution) << ','
       << cell(rec.residual_shift) << ',' << to_string(r.mode) << "\n";
  }
  return os.str();
}

}  // namespace cycleshift
