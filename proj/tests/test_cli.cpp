#include "doctest.h"

#include <cmath>
#include <fstream>
#include <locale>
#include <sstream>

#include "cycleshift/cli.hpp"
#include "cycleshift/errors.hpp"

using namespace cycleshift;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string usage_message(const Json& config) {
  try {
    problem_from_config(config);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InputDomain);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

}  // namespace

TEST_CASE("real formatting is scientific with 17 significant digits") {
  CHECK(format_real(0.01) == "1.0000000000000000e-02");
  CHECK(format_real(-2.5) == "-2.5000000000000000e+00");
  CHECK(format_real(0.0) == "0.0000000000000000e+00");
  CHECK(format_real(std::nan("")) == "null");
  for (double v : {0.1, 1.0 / 3.0, 6.283185307179586, 1e-300, 2.8675e5}) {
    CHECK(std::stod(format_real(v)) == v);
  }
  CHECK(dump(Json{{"a", 1}, {"b", 0.5}, {"c", {1.0, 2.0}}}) ==
        "{\n  \"a\": 1,\n  \"b\": 5.0000000000000000e-01,\n  \"c\": [1.0000000000000000e+00, "
        "2.0000000000000000e+00]\n}\n");
}

TEST_CASE("formatting ignores the global locale") {
  const std::locale previous = std::locale::global(std::locale::classic());
  try {
    std::locale::global(std::locale("de_DE.UTF-8"));
  } catch (const std::runtime_error&) {
    // Locale not installed; the classic locale still exercises the path.
  }
  CHECK(format_real(1.5) == "1.5000000000000000e+00");
  std::locale::global(previous);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("usage errors exit with status 2 and name the field") {
  Run r = run({"analyze", "--problem", "paper-example", "--eps", "0"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("eps must lie in (0,1]") != std::string::npos);

  r = run({"sweep", "--problem", "nope", "--eps", "1e-2"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("problem") != std::string::npos);

  r = run({"sweep", "--problem", "paper-example", "--config", "x.json", "--eps", "1e-2"});
  CHECK(r.code == kExitUsage);

  r = run({"sweep", "--problem", "paper-example", "--eps", "1e-2,1e-3", "--mode", "flowed", "--exact-shift"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("exact-shift") != std::string::npos);

  r = run({"sweep", "--problem", "paper-example", "--eps", "1e-3,1e-2"});
  CHECK(r.code == kExitUsage);

  r = run({"sweep", "--problem", "paper-example", "--eps", "1e-2", "--mode", "sideways"});
  CHECK(r.code == kExitUsage);

  r = run({"floquet", "--problem", "circle-soft", "--param", "mu=2"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("params.mu") != std::string::npos);

  r = run({"floquet", "--problem", "circle-soft", "--param", "lambda"});
  CHECK(r.code == kExitUsage);

  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("floquet command reports multipliers and eigenfunctions") {
  const Run r = run({"floquet", "--problem", "paper-example", "--out", "floq.json", "--csv", "floq.csv"});
  REQUIRE(r.code == kExitOk);
  const Json d = Json::parse(slurp("floq.json"));
  CHECK(d["metadata"]["schema"] == kReportSchema);
  CHECK(d["status"] == "ok");
  const Json& p = d["payload"];
  CHECK(p["monodromy"]["multipliers"][0]["re"].get<double>() == doctest::Approx(1.0));
  CHECK(p["monodromy"]["multipliers"][1]["re"].get<double>() == doctest::Approx(3.4873e-6).epsilon(1e-4));
  CHECK(p["adjoint"]["multipliers"][0]["value"].get<double>() == doctest::Approx(2.8675e5).epsilon(1e-4));
  CHECK(p["adjoint"]["multipliers"][1]["value"].get<double>() == doctest::Approx(1.0));
  CHECK(p["nondegeneracy"]["nondegenerate"] == true);
  CHECK(p["eigenfunctions"].size() == 2);
  CHECK(p["eigenfunctions"][0]["samples"].size() == 64);
  CHECK(d["files"].size() == 2);
  const std::string csv = slurp("floq.csv");
  CHECK(csv.find("# t,z1_0,z1_1,z0_0,z0_1") != std::string::npos);
}

TEST_CASE("sweep command writes JSON and the frozen CSV columns") {
  const Run r = run({"sweep", "--problem", "paper-example", "--eps", "1e-2,1e-3,1e-4,1e-5", "--mode",
                     "section", "--out", "sweep.json"});
  REQUIRE(r.code == kExitOk);
  const Json d = Json::parse(slurp("sweep.json"));
  const Json& conv = d["payload"]["convergence"];
  CHECK(std::abs(conv["fit_shifted"]["p"].get<double>() - 1.0) <= 0.02);
  CHECK(conv["records"].size() == 4);
  CHECK(d["files"][1]["path"] == "sweep.csv");
  const std::string csv = slurp("sweep.csv");
  CHECK(csv.find("# eps,delta,v_norm,sup_shifted,sup_unshifted,residual_solution,residual_shift,mode\n") !=
        std::string::npos);
  std::istringstream lines(csv);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
    CHECK(line.substr(line.rfind(',') + 1) == "section");
  }
  CHECK(rows == 4);
}

TEST_CASE("computational failure exits 1 with diagnostics in the document") {
  const Run r = run({"analyze", "--problem", "paper-example", "--eps", "1e-3", "--mode", "flowed"});
  CHECK(r.code == kExitFailure);
  const Json d = Json::parse(r.out);
  CHECK(d["status"] == "failed");
  CHECK(d["error"]["kind"] == "shift-not-found");
  CHECK(d["payload"].contains("diagnostics"));
}

TEST_CASE("analyze runs one eps end to end") {
  const Run r = run({"analyze", "--problem", "paper-example", "--eps", "1e-3", "--source", "exact",
                     "--exact-shift", "--grid", "16", "--out", "an.json"});
  REQUIRE(r.code == kExitOk);
  const Json d = Json::parse(slurp("an.json"));
  const Json& p = d["payload"];
  CHECK(p["shift"]["delta"].get<double>() == doctest::Approx(std::sqrt(1e-3)));
  CHECK(p["deviation"]["sup_ratio_shifted"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(p["bifurcation"]["mperp"]["z1"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(p["bifurcation"]["malkin_at_zero"].get<double>()) < 1e-9);
  CHECK(p["first_variation"]["available"] == true);
  CHECK(p["corollaries"]["sign"]["verdict"] == "pass");
  CHECK(p["corollaries"]["dichotomy"]["branch"] == "nonzero-cosine");
  CHECK(p["other_mode_shift"]["error"]["kind"] == "shift-not-found");
}

TEST_CASE("report merges documents without changing a digit") {
  REQUIRE(run({"sweep", "--problem", "vdp-forced", "--eps", "1e-2,1e-3", "--out", "rt_sweep.json"}).code == 0);
  REQUIRE(run({"analyze", "--problem", "circle-soft", "--eps", "1e-2", "--out", "rt_an.json"}).code == 0);
  const Run r = run({"report", "rt_sweep.json", "rt_an.json", "--out", "merged.json"});
  REQUIRE(r.code == kExitOk);
  const Json merged = Json::parse(slurp("merged.json"));
  REQUIRE(merged["documents"].size() == 2);
  CHECK(dump(merged["documents"][0]["document"]) == slurp("rt_sweep.json"));
  CHECK(dump(merged["documents"][1]["document"]) == slurp("rt_an.json"));
  CHECK(merged["status"] == "ok");

  write("not_a_report.json", "{\"x\": 1}");
  CHECK(run({"report", "not_a_report.json"}).code == kExitUsage);
  write("broken.json", "{");
  CHECK(run({"report", "broken.json"}).code == kExitUsage);
}

TEST_CASE("identical runs produce identical documents") {
  const Run a = run({"sweep", "--problem", "paper-example", "--eps", "1e-2,1e-3", "--threads", "1"});
  const Run b = run({"sweep", "--problem", "paper-example", "--eps", "1e-2,1e-3", "--threads", "3"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("polynomial config reproduces the builtin van der Pol cycle") {
  // x' = y, y' = (1 - x^2) y - x
  write("vdp_poly.json", R"({
    "name": "vdp-poly",
    "f": {"polynomial": [[[1.0, 0, 1]], [[1.0, 0, 1], [-1.0, 2, 1], [-1.0, 1, 0]]]},
    "g": "cosine",
    "params": {"amplitude": 1.0},
    "x_guess": [2.0, 0.0],
    "T_guess": 6.6,
    "phase_lock": true
  })");
  const Run poly = run({"floquet", "--config", "vdp_poly.json"});
  const Run builtin = run({"floquet", "--problem", "vdp-forced"});
  REQUIRE(poly.code == 0);
  REQUIRE(builtin.code == 0);
  const Json a = Json::parse(poly.out)["payload"];
  const Json b = Json::parse(builtin.out)["payload"];
  CHECK(a["cycle"]["period"].get<double>() == doctest::Approx(b["cycle"]["period"].get<double>()).epsilon(1e-10));
  CHECK(a["cycle"]["phase_offset"].get<double>() ==
        doctest::Approx(b["cycle"]["phase_offset"].get<double>()).epsilon(1e-8));
}

TEST_CASE("config with builtin circle and circle-shift carries the closed forms") {
  const ProblemDefinition d = problem_from_config(
      Json::parse(R"({"f": "circle", "g": "circle-shift", "params": {"lambda": 0.5}})"));
  REQUIRE(d.exact_shift);
  CHECK(d.exact_shift(1e-2) == doctest::Approx(0.1));
  CHECK(d.params.at("lambda") == 0.5);
}

TEST_CASE("config errors name the offending field") {
  CHECK(usage_message(Json::parse(R"({"g": "cosine"})")).find("f") == 0);
  CHECK(usage_message(Json::parse(R"({"f": "circle"})")).find("g") == 0);
  CHECK(usage_message(Json::parse(R"({"f": "spiral", "g": "cosine"})")).find("f") == 0);
  CHECK(usage_message(Json::parse(R"({"f": "circle", "g": "cosine", "colour": 1})")).find("colour") == 0);
  CHECK(usage_message(Json::parse(R"({"f": "circle", "g": "cosine", "params": {"mu": 1}})")).find("params.mu") ==
        0);
  CHECK(usage_message(Json::parse(R"({"f": {"polynomial": [[[1, 0, 1]], [[-1, 1, 0]]]}, "g": "cosine"})"))
            .find("x_guess") == 0);
  CHECK(usage_message(Json::parse(R"({"f": {"polynomial": [[[1, 0]], [[-1, 1, 0]]]}, "g": "cosine"})"))
            .find("f.polynomial") == 0);
  CHECK(usage_message(Json::parse(R"({"f": "circle", "g": "cosine", "T": -1})")).find("T") == 0);
  CHECK(usage_message(Json::parse(R"({"f": "circle", "g": "cosine", "x_guess": [1]})")).find("x_guess") == 0);

  write("malformed.json", "{ not json");
  const Run r = run({"floquet", "--config", "malformed.json"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("config") != std::string::npos);
}
