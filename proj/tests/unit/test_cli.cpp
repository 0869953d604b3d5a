#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "thinshell/cli.hpp"
#include "thinshell/errors.hpp"

using namespace thinshell;
using namespace thinshell::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thinshell_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("built-in scenarios validate and round-trip through text") {
  for (const auto& name : builtin_names()) {
    Scenario s = builtin(name);
    CHECK_NOTHROW(s.validate());
    std::istringstream in(s.to_text());
    const Scenario back = parse_scenario(in);
    CHECK(back.to_text() == s.to_text());
    CHECK(back.hash() == s.hash());
    s.model = ModelKind::reference;
    CHECK(s.hash() != back.hash());
  }
  CHECK_THROWS_AS(builtin("shield9"), InvalidArgument);
  const Scenario s3 = builtin("shield3");
  CHECK(s3.mode == Mode::transient);
  CHECK(s3.grid.steps == 120);
  CHECK(s3.basis.f1 == 5e3);
  const Scenario nl = builtin("nonlinear");
  CHECK(nl.material.is_saturable());
  CHECK(nl.source.current(0.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(nl.build_basis().sheet().mu == doctest::Approx(1000.0 * 4e-7 * 3.14159265358979).epsilon(1e-6));
}

TEST_CASE("scenario files: base, overrides, probes, and errors naming the key") {
  std::istringstream in(
      "# pulsed shield with n = 2\nbase = shield4\nbasis.n = 2\nprobe.Q = point 0.1 0.2 hx\n"
      "probe.BB = none\nmaterial.mu0_m0 = 1.31\n");
  const Scenario s = parse_scenario(in);
  CHECK(s.name == "shield4");
  CHECK(s.basis.n == 2);
  CHECK(s.probes.count("Q") == 1);
  CHECK(s.probes.count("BB") == 0);
  CHECK(s.probes.at("Q").component == Component::hx);
  CHECK(s.material.m0 * 4e-7 * 3.14159265358979 == doctest::Approx(1.31).epsilon(1e-6));

  Scenario t = builtin("shield1");
  try {
    set_key(t, "material.sigmax", "1");
    FAIL("unknown key accepted");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("material.sigmax") != std::string::npos);
  }
  try {
    set_key(t, "basis.n", "two");
    FAIL("bad integer accepted");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("basis.n") != std::string::npos);
  }
  CHECK_THROWS_AS(set_key(t, "probe.X", "circle 1 2"), InvalidArgument);
  std::istringstream late("basis.n = 2\nbase = shield1\n");
  CHECK_THROWS_AS(parse_scenario(late), ParseError);
  std::istringstream noeq("basis.n 2\n");
  CHECK_THROWS_AS(parse_scenario(noeq), ParseError);

  set_key(t, "source.waveform", "pulse");
  CHECK_THROWS_AS(t.validate(), InvalidArgument);
  Scenario u = builtin("nonlinear");
  u.basis.mu_r = 0.0;
  CHECK_THROWS_AS(u.validate(), InvalidArgument);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.txt"), InvalidArgument);
}

TEST_CASE("runs are deterministic and compare against themselves at 0%") {
  Scenario s = builtin("shield2");
  s.scale = 0.4;
  const auto a = scratch("run_a"), b = scratch("run_b");
  write_result(run(s), a.string());
  write_result(run(s), b.string());
  for (const auto& name : {"AA", "BB", "CC", "P1", "P2", "P3"})
    CHECK(slurp(a / "probes" / (std::string(name) + ".csv")) == slurp(b / "probes" / (std::string(name) + ".csv")));
  CHECK(slurp(a / "loss.json") == slurp(b / "loss.json"));
  CHECK(slurp(a / "scenario.txt") == s.to_text());

  const auto rows = compare_results(a.string(), b.string());
  CHECK(rows.size() == 6);
  for (const auto& r : rows) CHECK(r.relative_difference == 0.0);
  CHECK_THROWS_AS(compare_results(a.string(), b.string(), {"ZZ"}), InvalidArgument);
  try {
    compare_results(a.string(), b.string(), {"ZZ"});
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("AA") != std::string::npos);
  }
  const auto p = read_probe_csv((a / "probes" / "AA.csv").string());
  CHECK(p.coord.size() == 201);

  // A probe sampled differently cannot be compared.
  Scenario c = s;
  set_key(c, "probe.AA", "line 0 -0.2 0 0.2 101 magnitude");
  const auto d = scratch("run_c");
  write_result(run(c), d.string());
  CHECK_THROWS_AS(compare_results(a.string(), d.string(), {"AA"}), InvalidArgument);
  for (const auto& x : {a, b, d}) fs::remove_all(x);
}

TEST_CASE("sweep over n: constant DoF increment and converged losses") {
  Scenario s = builtin("shield3");
  const auto dir = scratch("sweep");
  const auto rows = sweep_n(s, {1, 2, 3, 4, 5}, dir.string());
  REQUIRE(rows.size() == 5);
  const int inc = rows[1].nominal_dofs - rows[0].nominal_dofs;
  CHECK(inc > 0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].nominal_dofs - rows[i - 1].nominal_dofs == inc);
    CHECK(rows[i].dofs >= rows[i - 1].dofs);
  }
  for (const auto& r : rows) CHECK(r.dofs <= r.nominal_dofs);
  CHECK(std::abs(rows[4].loss - rows[2].loss) / rows[2].loss < 5e-3);
  CHECK(fs::exists(dir / "convergence.csv"));
  CHECK(fs::exists(dir / "reference" / "loss.json"));
  fs::remove_all(dir);
}
