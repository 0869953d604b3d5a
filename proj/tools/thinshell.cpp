#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "thinshell/cli.hpp"
#include "thinshell/errors.hpp"

using namespace thinshell;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string scenario = "shield1";
  std::string model;
  int n = 0;
  std::string rank_rule;
  int steps = 0;
  double scale = 0.0;
  std::vector<std::string> set;
  std::string mesh_in, mesh_out;
};

void add_scenario_flags(CLI::App* app, Overrides& o) {
  app->add_option("--scenario", o.scenario, "built-in name (shield1..4, nonlinear) or key=value file")
      ->capture_default_str();
  app->add_option("--model", o.model, "ts or reference");
  app->add_option("--n", o.n, "number of harmonic ranks in the thin-shell basis")->check(CLI::PositiveNumber);
  app->add_option("--rank-rule", o.rank_rule, "odd, geometric or explicit");
  app->add_option("--steps", o.steps, "time steps of transient runs")->check(CLI::PositiveNumber);
  app->add_option("--scale", o.scale, "air box shrink factor in (0, 1]");
  app->add_option("--set", o.set, "extra key=value setting, repeatable");
}

cli::Scenario resolve(const Overrides& o) {
  cli::Scenario s = cli::load_scenario(o.scenario);
  if (!o.model.empty()) cli::set_key(s, "model", o.model);
  if (o.n > 0) s.basis.n = o.n;
  if (!o.rank_rule.empty()) cli::set_key(s, "basis.rank_rule", o.rank_rule);
  if (o.steps > 0) s.grid.steps = o.steps;
  if (o.scale > 0.0) s.scale = o.scale;
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    cli::set_key(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  s.validate();
  return s;
}

std::shared_ptr<const mesh2d::Mesh2D> load_mesh(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const mesh2d::Mesh2D>(mesh2d::read_mesh(path));
}

void print_mesh(const mesh2d::Mesh2D& m) {
  const auto q = mesh2d::mesh_quality(m);
  std::cout << "kind " << mesh2d::to_string(m.kind) << "\nnodes " << m.num_nodes() << "\ntriangles "
            << m.num_triangles() << "\ncrack_pairs " << m.crack_pairs.size() << "\ncut_paths " << m.cut_paths.size()
            << "\nquality_min " << q.minimum << "\nquality_mean " << q.mean << "\n";
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  for (std::string w; std::getline(in, w, ',');) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(w, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != w.size() || v < 1) throw InvalidArgument("--values expects positive integers, got '" + w + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thin-shell eddy-current scenarios: run, compare, sweep, mesh"};
  app.require_subcommand(1);

  Overrides run_o;
  std::string run_dir = "results";
  auto* run = app.add_subcommand("run", "solve a scenario and write probes, losses and metadata");
  add_scenario_flags(run, run_o);
  run->add_option("--out-dir", run_dir, "result directory")->capture_default_str();
  run->add_option("--mesh-in", run_o.mesh_in, "reuse a mesh file");
  run->add_option("--mesh-out", run_o.mesh_out, "write the mesh used");

  std::string cmp_a, cmp_b, cmp_out;
  std::vector<std::string> cmp_probes;
  auto* cmp = app.add_subcommand("compare", "relative difference of two result directories per probe");
  cmp->add_option("result_a", cmp_a, "result compared (e.g. thin-shell)")->required();
  cmp->add_option("result_b", cmp_b, "result compared against (e.g. reference)")->required();
  cmp->add_option("--probe", cmp_probes, "probe names; all shared probes when omitted");
  cmp->add_option("--out-dir", cmp_out, "also write compare.csv here");

  Overrides sw_o;
  sw_o.scenario = "shield3";
  std::string sw_dir = "sweep", sw_values = "1,2,3", sw_param = "n";
  auto* sw = app.add_subcommand("sweep", "thin-shell runs over n against one reference run");
  add_scenario_flags(sw, sw_o);
  sw->add_option("--parameter", sw_param, "swept parameter")->check(CLI::IsMember({"n"}))->capture_default_str();
  sw->add_option("--values", sw_values, "comma-separated values")->capture_default_str();
  sw->add_option("--out-dir", sw_dir, "sweep directory")->capture_default_str();

  Overrides mesh_o;
  auto* mesh = app.add_subcommand("mesh", "generate a scenario mesh or inspect a mesh file");
  add_scenario_flags(mesh, mesh_o);
  mesh->add_option("--mesh-in", mesh_o.mesh_in, "inspect this mesh file instead of generating");
  mesh->add_option("--mesh-out", mesh_o.mesh_out, "write the generated mesh");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const cli::Scenario s = resolve(run_o);
      const cli::RunResult r = cli::run(s, load_mesh(run_o.mesh_in));
      if (!run_o.mesh_out.empty()) mesh2d::write_mesh(run_o.mesh_out, *r.mesh);
      cli::write_result(r, run_dir);
      std::cout << cli::loss_json(r);
    } else if (*cmp) {
      const auto rows = cli::compare_results(cmp_a, cmp_b, cmp_probes);
      std::cout << cli::format_compare(rows);
      if (!cmp_out.empty()) {
        fs::create_directories(cmp_out);
        std::ofstream out(fs::path(cmp_out) / "compare.csv");
        out << "probe,relative_difference_percent\n";
        out.precision(17);
        for (const auto& r : rows) out << r.probe << "," << r.relative_difference << "\n";
      }
    } else if (*sw) {
      const cli::Scenario s = resolve(sw_o);
      const auto rows = cli::sweep_n(s, parse_list(sw_values), sw_dir);
      std::cout << "n  max_rdiff[%]  dofs  nominal_dofs  loss\n";
      for (const auto& r : rows)
        std::cout << r.n << "  " << r.max_relative_difference << "  " << r.dofs << "  " << r.nominal_dofs << "  "
                  << r.loss << "\n";
    } else if (*mesh) {
      if (!mesh_o.mesh_in.empty()) {
        print_mesh(mesh2d::read_mesh(mesh_o.mesh_in));
      } else {
        const cli::Scenario s = resolve(mesh_o);
        const auto m = s.build_mesh();
        if (!mesh_o.mesh_out.empty()) mesh2d::write_mesh(mesh_o.mesh_out, m);
        print_mesh(m);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
