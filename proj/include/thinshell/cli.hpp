#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "thinshell/fem2d.hpp"
#include "thinshell/hyperbasis.hpp"
#include "thinshell/materials.hpp"
#include "thinshell/mesh2d.hpp"
#include "thinshell/numerics.hpp"

namespace thinshell::cli {

using fem2d::Component;
using fem2d::Mode;
using fem2d::ModelKind;
using mesh2d::Point;

/// Named field probe sampled after a run.
struct ProbeSpec {
  enum class Kind { line, point, depth };
  Kind kind = Kind::point;
  Point a{0.0, 0.0};  ///< line start, point location, or (x, -) for depth
  Point b{0.0, 0.0};  ///< line end
  int samples = 2;    ///< line samples or depth count
  Component component = Component::magnitude;

  void validate() const;
};

struct MeshSizing {
  double ts_surface_h = 0.01;          ///< sheet surface size of thin-shell meshes, m
  double reference_surface_h = 0.001;  ///< sheet surface size of volume meshes, m
  double outer_h = 0.08;               ///< far-field size, m
  int layers = 12;                     ///< through-thickness layers of volume meshes
};

struct BasisConfig {
  double f1 = 50.0;
  int n = 1;
  hyperbasis::RankRule rank_rule = hyperbasis::RankRule::odd;
  std::vector<int> ranks;  ///< explicit rule only
  double mu_r = 0.0;       ///< relative permeability of the basis; 0 takes the material value at h = 0
};

struct Scenario {
  std::string name = "custom";
  ModelKind model = ModelKind::ts;
  Mode mode = Mode::harmonic;
  mesh2d::GeometrySpec geometry;
  double scale = 1.0;  ///< air box shrink factor
  materials::MaterialModel material = materials::MaterialModel::linear(1.0, 1e6);
  fem2d::SourceSpec source;
  BasisConfig basis;
  numerics::TimeGrid grid{50e-6, 120};
  numerics::NewtonSettings newton;
  MeshSizing mesh;
  std::map<std::string, ProbeSpec> probes;

  /// Throws InvalidArgument naming the offending setting.
  void validate() const;
  /// Geometry after scaling, with the sheet volume resolved for the reference model.
  mesh2d::GeometrySpec effective_geometry() const;
  mesh2d::Mesh2D build_mesh() const;
  hyperbasis::BasisSet build_basis() const;
  /// Canonical key = value text; parse_scenario(to_text()) reproduces the scenario.
  std::string to_text() const;
  /// FNV-1a of to_text().
  std::uint64_t hash() const;
};

/// AA', BB', CC' lines, P1 h_y point, P2 and P3 depth profiles.
std::map<std::string, ProbeSpec> standard_probes();

std::vector<std::string> builtin_names();
Scenario builtin(const std::string& name);

/// Applies one key = value setting; throws InvalidArgument naming an unknown key.
void set_key(Scenario& s, const std::string& key, const std::string& value);
/// Flat key = value text; '#' starts a comment; `base = <builtin>` must come first when present.
Scenario parse_scenario(std::istream& in);
/// Built-in name or path to a scenario file.
Scenario load_scenario(const std::string& name_or_path);

struct RunResult {
  Scenario scenario;
  std::shared_ptr<const mesh2d::Mesh2D> mesh;
  fem2d::FieldSolution solution;
  std::map<std::string, fem2d::ProbeSeries> probes;
  double mesh_seconds = 0.0;
  double solve_seconds = 0.0;
  double probe_seconds = 0.0;
};

/// Meshes (unless a mesh is supplied), solves, and samples every probe.
/// Line and depth probes of transient runs use the final step.
RunResult run(const Scenario& s, std::shared_ptr<const mesh2d::Mesh2D> mesh = nullptr);

/// scenario.txt, loss.json, meta.json and probes/<name>.csv under `dir`.
void write_result(const RunResult& r, const std::string& dir);

/// Loss summary as written to loss.json.
std::string loss_json(const RunResult& r);

/// CSV with columns coordinate-or-time, value, imag.
void write_probe_csv(std::ostream& out, const fem2d::ProbeSeries& p, bool time_axis);
fem2d::ProbeSeries read_probe_csv(const std::string& path);

struct CompareRow {
  std::string probe;
  double relative_difference = 0.0;  ///< percent, first result against the second
};

/// Probes of result directory `a` against `b`. An empty filter compares every
/// probe both results share. Throws InvalidArgument listing the available probes
/// when a requested probe is missing, or when samplings differ.
std::vector<CompareRow> compare_results(const std::string& a, const std::string& b,
                                        const std::vector<std::string>& filter = {});
/// Table of the rows, one column per probe.
std::string format_compare(const std::vector<CompareRow>& rows);

struct SweepRow {
  int n = 0;
  double max_relative_difference = 0.0;  ///< percent over all probes, against the reference run
  int dofs = 0;                          ///< solved, after dropping dependent sheet functions
  int nominal_dofs = 0;                  ///< before dropping
  double loss = 0.0;
};

/// One thin-shell run per n plus one reference run, each written to its own
/// directory under `dir`, and convergence.csv with the table.
std::vector<SweepRow> sweep_n(const Scenario& s, const std::vector<int>& values, const std::string& dir);

}  // namespace thinshell::cli
