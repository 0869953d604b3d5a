#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "thinshell/cli.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/slab1d.hpp"

namespace thinshell::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

// Keeps line probes inside a shrunken air box.
Point clip(const Point& p, const mesh2d::GeometrySpec& g) {
  const double mx = 0.5 * g.box_w * (1.0 - 1e-9), my = 0.5 * g.box_h * (1.0 - 1e-9);
  return {std::clamp(p.x(), -mx, mx), std::clamp(p.y(), -my, my)};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
}

std::vector<std::string> probe_names(const fs::path& dir) {
  std::vector<std::string> out;
  const fs::path p = dir / "probes";
  if (!fs::is_directory(p)) throw InvalidArgument(dir.string() + " is not a result directory (no probes/)");
  for (const auto& e : fs::directory_iterator(p))
    if (e.path().extension() == ".csv") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s.empty() ? "(none)" : s;
}

}  // namespace

RunResult run(const Scenario& s, std::shared_ptr<const mesh2d::Mesh2D> mesh) {
  s.validate();
  RunResult r;
  r.scenario = s;
  auto t0 = std::chrono::steady_clock::now();
  r.mesh = mesh ? std::move(mesh) : std::make_shared<const mesh2d::Mesh2D>(s.build_mesh());
  r.mesh_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  try {
    if (s.model == ModelKind::ts) {
      r.solution = fem2d::solve_ts(r.mesh, s.build_basis(), s.material, s.source, s.mode, s.grid, s.newton);
    } else {
      r.solution = fem2d::solve_reference(r.mesh, s.material, s.source, s.mode, s.grid, s.newton);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario '" + s.name + "' (" + fem2d::to_string(s.model) + "): " + e.what());
  }
  r.solve_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto g = s.effective_geometry();
  for (const auto& [name, p] : s.probes) {
    switch (p.kind) {
      case ProbeSpec::Kind::line:
        r.probes[name] = fem2d::probe_line(r.solution, clip(p.a, g), clip(p.b, g), p.samples, p.component);
        break;
      case ProbeSpec::Kind::point:
        r.probes[name] = fem2d::probe_point(r.solution, p.a, p.component);
        break;
      case ProbeSpec::Kind::depth:
        r.probes[name] = fem2d::probe_depth(r.solution, p.a.x(), slab1d::probe_depths(g.d, p.samples), p.component);
        break;
    }
  }
  r.probe_seconds = seconds_since(t0);
  return r;
}

std::string loss_json(const RunResult& r) {
  const auto& s = r.scenario;
  const auto& sol = r.solution;
  json j;
  j["scenario"] = s.name;
  j["model"] = fem2d::to_string(s.model);
  j["n"] = s.model == ModelKind::ts ? json(s.basis.n) : json(nullptr);
  j["dofs"] = sol.dofs;
  j["nominal_dofs"] = sol.nominal_dofs;
  j["mode"] = fem2d::to_string(s.mode);
  // Harmonic runs report the time-averaged power in the same field.
  j["loss_joule_per_m"] = fem2d::total_loss(sol);
  j["loss_unit"] = s.mode == Mode::transient ? "J/m" : "W/m";
  j["steps"] = s.mode == Mode::transient ? sol.steps() : 0;
  j["newton_iterations_max"] = sol.max_newton_iterations();
  j["newton_converged"] = sol.all_converged();
  j["config_hash"] = hex(s.hash());
  return j.dump(2) + "\n";
}

void write_probe_csv(std::ostream& out, const fem2d::ProbeSeries& p, bool time_axis) {
  out << (time_axis ? "t" : "coord") << ",value,imag\n";
  for (std::size_t i = 0; i < p.value.size(); ++i)
    out << fmt(p.coord[i]) << "," << fmt(p.value[i].real()) << "," << fmt(p.value[i].imag()) << "\n";
}

fem2d::ProbeSeries read_probe_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read " + path);
  fem2d::ProbeSeries p;
  std::string line;
  std::getline(in, line);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double v[3] = {0.0, 0.0, 0.0};
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      const auto r = std::from_chars(line.data() + pos, line.data() + end, v[k]);
      if (r.ec != std::errc() || r.ptr != line.data() + end)
        throw ParseError(path + ": malformed field " + std::to_string(k + 1), row);
      pos = end + 1;
    }
    p.coord.push_back(v[0]);
    p.value.emplace_back(v[1], v[2]);
  }
  return p;
}

void write_result(const RunResult& r, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "probes");
  for (const auto& e : fs::directory_iterator(root / "probes"))
    if (e.path().extension() == ".csv") fs::remove(e.path());
  const auto& s = r.scenario;
  const auto& sol = r.solution;
  write_text(root / "scenario.txt", s.to_text());
  write_text(root / "loss.json", loss_json(r));
  for (const auto& [name, p] : r.probes) {
    std::ostringstream out;
    write_probe_csv(out, p, s.mode == Mode::transient && s.probes.at(name).kind == ProbeSpec::Kind::point);
    write_text(root / "probes" / (name + ".csv"), out.str());
  }

  const auto q = mesh2d::mesh_quality(*r.mesh);
  json meta;
  meta["scenario"] = s.name;
  meta["model"] = fem2d::to_string(s.model);
  meta["mode"] = fem2d::to_string(s.mode);
  meta["config_hash"] = hex(s.hash());
  meta["mesh"] = {{"kind", mesh2d::to_string(r.mesh->kind)},
                  {"nodes", r.mesh->num_nodes()},
                  {"triangles", r.mesh->num_triangles()},
                  {"crack_pairs", r.mesh->crack_pairs.size()},
                  {"quality_min", q.minimum},
                  {"quality_mean", q.mean}};
  meta["dofs"] = sol.dofs;
  meta["nominal_dofs"] = sol.nominal_dofs;
  if (s.model == ModelKind::ts)
    meta["basis"] = {{"f1", s.basis.f1}, {"n", s.basis.n}, {"ranks", sol.ts->basis.ranks()}};
  meta["steps"] = s.mode == Mode::transient ? sol.steps() : 0;
  meta["newton"] = {{"iterations_max", sol.max_newton_iterations()},
                    {"all_converged", sol.all_converged()},
                    {"iterations", sol.newton_iterations}};
  meta["timing_seconds"] = {{"mesh", r.mesh_seconds}, {"solve", r.solve_seconds}, {"probes", r.probe_seconds}};
  write_text(root / "meta.json", meta.dump(2) + "\n");
}

std::vector<CompareRow> compare_results(const std::string& a, const std::string& b,
                                        const std::vector<std::string>& filter) {
  const auto na = probe_names(a), nb = probe_names(b);
  const std::set<std::string> sa(na.begin(), na.end()), sb(nb.begin(), nb.end());
  std::vector<std::string> names;
  if (filter.empty()) {
    for (const auto& n : na)
      if (sb.count(n)) names.push_back(n);
    if (names.empty()) throw InvalidArgument("no common probes; available in " + a + ": " + joined(na));
  } else {
    for (const auto& n : filter) {
      if (!sa.count(n)) throw InvalidArgument("probe '" + n + "' not in " + a + "; available: " + joined(na));
      if (!sb.count(n)) throw InvalidArgument("probe '" + n + "' not in " + b + "; available: " + joined(nb));
      names.push_back(n);
    }
  }
  std::vector<CompareRow> rows;
  for (const auto& n : names) {
    const auto pa = read_probe_csv((fs::path(a) / "probes" / (n + ".csv")).string());
    const auto pb = read_probe_csv((fs::path(b) / "probes" / (n + ".csv")).string());
    bool same = pa.coord.size() == pb.coord.size();
    for (std::size_t i = 0; same && i < pa.coord.size(); ++i)
      same = std::abs(pa.coord[i] - pb.coord[i]) <= 1e-9 * (1.0 + std::abs(pb.coord[i]));
    if (!same) throw InvalidArgument("probe '" + n + "' is sampled differently in " + a + " and " + b);
    rows.push_back({n, fem2d::relative_difference(pa.value, pb.value)});
  }
  return rows;
}

std::string format_compare(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "probe";
  for (const auto& r : rows) out << std::right << std::setw(10) << r.probe;
  out << "\n" << std::left << std::setw(10) << "Rdiff [%]";
  for (const auto& r : rows)
    out << std::right << std::setw(10) << std::fixed << std::setprecision(3) << r.relative_difference;
  out << "\n";
  return out.str();
}

std::vector<SweepRow> sweep_n(const Scenario& s, const std::vector<int>& values, const std::string& dir) {
  if (values.empty()) throw InvalidArgument("sweep: no values");
  const fs::path root(dir);
  Scenario ref = s;
  ref.model = ModelKind::reference;
  write_result(run(ref), (root / "reference").string());

  // One shared mesh; each n runs on its own worker.
  Scenario ts = s;
  ts.model = ModelKind::ts;
  ts.validate();
  const auto mesh = std::make_shared<const mesh2d::Mesh2D>(ts.build_mesh());
  std::vector<std::future<RunResult>> jobs;
  for (int n : values) {
    Scenario t = ts;
    t.basis.n = n;
    jobs.push_back(std::async(std::launch::async, [t, mesh] { return run(t, mesh); }));
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int n = values[i];
    const RunResult r = jobs[i].get();
    const std::string out = (root / ("n" + std::to_string(n))).string();
    write_result(r, out);
    SweepRow row{n, 0.0, r.solution.dofs, r.solution.nominal_dofs, fem2d::total_loss(r.solution)};
    for (const auto& c : compare_results(out, (root / "reference").string()))
      row.max_relative_difference = std::max(row.max_relative_difference, c.relative_difference);
    rows.push_back(row);
  }
  std::ostringstream csv;
  csv << "n,max_relative_difference_percent,dofs,nominal_dofs,loss\n";
  for (const auto& r : rows)
    csv << r.n << "," << fmt(r.max_relative_difference) << "," << r.dofs << "," << r.nominal_dofs << "," << fmt(r.loss)
        << "\n";
  write_text(root / "convergence.csv", csv.str());
  return rows;
}

}  // namespace thinshell::cli
