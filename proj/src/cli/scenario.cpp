#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "thinshell/cli.hpp"
#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"

namespace thinshell::cli {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
    throw InvalidArgument("setting '" + key + "': '" + v + "' is not a number");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  int x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw InvalidArgument("setting '" + key + "': '" + v + "' is not an integer");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("setting '" + key + "': '" + v + "' is not a boolean");
}

std::string waveform_name(fem2d::Waveform w) { return w == fem2d::Waveform::sinusoid ? "sinusoid" : "pulse"; }

fem2d::Waveform parse_waveform(const std::string& v) {
  if (v == "sinusoid") return fem2d::Waveform::sinusoid;
  if (v == "pulse") return fem2d::Waveform::pulse;
  throw InvalidArgument("setting 'source.waveform': unknown waveform '" + v + "' (expected sinusoid or pulse)");
}

std::string probe_text(const ProbeSpec& p) {
  const std::string c = fem2d::to_string(p.component);
  switch (p.kind) {
    case ProbeSpec::Kind::line:
      return "line " + fmt(p.a.x()) + " " + fmt(p.a.y()) + " " + fmt(p.b.x()) + " " + fmt(p.b.y()) + " " +
             std::to_string(p.samples) + " " + c;
    case ProbeSpec::Kind::point:
      return "point " + fmt(p.a.x()) + " " + fmt(p.a.y()) + " " + c;
    default:
      return "depth " + fmt(p.a.x()) + " " + std::to_string(p.samples) + " " + c;
  }
}

ProbeSpec parse_probe(const std::string& key, const std::string& v) {
  const auto w = words(v);
  ProbeSpec p;
  auto num = [&](std::size_t i) { return to_double(key, w[i]); };
  auto component = [&](std::size_t i) {
    try {
      return fem2d::parse_component(w[i]);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("setting '" + key + "': " + e.what());
    }
  };
  if (!w.empty() && w[0] == "line" && w.size() == 7) {
    p.kind = ProbeSpec::Kind::line;
    p.a = {num(1), num(2)};
    p.b = {num(3), num(4)};
    p.samples = to_int(key, w[5]);
    p.component = component(6);
  } else if (!w.empty() && w[0] == "point" && w.size() == 4) {
    p.kind = ProbeSpec::Kind::point;
    p.a = {num(1), num(2)};
    p.component = component(3);
  } else if (!w.empty() && w[0] == "depth" && w.size() == 4) {
    p.kind = ProbeSpec::Kind::depth;
    p.a = {num(1), 0.0};
    p.samples = to_int(key, w[2]);
    p.component = component(3);
  } else {
    throw InvalidArgument("setting '" + key +
                          "': expected 'line x0 y0 x1 y1 samples component', 'point x y component', "
                          "'depth x count component' or 'none'");
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("setting '" + key + "': " + e.what());
  }
  return p;
}

// Ordered table of scalar settings: name, getter, setter.
struct Setting {
  const char* key;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, const std::string&, const std::string&)> set;
};

template <typename T>
Setting real(const char* key, T Scenario::* group, double T::* field) {
  return {key, [=](const Scenario& s) { return fmt(s.*group.*field); },
          [=](Scenario& s, const std::string& k, const std::string& v) { s.*group.*field = to_double(k, v); }};
}

template <typename T>
Setting integer(const char* key, T Scenario::* group, int T::* field) {
  return {key, [=](const Scenario& s) { return std::to_string(s.*group.*field); },
          [=](Scenario& s, const std::string& k, const std::string& v) { s.*group.*field = to_int(k, v); }};
}

const std::vector<Setting>& settings() {
  using materials::MaterialModel;
  static const std::vector<Setting> table = {
      {"name", [](const Scenario& s) { return s.name; },
       [](Scenario& s, const std::string&, const std::string& v) { s.name = v; }},
      {"model", [](const Scenario& s) { return fem2d::to_string(s.model); },
       [](Scenario& s, const std::string&, const std::string& v) { s.model = fem2d::parse_model(v); }},
      {"mode", [](const Scenario& s) { return fem2d::to_string(s.mode); },
       [](Scenario& s, const std::string&, const std::string& v) { s.mode = fem2d::parse_mode(v); }},
      real("geometry.l", &Scenario::geometry, &mesh2d::GeometrySpec::l),
      real("geometry.d", &Scenario::geometry, &mesh2d::GeometrySpec::d),
      real("geometry.wire_w", &Scenario::geometry, &mesh2d::GeometrySpec::wire_w),
      real("geometry.wire_h", &Scenario::geometry, &mesh2d::GeometrySpec::wire_h),
      real("geometry.l1", &Scenario::geometry, &mesh2d::GeometrySpec::l1),
      real("geometry.l2", &Scenario::geometry, &mesh2d::GeometrySpec::l2),
      real("geometry.box_w", &Scenario::geometry, &mesh2d::GeometrySpec::box_w),
      real("geometry.box_h", &Scenario::geometry, &mesh2d::GeometrySpec::box_h),
      {"geometry.has_shield", [](const Scenario& s) { return std::string(s.geometry.has_shield ? "true" : "false"); },
       [](Scenario& s, const std::string& k, const std::string& v) { s.geometry.has_shield = to_bool(k, v); }},
      {"scale", [](const Scenario& s) { return fmt(s.scale); },
       [](Scenario& s, const std::string& k, const std::string& v) { s.scale = to_double(k, v); }},
      {"material.kind", [](const Scenario& s) { return materials::to_string(s.material.kind); },
       [](Scenario& s, const std::string&, const std::string& v) {
         s.material.kind = materials::parse_material_kind(v);
       }},
      real("material.sigma", &Scenario::material, &MaterialModel::sigma),
      real("material.mu_r", &Scenario::material, &MaterialModel::mu_r),
      real("material.mu_r0", &Scenario::material, &MaterialModel::mu_r0),
      {"material.mu0_m0", [](const Scenario& s) { return fmt(mu0 * s.material.m0); },
       [](Scenario& s, const std::string& k, const std::string& v) { s.material.m0 = to_double(k, v) / mu0; }},
      {"source.waveform", [](const Scenario& s) { return waveform_name(s.source.waveform); },
       [](Scenario& s, const std::string&, const std::string& v) { s.source.waveform = parse_waveform(v); }},
      real("source.amplitude", &Scenario::source, &fem2d::SourceSpec::amplitude),
      real("source.frequency", &Scenario::source, &fem2d::SourceSpec::frequency),
      real("source.phase", &Scenario::source, &fem2d::SourceSpec::phase),
      real("source.rise_time", &Scenario::source, &fem2d::SourceSpec::rise_time),
      real("basis.f1", &Scenario::basis, &BasisConfig::f1),
      integer("basis.n", &Scenario::basis, &BasisConfig::n),
      {"basis.rank_rule", [](const Scenario& s) { return hyperbasis::to_string(s.basis.rank_rule); },
       [](Scenario& s, const std::string&, const std::string& v) {
         s.basis.rank_rule = hyperbasis::parse_rank_rule(v);
       }},
      {"basis.ranks",
       [](const Scenario& s) {
         std::string out;
         for (int r : s.basis.ranks) out += (out.empty() ? "" : " ") + std::to_string(r);
         return out;
       },
       [](Scenario& s, const std::string& k, const std::string& v) {
         s.basis.ranks.clear();
         for (const auto& w : words(v)) s.basis.ranks.push_back(to_int(k, w));
       }},
      real("basis.mu_r", &Scenario::basis, &BasisConfig::mu_r),
      real("grid.t_max", &Scenario::grid, &numerics::TimeGrid::t_max),
      integer("grid.steps", &Scenario::grid, &numerics::TimeGrid::steps),
      integer("newton.max_iterations", &Scenario::newton, &numerics::NewtonSettings::max_iterations),
      real("newton.tol", &Scenario::newton, &numerics::NewtonSettings::relative_residual_tol),
      integer("newton.max_backtracks", &Scenario::newton, &numerics::NewtonSettings::max_backtracks),
      real("mesh.ts_surface_h", &Scenario::mesh, &MeshSizing::ts_surface_h),
      real("mesh.reference_surface_h", &Scenario::mesh, &MeshSizing::reference_surface_h),
      real("mesh.outer_h", &Scenario::mesh, &MeshSizing::outer_h),
      integer("mesh.layers", &Scenario::mesh, &MeshSizing::layers),
  };
  return table;
}

Scenario harmonic_shield(const std::string& name, double mu_r, double sigma) {
  Scenario s;
  s.name = name;
  s.mode = Mode::harmonic;
  s.material = materials::MaterialModel::linear(mu_r, sigma);
  s.source = fem2d::SourceSpec::sinusoid(6e3, 50.0);
  s.basis.f1 = 50.0;
  s.basis.n = 1;
  return s;
}

Scenario pulsed_shield(const std::string& name, double mu_r, double sigma) {
  Scenario s;
  s.name = name;
  s.mode = Mode::transient;
  s.material = materials::MaterialModel::linear(mu_r, sigma);
  s.source = fem2d::SourceSpec::pulse(6e3, 20e-6);
  s.grid = {50e-6, 120};
  // Fundamental 1 / (4 t_max).
  s.basis.f1 = 5e3;
  s.basis.n = 3;
  s.mesh.layers = 48;
  return s;
}

}  // namespace

void ProbeSpec::validate() const {
  if (kind == Kind::line && samples < 2) throw InvalidArgument("line probe needs at least two samples");
  if (kind == Kind::depth && samples < 2) throw InvalidArgument("depth probe needs at least two depths");
  if (kind == Kind::line && (b - a).norm() == 0.0) throw InvalidArgument("line probe has zero length");
}

std::map<std::string, ProbeSpec> standard_probes() {
  using K = ProbeSpec::Kind;
  return {
      {"AA", {K::line, {0.0, -0.2}, {0.0, 0.2}, 201, Component::magnitude}},
      {"BB", {K::line, {-1.0, 0.1}, {1.0, 0.1}, 201, Component::magnitude}},
      {"CC", {K::line, {0.49, -0.2}, {0.49, 0.2}, 201, Component::magnitude}},
      {"P1", {K::point, {0.0, 0.1}, {0.0, 0.0}, 1, Component::hy}},
      {"P2", {K::depth, {0.25, 0.0}, {0.0, 0.0}, 9, Component::magnitude}},
      {"P3", {K::depth, {0.49, 0.0}, {0.0, 0.0}, 9, Component::magnitude}},
  };
}

std::vector<std::string> builtin_names() { return {"shield1", "shield2", "shield3", "shield4", "nonlinear"}; }

Scenario builtin(const std::string& name) {
  Scenario s;
  if (name == "shield1") {
    s = harmonic_shield(name, 1.0, 1e6);
  } else if (name == "shield2") {
    s = harmonic_shield(name, 1000.0, 1e7);
  } else if (name == "shield3") {
    s = pulsed_shield(name, 1000.0, 1e6);
  } else if (name == "shield4") {
    s = pulsed_shield(name, 100.0, 1e7);
  } else if (name == "nonlinear") {
    s.name = name;
    s.mode = Mode::transient;
    s.material = materials::MaterialModel::saturable(12500.0, 1.31, 1e6);
    s.source = fem2d::SourceSpec::sinusoid(6e3, 1e3, -0.5 * pi);
    s.grid = {1e-3, 120};
    s.basis.f1 = 1e3;
    s.basis.n = 2;
    s.basis.mu_r = 1000.0;
    s.mesh.layers = 48;
  } else {
    std::string list;
    for (const auto& n : builtin_names()) list += " " + n;
    throw InvalidArgument("unknown scenario '" + name + "'; built-in scenarios:" + list);
  }
  s.probes = standard_probes();
  return s;
}

void set_key(Scenario& s, const std::string& key, const std::string& value) {
  if (key.rfind("probe.", 0) == 0) {
    const std::string name = key.substr(6);
    if (name.empty()) throw InvalidArgument("setting '" + key + "': empty probe name");
    if (value == "none") {
      s.probes.erase(name);
    } else {
      s.probes[name] = parse_probe(key, value);
    }
    return;
  }
  for (const auto& st : settings())
    if (key == st.key) {
      try {
        st.set(s, key, value);
      } catch (const InvalidArgument& e) {
        const std::string what = e.what();
        throw InvalidArgument(what.rfind("setting '", 0) == 0 ? what : "setting '" + key + "': " + what);
      }
      return;
    }
  throw InvalidArgument("unknown setting '" + key + "'");
}

Scenario parse_scenario(std::istream& in) {
  Scenario s;
  s.probes = standard_probes();
  bool first = true;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      if (key == "base") {
        if (!first) throw InvalidArgument("setting 'base' must come first");
        s = builtin(value);
      } else {
        set_key(s, key, value);
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no);
    }
    first = false;
  }
  return s;
}

Scenario load_scenario(const std::string& name_or_path) {
  for (const auto& n : builtin_names())
    if (n == name_or_path) return builtin(n);
  std::ifstream in(name_or_path);
  if (!in) {
    std::string list;
    for (const auto& n : builtin_names()) list += " " + n;
    throw InvalidArgument("scenario '" + name_or_path + "' is neither a file nor a built-in (" + list.substr(1) + ")");
  }
  return parse_scenario(in);
}

std::string Scenario::to_text() const {
  std::string out;
  for (const auto& st : settings()) out += std::string(st.key) + " = " + st.get(*this) + "\n";
  for (const auto& [name, p] : probes) out += "probe." + name + " = " + probe_text(p) + "\n";
  return out;
}

std::uint64_t Scenario::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void Scenario::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw InvalidArgument("setting '" + key + "': " + why);
  };
  if (name.empty()) fail("name", "must not be empty");
  try {
    effective_geometry().validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("geometry: ") + e.what());
  }
  try {
    material.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("material: ") + e.what());
  }
  try {
    source.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("source: ") + e.what());
  }
  if (mode == Mode::harmonic) {
    if (source.waveform != fem2d::Waveform::sinusoid) fail("source.waveform", "harmonic mode needs a sinusoid");
    if (material.is_saturable()) fail("material.kind", "a saturable material needs transient mode");
  } else {
    try {
      grid.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("grid: ") + e.what());
    }
    try {
      newton.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("newton: ") + e.what());
    }
  }
  if (model == ModelKind::ts) {
    if (basis.n < 1) fail("basis.n", "must be >= 1");
    if (!(basis.f1 > 0.0)) fail("basis.f1", "must be positive");
    if (basis.rank_rule == hyperbasis::RankRule::explicit_list && static_cast<int>(basis.ranks.size()) != basis.n)
      fail("basis.ranks", "needs basis.n entries for the explicit rule");
    if (material.is_saturable() && !(basis.mu_r > 0.0))
      fail("basis.mu_r", "a saturable sheet needs the basis permeability");
    if (!geometry.has_shield) fail("geometry.has_shield", "the thin-shell model needs a sheet");
  }
  if (!(mesh.ts_surface_h > 0.0)) fail("mesh.ts_surface_h", "must be positive");
  if (!(mesh.reference_surface_h > 0.0)) fail("mesh.reference_surface_h", "must be positive");
  if (!(mesh.outer_h > 0.0)) fail("mesh.outer_h", "must be positive");
  if (mesh.layers < 1) fail("mesh.layers", "must be >= 1");
  for (const auto& [n, p] : probes) {
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("probe '" + n + "': " + e.what());
    }
  }
}

mesh2d::GeometrySpec Scenario::effective_geometry() const {
  mesh2d::GeometrySpec g = scale == 1.0 ? geometry : geometry.scaled(scale);
  g.resolve_shield_volume = model == ModelKind::reference;
  return g;
}

mesh2d::Mesh2D Scenario::build_mesh() const {
  const double h = model == ModelKind::ts ? mesh.ts_surface_h : mesh.reference_surface_h;
  return mesh2d::generate_mesh(effective_geometry(), h, mesh.outer_h, mesh.layers);
}

hyperbasis::BasisSet Scenario::build_basis() const {
  const double mu_r = basis.mu_r > 0.0 ? basis.mu_r : materials::permeability(material, 0.0) / mu0;
  return hyperbasis::build_basis({geometry.d, mu_r * mu0, material.sigma}, basis.f1, basis.n, basis.rank_rule,
                                 basis.ranks);
}

}  // namespace thinshell::cli
