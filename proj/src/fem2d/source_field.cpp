#include <cmath>
#include <numbers>
#include <unordered_map>

#include "../mesh2d/mesh_util.hpp"
#include "fem_util.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/fem2d.hpp"

namespace thinshell::fem2d {

using mesh2d::Region;
namespace md = mesh2d::detail;

std::string to_string(Mode m) { return m == Mode::harmonic ? "harmonic" : "transient"; }
std::string to_string(ModelKind m) { return m == ModelKind::ts ? "ts" : "reference"; }

Mode parse_mode(const std::string& s) {
  if (s == "harmonic") return Mode::harmonic;
  if (s == "transient") return Mode::transient;
  throw InvalidArgument("unknown mode '" + s + "' (expected harmonic or transient)");
}

ModelKind parse_model(const std::string& s) {
  if (s == "ts") return ModelKind::ts;
  if (s == "reference" || s == "ref") return ModelKind::reference;
  throw InvalidArgument("unknown model '" + s + "' (expected ts or reference)");
}

SourceSpec SourceSpec::sinusoid(double amplitude, double frequency, double phase) {
  SourceSpec s;
  s.waveform = Waveform::sinusoid;
  s.amplitude = amplitude;
  s.frequency = frequency;
  s.phase = phase;
  s.validate();
  return s;
}

SourceSpec SourceSpec::pulse(double amplitude, double rise_time) {
  SourceSpec s;
  s.waveform = Waveform::pulse;
  s.amplitude = amplitude;
  s.rise_time = rise_time;
  s.validate();
  return s;
}

void SourceSpec::validate() const {
  if (!std::isfinite(amplitude)) throw InvalidArgument("source amplitude must be finite");
  if (waveform == Waveform::sinusoid && !(frequency > 0.0 && std::isfinite(frequency)))
    throw InvalidArgument("source frequency must be positive");
  if (waveform == Waveform::pulse && !(rise_time > 0.0 && std::isfinite(rise_time)))
    throw InvalidArgument("pulse rise time must be positive");
}

double SourceSpec::current(double t) const {
  if (waveform == Waveform::sinusoid) return amplitude * std::cos(2.0 * std::numbers::pi * frequency * t + phase);
  if (t <= 0.0) return 0.0;
  if (t >= rise_time) return amplitude;
  return 0.5 * amplitude * (1.0 - std::cos(std::numbers::pi * t / rise_time));
}

namespace {

using EdgeValues = std::unordered_map<std::uint64_t, double>;  // line integral from the lower to the higher index

double oriented(const EdgeValues& ev, int a, int b) {
  const auto it = ev.find(md::edge_key(a, b));
  if (it == ev.end()) return 0.0;
  return a < b ? it->second : -it->second;
}

// Gradient of the indicator of the path nodes, restricted to the non-wire
// triangles on the left of the path.
EdgeValues cut_layer(const Mesh2D& mesh, const std::vector<int>& path, const std::vector<std::vector<int>>& incident) {
  std::unordered_map<int, int> pos;
  for (int i = 0; i < static_cast<int>(path.size()); ++i) pos[path[i]] = i;
  EdgeValues ev;
  std::vector<char> seen(mesh.triangles.size(), 0);
  for (int i = 0; i < static_cast<int>(path.size()); ++i) {
    const int p = path[i];
    const Point* prev = i > 0 ? &mesh.nodes[path[i - 1]] : nullptr;
    const Point* next = i + 1 < static_cast<int>(path.size()) ? &mesh.nodes[path[i + 1]] : nullptr;
    for (int t : incident[p]) {
      const auto& tri = mesh.triangles[t];
      if (tri.region == Region::wire_plus || tri.region == Region::wire_minus) continue;
      int on_path = 0;
      for (int v : tri.v) {
        const auto it = pos.find(v);
        if (it == pos.end()) continue;
        ++on_path;
        if (std::abs(it->second - i) > 1) throw TopologyError("cut path has a chord through a triangle");
      }
      if (on_path == 3) throw TopologyError("cut path covers a whole triangle");
      if (seen[t]) continue;
      if (!md::left_of_path(prev, mesh.nodes[p], next, md::centroid(mesh, t))) continue;
      seen[t] = 1;
      for (int k = 0; k < 3; ++k) {
        const int a = tri.v[k], b = tri.v[(k + 1) % 3];
        const int ca = pos.count(a), cb = pos.count(b);
        if (ca == cb) continue;
        const int lo = std::min(a, b);
        const int hi = std::max(a, b);
        ev[md::edge_key(a, b)] = static_cast<double>(pos.count(hi)) - static_cast<double>(pos.count(lo));
      }
    }
  }
  return ev;
}

struct WireEdges {
  std::vector<int> triangles;
  double area = 0.0;
};

}  // namespace

std::vector<std::array<double, 3>> build_source_field(const Mesh2D& mesh) {
  if (mesh.cut_paths.size() != 2) throw TopologyError("source field needs one cut path per wire");
  const auto incident = md::node_triangles(mesh);
  const std::array<Region, 2> wires{Region::wire_plus, Region::wire_minus};
  std::array<WireEdges, 2> wire;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int w = 0; w < 2; ++w)
      if (mesh.triangles[t].region == wires[w]) {
        wire[w].triangles.push_back(t);
        wire[w].area += mesh.signed_area(t);
      }

  EdgeValues ev;
  for (int w = 0; w < 2; ++w) {
    if (wire[w].triangles.empty()) throw TopologyError("mesh has no " + mesh2d::to_string(wires[w]) + " triangles");
    const auto& path = mesh.cut_paths[w];
    if (path.size() < 2) throw TopologyError("cut path too short");
    EdgeValues layer = cut_layer(mesh, path, incident);

    // Counter-clockwise circulation of the raw layer around the wire boundary.
    std::unordered_map<std::uint64_t, int> count;
    for (int t : wire[w].triangles)
      for (int k = 0; k < 3; ++k) ++count[md::edge_key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3])];
    double circ = 0.0;
    for (int t : wire[w].triangles)
      for (int k = 0; k < 3; ++k) {
        const int a = mesh.triangles[t].v[k], b = mesh.triangles[t].v[(k + 1) % 3];
        if (count[md::edge_key(a, b)] == 1) circ += oriented(layer, a, b);
      }
    if (std::abs(circ) < 0.5) throw TopologyError("cut path does not link " + mesh2d::to_string(wires[w]));
    const double target = w == 0 ? 1.0 : -1.0;
    for (auto& [key, value] : layer) ev[key] += value * target / circ;
  }

  // Inside each wire: a dual spanning tree carries the uniform current density,
  // with the boundary values taken from the cut layer.
  for (int w = 0; w < 2; ++w) {
    const double sign = w == 0 ? 1.0 : -1.0;
    const auto& tris = wire[w].triangles;
    std::unordered_map<std::uint64_t, std::vector<int>> edge_tris;
    for (int t : tris)
      for (int k = 0; k < 3; ++k)
        edge_tris[md::edge_key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3])].push_back(t);
    std::unordered_map<int, int> local;
    for (int i = 0; i < static_cast<int>(tris.size()); ++i) local[tris[i]] = i;

    std::vector<int> order{0}, parent(tris.size(), -2);
    std::vector<std::uint64_t> parent_edge(tris.size(), 0);
    parent[0] = -1;
    for (std::size_t q = 0; q < order.size(); ++q) {
      const int t = tris[order[q]];
      for (int k = 0; k < 3; ++k) {
        const auto key = md::edge_key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3]);
        for (int u : edge_tris[key]) {
          const int lu = local[u];
          if (u == t || parent[lu] != -2) continue;
          parent[lu] = order[q];
          parent_edge[lu] = key;
          order.push_back(lu);
        }
      }
    }
    if (order.size() != tris.size()) throw TopologyError(mesh2d::to_string(wires[w]) + " is not connected");

    // Interior edges start at zero; tree edges are solved from the leaves up.
    for (const auto& [key, ts] : edge_tris)
      if (ts.size() == 2) ev[key] = 0.0;
    for (int q = static_cast<int>(order.size()) - 1; q >= 0; --q) {
      const int lt = order[q];
      const int t = tris[lt];
      const auto& v = mesh.triangles[t].v;
      const double want = sign * mesh.signed_area(t) / wire[w].area;
      double have = 0.0;
      int pk = -1;
      for (int k = 0; k < 3; ++k) {
        if (parent[lt] >= 0 && md::edge_key(v[k], v[(k + 1) % 3]) == parent_edge[lt]) {
          pk = k;
          continue;
        }
        have += oriented(ev, v[k], v[(k + 1) % 3]);
      }
      if (pk < 0) {
        if (std::abs(want - have) > 1e-9) throw TopologyError("wire source field does not close");
        continue;
      }
      const int a = v[pk], b = v[(pk + 1) % 3];
      ev[md::edge_key(a, b)] = (a < b ? 1.0 : -1.0) * (want - have);
    }
  }

  std::vector<std::array<double, 3>> out(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles[t].v;
    for (int k = 0; k < 3; ++k) out[t][k] = oriented(ev, v[k], v[(k + 1) % 3]);
  }
  return out;
}

}  // namespace thinshell::fem2d
