#include "thinshell/mesh2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "mesh_util.hpp"
#include "thinshell/errors.hpp"

namespace thinshell::mesh2d {

std::string to_string(Region r) {
  switch (r) {
    case Region::air:
      return "air";
    case Region::shield:
      return "shield";
    case Region::wire_plus:
      return "wire+";
    case Region::wire_minus:
      return "wire-";
  }
  return "?";
}

std::string to_string(EdgeTag t) {
  switch (t) {
    case EdgeTag::outer:
      return "outer";
    case EdgeTag::crack_plus:
      return "crack+";
    case EdgeTag::crack_minus:
      return "crack-";
  }
  return "?";
}

std::string to_string(MeshKind k) {
  switch (k) {
    case MeshKind::plain:
      return "plain";
    case MeshKind::ts:
      return "ts";
    case MeshKind::volume:
      return "volume";
  }
  return "?";
}

void GeometrySpec::validate() const {
  for (double v : {l, d, wire_w, wire_h, l1, l2, box_w, box_h})
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("GeometrySpec: all lengths must be positive");
  if (l1 <= wire_w) throw InvalidArgument("GeometrySpec: wires overlap (l1 <= wire width)");
  const double half_w = 0.5 * box_w, half_h = 0.5 * box_h;
  const double wires_x = 0.5 * (l1 + wire_w);
  const double wires_y = l2 + wire_h;
  if ((has_shield && 0.5 * l >= half_w) || wires_x >= half_w || wires_y >= half_h || 0.5 * d >= half_h)
    throw InvalidArgument("GeometrySpec: shield and wires must fit inside the air box");
  if (has_shield && l2 <= 0.5 * d) throw InvalidArgument("GeometrySpec: wires intersect the shield (l2 <= d/2)");
}

std::array<Point, 2> GeometrySpec::wire_box(Region wire) const {
  double cx = 0.0;
  if (wire == Region::wire_plus)
    cx = -0.5 * l1;
  else if (wire == Region::wire_minus)
    cx = 0.5 * l1;
  else
    throw InvalidArgument("wire_box: region is not a wire");
  return {Point(cx - 0.5 * wire_w, -l2 - wire_h), Point(cx + 0.5 * wire_w, -l2)};
}

GeometrySpec GeometrySpec::scaled(double factor) const {
  if (!(factor > 0.0) || factor > 1.0) throw InvalidArgument("GeometrySpec::scaled: factor must be in (0, 1]");
  GeometrySpec g = *this;
  g.box_w *= factor;
  g.box_h *= factor;
  return g;
}

std::vector<int> Mesh2D::crack_chain(bool plus_side) const {
  if (!has_crack()) throw TopologyError("mesh has no crack");
  std::vector<int> chain;
  chain.reserve(crack_pairs.size() + 2);
  chain.push_back(crack_endpoints[0]);
  for (const auto& p : crack_pairs) chain.push_back(plus_side ? p.plus : p.minus);
  chain.push_back(crack_endpoints[1]);
  return chain;
}

double Mesh2D::signed_area(int t) const {
  const auto& v = triangles[t].v;
  return detail::orient(nodes[v[0]], nodes[v[1]], nodes[v[2]]) * 0.5;
}

double triangle_quality(const Point& a, const Point& b, const Point& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  const double area = 0.5 * std::abs(detail::orient(a, b, c));
  const double s = 0.5 * (la + lb + lc);
  const double denom = s * la * lb * lc;
  if (!(area > 0.0) || !(denom > 0.0)) return 0.0;
  // 2 r / R with r = A / s and R = abc / (4 A).
  return std::clamp(8.0 * area * area / denom, 0.0, 1.0);
}

QualityReport mesh_quality(const Mesh2D& mesh) {
  QualityReport rep;
  rep.q.reserve(mesh.triangles.size());
  double sum = 0.0, mn = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles) {
    const double q = triangle_quality(mesh.nodes[t.v[0]], mesh.nodes[t.v[1]], mesh.nodes[t.v[2]]);
    rep.q.push_back(q);
    sum += q;
    mn = std::min(mn, q);
  }
  if (!rep.q.empty()) {
    rep.minimum = mn;
    rep.mean = sum / static_cast<double>(rep.q.size());
  }
  return rep;
}

int euler_characteristic(const Mesh2D& mesh) {
  std::unordered_set<std::uint64_t> edges;
  std::vector<char> used(mesh.nodes.size(), 0);
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      used[t.v[k]] = 1;
      edges.insert(detail::edge_key(t.v[k], t.v[(k + 1) % 3]));
    }
  const auto v = std::count(used.begin(), used.end(), 1);
  return static_cast<int>(v) - static_cast<int>(edges.size()) + static_cast<int>(mesh.triangles.size());
}

std::vector<BoundaryEdge> boundary_edges(const Mesh2D& mesh) {
  // Edges used by a single triangle lie on the boundary.
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) ++count[detail::edge_key(t.v[k], t.v[(k + 1) % 3])];
  std::unordered_set<int> plus, minus;
  for (const auto& p : mesh.crack_pairs) {
    plus.insert(p.plus);
    minus.insert(p.minus);
  }
  std::vector<BoundaryEdge> out;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t.v[k], b = t.v[(k + 1) % 3];
      if (count[detail::edge_key(a, b)] != 1) continue;
      BoundaryEdge e{{a, b}, EdgeTag::outer};
      if (plus.count(a) || plus.count(b))
        e.tag = EdgeTag::crack_plus;
      else if (minus.count(a) || minus.count(b))
        e.tag = EdgeTag::crack_minus;
      out.push_back(e);
    }
  std::sort(out.begin(), out.end(), [](const BoundaryEdge& x, const BoundaryEdge& y) { return x.v < y.v; });
  return out;
}

Mesh2D insert_crack(const Mesh2D& mesh, const std::vector<int>& polyline) {
  if (polyline.size() < 2) throw InvalidArgument("insert_crack: polyline needs at least two nodes");
  if (mesh.has_crack()) throw InvalidArgument("insert_crack: mesh already has a crack");
  const auto edges = detail::edge_set(mesh);
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const int a = polyline[i], b = polyline[i + 1];
    if (a < 0 || b < 0 || a >= mesh.num_nodes() || b >= mesh.num_nodes())
      throw InvalidArgument("insert_crack: polyline node out of range");
    if (!edges.count(detail::edge_key(a, b)))
      throw InvalidArgument("insert_crack: polyline is not edge-aligned between nodes " + std::to_string(a) + " and " +
                            std::to_string(b));
  }
  {
    std::set<int> uniq(polyline.begin(), polyline.end());
    if (uniq.size() != polyline.size()) throw InvalidArgument("insert_crack: polyline revisits a node");
  }

  Mesh2D out = mesh;
  const auto incident = detail::node_triangles(mesh);
  const int last = static_cast<int>(polyline.size()) - 1;
  for (int i = 1; i < last; ++i) {
    const int p = polyline[i];
    const int copy = out.num_nodes();
    out.nodes.push_back(mesh.nodes[p]);
    const Point& pp = mesh.nodes[p];
    const Point& prev = mesh.nodes[polyline[i - 1]];
    const Point& next = mesh.nodes[polyline[i + 1]];
    for (int t : incident[p]) {
      const Point c = detail::centroid(mesh, t);
      if (detail::left_of_path(&prev, pp, &next, c)) continue;
      for (auto& v : out.triangles[t].v)
        if (v == p) v = copy;
    }
    out.crack_pairs.push_back({p, copy});
  }
  out.crack_endpoints = {polyline.front(), polyline.back()};
  out.kind = MeshKind::ts;
  out.edges = boundary_edges(out);
  return out;
}

std::vector<std::vector<int>> build_cut_paths(const Mesh2D& mesh, const GeometrySpec& geom) {
  const int n = mesh.num_nodes();
  const auto adj = detail::node_neighbours(mesh);
  const double eps = 1e-9 * std::max(geom.box_w, geom.box_h);
  std::vector<char> blocked(n, 0), outer(n, 0);
  for (const auto& e : boundary_edges(mesh))
    if (e.tag == EdgeTag::outer) outer[e.v[0]] = outer[e.v[1]] = 1;
  if (mesh.has_crack()) {
    for (int v : mesh.crack_chain(true)) blocked[v] = 1;
    for (int v : mesh.crack_chain(false)) blocked[v] = 1;
  }
  for (const auto& t : mesh.triangles)
    if (t.region == Region::shield)
      for (int v : t.v) blocked[v] = 1;
  const std::array<Region, 2> wires{Region::wire_plus, Region::wire_minus};
  std::array<int, 2> start{-1, -1};
  for (int w = 0; w < 2; ++w) {
    const auto box = geom.wire_box(wires[w]);
    const Point target(0.5 * (box[0].x() + box[1].x()), box[0].y());
    double best = std::numeric_limits<double>::infinity();
    for (int v = 0; v < n; ++v) {
      const Point& p = mesh.nodes[v];
      const bool inside =
          p.x() > box[0].x() - eps && p.x() < box[1].x() + eps && p.y() > box[0].y() - eps && p.y() < box[1].y() + eps;
      if (!inside) continue;
      blocked[v] = 1;
      const bool on_bottom = std::abs(p.y() - box[0].y()) < eps && p.x() > box[0].x() + eps && p.x() < box[1].x() - eps;
      const double dist = (p - target).norm();
      if (on_bottom && dist < best) {
        best = dist;
        start[w] = v;
      }
    }
    if (start[w] < 0) throw TopologyError("build_cut_paths: no node on the bottom side of " + to_string(wires[w]));
  }

  std::vector<std::vector<int>> paths;
  for (int w = 0; w < 2; ++w) {
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> from(n, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[start[w]] = 0.0;
    pq.push({0.0, start[w]});
    int reached = -1;
    while (!pq.empty()) {
      const auto [dv, v] = pq.top();
      pq.pop();
      if (dv > dist[v]) continue;
      if (outer[v]) {
        reached = v;
        break;
      }
      for (int u : adj[v]) {
        if (blocked[u]) continue;
        const double du = dv + (mesh.nodes[u] - mesh.nodes[v]).norm();
        if (du < dist[u]) {
          dist[u] = du;
          from[u] = v;
          pq.push({du, u});
        }
      }
    }
    if (reached < 0) throw TopologyError("build_cut_paths: outer boundary unreachable from " + to_string(wires[w]));
    std::vector<int> path;
    for (int v = reached; v >= 0; v = from[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    for (int v : path) blocked[v] = 1;
    paths.push_back(std::move(path));
  }
  return paths;
}

void validate_mesh(const Mesh2D& mesh) {
  const int n = mesh.num_nodes();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles[t].v)
      if (v < 0 || v >= n) throw TopologyError("triangle " + std::to_string(t) + " references a missing node");
    if (!(mesh.signed_area(t) > 0.0))
      throw TopologyError("triangle " + std::to_string(t) + " is not positively oriented");
  }
  if (mesh.kind == MeshKind::ts && !mesh.has_crack()) throw TopologyError("ts mesh without a crack");
  if (mesh.has_crack()) {
    std::unordered_map<int, int> seen;
    for (const auto& p : mesh.crack_pairs) {
      if (mesh.nodes[p.plus] != mesh.nodes[p.minus]) throw TopologyError("crack pair with distinct coordinates");
      if (++seen[p.plus] > 1 || ++seen[p.minus] > 1) throw TopologyError("crack node appears in two pairs");
    }
    for (int e : mesh.crack_endpoints)
      if (seen.count(e)) throw TopologyError("crack endpoint is duplicated");
    std::unordered_map<int, int> partner;
    for (const auto& p : mesh.crack_pairs) {
      partner[p.plus] = p.minus;
      partner[p.minus] = p.plus;
    }
    for (const auto& t : mesh.triangles)
      for (int a : t.v) {
        const auto it = partner.find(a);
        if (it == partner.end()) continue;
        for (int b : t.v)
          if (b == it->second) throw TopologyError("triangle references both nodes of a crack pair");
      }
  }
  const auto edges = detail::edge_set(mesh);
  for (const auto& path : mesh.cut_paths) {
    if (path.size() < 2) throw TopologyError("cut path shorter than one edge");
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      if (!edges.count(detail::edge_key(path[i], path[i + 1]))) throw TopologyError("cut path leaves the mesh edges");
    std::set<int> uniq(path.begin(), path.end());
    if (uniq.size() != path.size()) throw TopologyError("cut path is not simple");
  }
}

PointLocator::PointLocator(const Mesh2D& mesh) : mesh_(&mesh) {
  if (mesh.nodes.empty()) throw InvalidArgument("PointLocator: empty mesh");
  lo_ = hi_ = mesh.nodes[0];
  for (const auto& p : mesh.nodes) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  const double span_x = std::max(hi_.x() - lo_.x(), 1e-300), span_y = std::max(hi_.y() - lo_.y(), 1e-300);
  const double cells = std::max(1.0, std::sqrt(static_cast<double>(mesh.triangles.size())));
  nx_ = std::max(1, static_cast<int>(cells * std::sqrt(span_x / span_y)));
  ny_ = std::max(1, static_cast<int>(cells * std::sqrt(span_y / span_x)));
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  auto cell = [&](double v, double lo, double span, int m) {
    return std::clamp(static_cast<int>((v - lo) / span * m), 0, m - 1);
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    Point a = mesh.nodes[mesh.triangles[t].v[0]], b = a;
    for (int v : mesh.triangles[t].v) {
      a = a.cwiseMin(mesh.nodes[v]);
      b = b.cwiseMax(mesh.nodes[v]);
    }
    const int i0 = cell(a.x(), lo_.x(), span_x, nx_), i1 = cell(b.x(), lo_.x(), span_x, nx_);
    const int j0 = cell(a.y(), lo_.y(), span_y, ny_), j1 = cell(b.y(), lo_.y(), span_y, ny_);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
  }
}

Eigen::Vector3d PointLocator::barycentric(int t, const Point& p) const {
  const auto& v = mesh_->triangles[t].v;
  const Point &a = mesh_->nodes[v[0]], &b = mesh_->nodes[v[1]], &c = mesh_->nodes[v[2]];
  const double area2 = detail::orient(a, b, c);
  const double l0 = detail::orient(p, b, c) / area2;
  const double l1 = detail::orient(a, p, c) / area2;
  return {l0, l1, 1.0 - l0 - l1};
}

int PointLocator::locate(const Point& p, int prefer) const {
  const double span_x = std::max(hi_.x() - lo_.x(), 1e-300), span_y = std::max(hi_.y() - lo_.y(), 1e-300);
  const double tol = 1e-12;
  if (p.x() < lo_.x() - tol * span_x || p.x() > hi_.x() + tol * span_x || p.y() < lo_.y() - tol * span_y ||
      p.y() > hi_.y() + tol * span_y)
    return -1;
  const int i = std::clamp(static_cast<int>((p.x() - lo_.x()) / span_x * nx_), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>((p.y() - lo_.y()) / span_y * ny_), 0, ny_ - 1);
  int found = -1;
  for (int t : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
    const auto l = barycentric(t, p);
    if (l.minCoeff() < -1e-10) continue;
    if (prefer >= 0 && static_cast<int>(mesh_->triangles[t].region) == prefer) return t;
    if (found < 0) found = t;
    if (prefer < 0) break;
  }
  return found;
}

}  // namespace thinshell::mesh2d
