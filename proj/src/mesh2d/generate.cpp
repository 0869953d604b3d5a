#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "mesh_util.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/mesh2d.hpp"

namespace thinshell::mesh2d {

namespace {

// Size growth per unit distance from a feature.
constexpr double kGrading = 0.25;
constexpr int kMaxLevel = 14;
// Size ratio at the sheet edges relative to the sheet surface.
constexpr double kTipRefinement = 0.25;

struct Box {
  double x0, y0, x1, y1;
};

double box_distance(const Box& a, const Box& b) {
  const double dx = std::max({0.0, a.x0 - b.x1, b.x0 - a.x1});
  const double dy = std::max({0.0, a.y0 - b.y1, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

struct Feature {
  Box box;
  double h;
};

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-7; }

// Base cell size u0 = box_w / nx with square cells and every feature
// coordinate on the lattice of some level no deeper than `align`.
struct BaseGrid {
  double u0 = 0.0;
  int nx = 0, ny = 0;
  int align = 0;
};

BaseGrid choose_base(const GeometrySpec& g, double outer_h, const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  const int nmin = std::max(1, static_cast<int>(std::ceil(g.box_w / outer_h - 1e-9)));
  for (int nx = nmin; nx <= 4 * nmin + 8; ++nx) {
    const double u0 = g.box_w / nx;
    const double ny = g.box_h / u0;
    if (!is_integer(ny)) continue;
    for (int k = 0; k <= 8; ++k) {
      const double unit = u0 / std::ldexp(1.0, k);
      bool ok = true;
      for (double x : xs) ok = ok && is_integer((x + 0.5 * g.box_w) / unit);
      for (double y : ys) ok = ok && is_integer((y + 0.5 * g.box_h) / unit);
      if (ok) return {u0, nx, static_cast<int>(std::lround(ny)), k};
    }
  }
  throw InvalidArgument("generate_mesh: no base grid aligns the geometry with outer_h = " + std::to_string(outer_h));
}

struct Quadtree {
  int lmax = 0;
  std::unordered_set<std::uint64_t> leaves;

  static std::uint64_t key(int level, int i, int j) {
    return (static_cast<std::uint64_t>(level) << 56) | (static_cast<std::uint64_t>(i) << 28) |
           static_cast<std::uint64_t>(j);
  }
  static int level_of(std::uint64_t k) { return static_cast<int>(k >> 56); }
  static int i_of(std::uint64_t k) { return static_cast<int>((k >> 28) & ((1u << 28) - 1)); }
  static int j_of(std::uint64_t k) { return static_cast<int>(k & ((1u << 28) - 1)); }
  int span(int level) const { return 1 << (lmax - level); }

  // Leaf covering the lattice point (px, py), given in half units so that
  // edge midpoints of the finest cells are representable.
  std::uint64_t find(long px2, long py2) const {
    for (int level = 0; level <= lmax; ++level) {
      const long s2 = 2L * span(level);
      if (px2 < 0 || py2 < 0) return ~0ull;
      const auto k = key(level, static_cast<int>(px2 / s2), static_cast<int>(py2 / s2));
      if (leaves.count(k)) return k;
    }
    return ~0ull;
  }
};

}  // namespace

Mesh2D generate_mesh(const GeometrySpec& geom, double shield_surface_h, double outer_h, int through_thickness_layers) {
  geom.validate();
  if (!(shield_surface_h > 0.0) || !(outer_h > 0.0))
    throw InvalidArgument("generate_mesh: element sizes must be positive");
  if (outer_h > std::min(geom.box_w, geom.box_h) || (geom.has_shield && shield_surface_h > geom.l))
    throw InvalidArgument("generate_mesh: element size exceeds the domain");
  if (geom.has_shield && geom.resolve_shield_volume && through_thickness_layers < 1)
    throw InvalidArgument("generate_mesh: through_thickness_layers must be >= 1");

  // Feature lines, sizes, and the lattice they require.
  std::vector<double> xs, ys;
  std::vector<Feature> features;
  const double wire_h_target = 0.25 * std::min(geom.wire_w, geom.wire_h);
  for (Region w : {Region::wire_plus, Region::wire_minus}) {
    const auto b = geom.wire_box(w);
    xs.insert(xs.end(), {b[0].x(), b[1].x()});
    ys.insert(ys.end(), {b[0].y(), b[1].y()});
    features.push_back({{b[0].x(), b[0].y(), b[1].x(), b[1].y()}, wire_h_target});
  }
  if (geom.has_shield) {
    xs.insert(xs.end(), {-0.5 * geom.l, 0.5 * geom.l});
    ys.push_back(0.0);
    features.push_back({{-0.5 * geom.l, 0.0, 0.5 * geom.l, 0.0}, shield_surface_h});
    // The field is singular at the sheet edges of a thin-shell mesh.
    if (!geom.resolve_shield_volume)
      for (double x : {-0.5 * geom.l, 0.5 * geom.l})
        features.push_back({{x, 0.0, x, 0.0}, kTipRefinement * shield_surface_h});
  }
  const BaseGrid base = choose_base(geom, outer_h, xs, ys);

  // Round each feature size to a quadtree level, never coarser than the alignment level.
  int lmax = base.align;
  for (auto& f : features) {
    const int level = std::clamp(static_cast<int>(std::lround(std::log2(base.u0 / f.h))), base.align, kMaxLevel);
    f.h = base.u0 / std::ldexp(1.0, level);
    lmax = std::max(lmax, level);
  }

  Quadtree tree;
  tree.lmax = lmax;
  const double unit = base.u0 / std::ldexp(1.0, lmax);
  const double bx0 = -0.5 * geom.box_w, by0 = -0.5 * geom.box_h;
  auto cell_box = [&](int level, int i, int j) {
    const double s = base.u0 / std::ldexp(1.0, level);
    return Box{bx0 + i * s, by0 + j * s, bx0 + (i + 1) * s, by0 + (j + 1) * s};
  };
  auto needs_split = [&](int level, int i, int j) {
    if (level >= lmax) return false;
    const double s = base.u0 / std::ldexp(1.0, level);
    const Box b = cell_box(level, i, j);
    for (const auto& f : features)
      if (s > (f.h + kGrading * box_distance(b, f.box)) * (1.0 + 1e-9)) return true;
    return false;
  };

  std::vector<std::uint64_t> stack;
  for (int j = 0; j < base.ny; ++j)
    for (int i = 0; i < base.nx; ++i) stack.push_back(Quadtree::key(0, i, j));
  while (!stack.empty()) {
    const auto k = stack.back();
    stack.pop_back();
    const int level = Quadtree::level_of(k), i = Quadtree::i_of(k), j = Quadtree::j_of(k);
    if (needs_split(level, i, j)) {
      for (int c = 0; c < 4; ++c) stack.push_back(Quadtree::key(level + 1, 2 * i + (c & 1), 2 * j + (c >> 1)));
    } else {
      tree.leaves.insert(k);
    }
  }

  // 2:1 balance across edges.
  {
    std::deque<std::uint64_t> work(tree.leaves.begin(), tree.leaves.end());
    const long nx2 = 2L * base.nx * tree.span(0), ny2 = 2L * base.ny * tree.span(0);
    while (!work.empty()) {
      const auto k = work.front();
      work.pop_front();
      if (!tree.leaves.count(k)) continue;
      const int level = Quadtree::level_of(k);
      if (level < 2) continue;
      const long s2 = 2L * tree.span(level);
      const long x0 = Quadtree::i_of(k) * s2, y0 = Quadtree::j_of(k) * s2;
      const long probes[4][2] = {
          {x0 - 1, y0 + s2 / 2}, {x0 + s2 + 1, y0 + s2 / 2}, {x0 + s2 / 2, y0 - 1}, {x0 + s2 / 2, y0 + s2 + 1}};
      for (const auto& p : probes) {
        if (p[0] < 0 || p[1] < 0 || p[0] >= nx2 || p[1] >= ny2) continue;
        for (;;) {
          const auto nb = tree.find(p[0], p[1]);
          if (nb == ~0ull || Quadtree::level_of(nb) >= level - 1) break;
          tree.leaves.erase(nb);
          const int nl = Quadtree::level_of(nb), ni = Quadtree::i_of(nb), nj = Quadtree::j_of(nb);
          for (int c = 0; c < 4; ++c) {
            const auto ck = Quadtree::key(nl + 1, 2 * ni + (c & 1), 2 * nj + (c >> 1));
            tree.leaves.insert(ck);
            work.push_back(ck);
          }
        }
      }
    }
  }

  // Lattice nodes.
  std::vector<std::uint64_t> leaves(tree.leaves.begin(), tree.leaves.end());
  std::sort(leaves.begin(), leaves.end(), [](std::uint64_t a, std::uint64_t b) {
    const int la = Quadtree::level_of(a), lb = Quadtree::level_of(b);
    const long sa = 1L << (kMaxLevel - la), sb = 1L << (kMaxLevel - lb);
    const long ya = Quadtree::j_of(a) * sa, yb = Quadtree::j_of(b) * sb;
    if (ya != yb) return ya < yb;
    const long xa = Quadtree::i_of(a) * sa, xb = Quadtree::i_of(b) * sb;
    if (xa != xb) return xa < xb;
    return la < lb;
  });
  Mesh2D mesh;
  std::unordered_map<std::uint64_t, int> node_of;
  const long ox = std::lround(0.5 * geom.box_w / unit), oy = std::lround(0.5 * geom.box_h / unit);
  const bool centred = is_integer(0.5 * geom.box_w / unit) && is_integer(0.5 * geom.box_h / unit);
  auto lattice_key = [](long ix, long iy) {
    return (static_cast<std::uint64_t>(ix) << 32) | static_cast<std::uint64_t>(iy);
  };
  auto node_at = [&](long ix, long iy) {
    const auto key = lattice_key(ix, iy);
    const auto it = node_of.find(key);
    if (it != node_of.end()) return it->second;
    const int id = mesh.num_nodes();
    // Coordinates relative to the centre keep the mid-lines exact.
    if (centred)
      mesh.nodes.emplace_back((ix - ox) * unit, (iy - oy) * unit);
    else
      mesh.nodes.emplace_back(bx0 + ix * unit, by0 + iy * unit);
    node_of.emplace(key, id);
    return id;
  };
  for (const auto k : leaves) {
    const long s = tree.span(Quadtree::level_of(k));
    const long x0 = Quadtree::i_of(k) * s, y0 = Quadtree::j_of(k) * s;
    node_at(x0, y0);
    node_at(x0 + s, y0);
    node_at(x0 + s, y0 + s);
    node_at(x0, y0 + s);
  }

  auto region_of = [&](const Point& c) {
    for (Region w : {Region::wire_plus, Region::wire_minus}) {
      const auto b = geom.wire_box(w);
      if (c.x() > b[0].x() && c.x() < b[1].x() && c.y() > b[0].y() && c.y() < b[1].y()) return w;
    }
    return Region::air;
  };
  auto add_tri = [&](int a, int b, int c) {
    if (detail::orient(mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]) < 0.0) std::swap(b, c);
    const Point cen = (mesh.nodes[a] + mesh.nodes[b] + mesh.nodes[c]) / 3.0;
    mesh.triangles.push_back({{a, b, c}, region_of(cen)});
  };
  for (const auto k : leaves) {
    const long s = tree.span(Quadtree::level_of(k));
    const long x0 = Quadtree::i_of(k) * s, y0 = Quadtree::j_of(k) * s;
    const int c00 = node_of.at(lattice_key(x0, y0)), c10 = node_of.at(lattice_key(x0 + s, y0));
    const int c11 = node_of.at(lattice_key(x0 + s, y0 + s)), c01 = node_of.at(lattice_key(x0, y0 + s));
    std::vector<int> ring{c00};
    bool hanging = false;
    auto mid = [&](long mx, long my) {
      if (s < 2) return;
      const auto it = node_of.find(lattice_key(mx, my));
      if (it != node_of.end()) {
        ring.push_back(it->second);
        hanging = true;
      }
    };
    mid(x0 + s / 2, y0);
    ring.push_back(c10);
    mid(x0 + s, y0 + s / 2);
    ring.push_back(c11);
    mid(x0 + s / 2, y0 + s);
    ring.push_back(c01);
    mid(x0, y0 + s / 2);
    if (!hanging) {
      // Diagonals mirror across the centre lines.
      const Point c = 0.5 * (mesh.nodes[c00] + mesh.nodes[c11]);
      if ((c.x() > 0.0) == (c.y() > 0.0)) {
        add_tri(c00, c10, c11);
        add_tri(c00, c11, c01);
      } else {
        add_tri(c00, c10, c01);
        add_tri(c10, c11, c01);
      }
    } else {
      const int centre = node_at(x0 + s / 2, y0 + s / 2);
      for (std::size_t r = 0; r < ring.size(); ++r) add_tri(centre, ring[r], ring[(r + 1) % ring.size()]);
    }
  }

  if (!geom.has_shield) {
    mesh.kind = MeshKind::plain;
    mesh.edges = boundary_edges(mesh);
    mesh.cut_paths = build_cut_paths(mesh, geom);
    return mesh;
  }

  // Nodes on the shield mid-line, ordered by x.
  const double eps = 1e-9 * geom.l;
  std::vector<int> line;
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    const Point& p = mesh.nodes[v];
    if (std::abs(p.y()) < eps && p.x() > -0.5 * geom.l - eps && p.x() < 0.5 * geom.l + eps) line.push_back(v);
  }
  std::sort(line.begin(), line.end(), [&](int a, int b) { return mesh.nodes[a].x() < mesh.nodes[b].x(); });
  if (line.size() < 2) throw InvalidArgument("generate_mesh: shield mid-line is not resolved");

  if (!geom.resolve_shield_volume) {
    Mesh2D ts = insert_crack(mesh, line);
    ts.cut_paths = build_cut_paths(ts, geom);
    return ts;
  }

  // Volume mesh: split the mid-line into a structured column of layer nodes,
  // push nearby nodes away by up to d/2, and close the tips with fans.
  const int layers = through_thickness_layers;
  const double half_d = 0.5 * geom.d;
  const auto incident = detail::node_triangles(mesh);
  std::vector<std::vector<int>> column(line.size());
  std::vector<char> on_line(mesh.nodes.size(), 0);
  for (int v : line) on_line[v] = 1;

  auto tip_neighbour = [&](int tip, double dir) {
    int best = -1;
    double bx = 0.0;
    for (int t : incident[tip])
      for (int v : mesh.triangles[t].v) {
        const Point& p = mesh.nodes[v];
        if (std::abs(p.y()) < eps && (p.x() - mesh.nodes[tip].x()) * dir > eps) {
          const double dx = std::abs(p.x() - mesh.nodes[tip].x());
          if (best < 0 || dx < bx) {
            best = v;
            bx = dx;
          }
        }
      }
    if (best < 0) throw InvalidArgument("generate_mesh: shield tip has no neighbour on the mid-line");
    return best;
  };
  const int left_q = tip_neighbour(line.front(), -1.0);
  const int right_q = tip_neighbour(line.back(), 1.0);

  const double rb = std::min(8.0 * shield_surface_h, 0.5 * geom.l2);
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (on_line[v]) continue;
    Point& p = mesh.nodes[v];
    if (std::abs(p.y()) < eps) continue;
    const double dx = std::max(0.0, std::abs(p.x()) - 0.5 * geom.l);
    const double beta = std::max(0.0, 1.0 - std::hypot(dx, p.y()) / rb);
    p.y() += (p.y() > 0.0 ? 1.0 : -1.0) * half_d * beta;
  }
  for (std::size_t c = 0; c < line.size(); ++c) {
    const double x = mesh.nodes[line[c]].x();
    for (int k = 0; k <= layers; ++k) {
      column[c].push_back(mesh.num_nodes());
      const double y = (k == layers) ? half_d : -half_d + geom.d * k / layers;
      mesh.nodes.emplace_back(x, y);
    }
  }
  for (std::size_t c = 0; c < line.size(); ++c) {
    const int v = line[c];
    for (int t : incident[v]) {
      const Point cen = detail::centroid(mesh, t);
      const int repl = cen.y() > 0.0 ? column[c].back() : column[c].front();
      for (auto& tv : mesh.triangles[t].v)
        if (tv == v) tv = repl;
    }
  }
  auto add_shield = [&](int a, int b, int c) {
    if (detail::orient(mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]) < 0.0) std::swap(b, c);
    mesh.triangles.push_back({{a, b, c}, Region::shield});
  };
  for (std::size_t c = 0; c + 1 < line.size(); ++c) {
    const bool right = 0.5 * (mesh.nodes[column[c][0]].x() + mesh.nodes[column[c + 1][0]].x()) > 0.0;
    for (int k = 0; k < layers; ++k) {
      const int a = column[c][k], b = column[c + 1][k], cc = column[c + 1][k + 1], dd = column[c][k + 1];
      const bool up = (k < layers / 2) == right;
      if (up) {
        add_shield(a, b, cc);
        add_shield(a, cc, dd);
      } else {
        add_shield(a, b, dd);
        add_shield(b, cc, dd);
      }
    }
  }
  for (int k = 0; k < layers; ++k) {
    add_tri(left_q, column.front()[k], column.front()[k + 1]);
    add_tri(right_q, column.back()[k], column.back()[k + 1]);
  }

  // Drop the original mid-line nodes, which no triangle references now.
  on_line.resize(mesh.nodes.size(), 0);
  std::vector<int> remap(mesh.nodes.size(), -1);
  std::vector<Point> kept;
  kept.reserve(mesh.nodes.size());
  for (int v = 0; v < mesh.num_nodes(); ++v)
    if (!on_line[v]) {
      remap[v] = static_cast<int>(kept.size());
      kept.push_back(mesh.nodes[v]);
    }
  for (auto& t : mesh.triangles)
    for (auto& v : t.v) v = remap[v];
  mesh.nodes = std::move(kept);
  mesh.kind = MeshKind::volume;
  mesh.edges = boundary_edges(mesh);
  mesh.cut_paths = build_cut_paths(mesh, geom);
  return mesh;
}

}  // namespace thinshell::mesh2d
