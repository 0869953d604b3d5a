#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "../mesh2d/mesh_util.hpp"
#include "fem_util.hpp"
#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/fem2d.hpp"

namespace thinshell::fem2d {

using mesh2d::Region;
namespace md = mesh2d::detail;

std::string to_string(Component c) {
  switch (c) {
    case Component::hx:
      return "hx";
    case Component::hy:
      return "hy";
    default:
      return "magnitude";
  }
}

Component parse_component(const std::string& s) {
  if (s == "hx") return Component::hx;
  if (s == "hy") return Component::hy;
  if (s == "magnitude" || s == "abs") return Component::magnitude;
  throw InvalidArgument("unknown field component '" + s + "' (expected hx, hy or magnitude)");
}

namespace {

int resolve_step(const FieldSolution& sol, int step) {
  if (sol.mode != Mode::transient) throw InvalidArgument("step index on a harmonic solution");
  const int s = step < 0 ? sol.steps() : step;
  if (s < 0 || s > sol.steps()) throw InvalidArgument("step " + std::to_string(step) + " out of range");
  return s;
}

template <typename Vec>
Eigen::Matrix<typename Vec::Scalar, 2, 1> element_field(const FieldSolution& sol, int t, const Vec& x,
                                                        typename Vec::Scalar current) {
  using S = typename Vec::Scalar;
  const auto& mesh = *sol.mesh;
  const auto p = detail::p1_triangle(mesh, t);
  const auto& v = mesh.triangles[t].v;
  Eigen::Matrix<S, 2, 1> out = Eigen::Matrix<S, 2, 1>::Zero();
  if (sol.model == ModelKind::ts) {
    out = current * detail::whitney_mean(p, sol.ts->source_edges[t]).cast<S>();
    for (int i = 0; i < 3; ++i) out -= x[v[i]] * p.grad[i].cast<S>();
    return out;
  }
  for (int i = 0; i < 3; ++i) out += x[v[i]] * detail::curl(p.grad[i]).cast<S>();
  if (mesh.triangles[t].region != Region::shield) return out / mu0;
  if constexpr (std::is_same_v<S, double>) {
    if (sol.material.is_saturable()) {
      const double bn = out.norm();
      return bn > 0.0 ? Eigen::Vector2d((materials::field_from_flux(sol.material, bn) / bn) * out)
                      : Eigen::Vector2d::Zero();
    }
  }
  return out / materials::permeability(sol.material, 0.0);
}

Eigen::Vector2d raw_state_h(const FieldSolution& sol, int t, int step) {
  const int s = resolve_step(sol, step);
  return element_field(sol, t, sol.states[s], sol.currents[s]);
}

double pick(const Eigen::Vector2d& h, Component c) {
  switch (c) {
    case Component::hx:
      return h.x();
    case Component::hy:
      return h.y();
    default:
      return h.norm();
  }
}

cplx pick(const Eigen::Vector2cd& h, Component c) {
  switch (c) {
    case Component::hx:
      return h.x();
    case Component::hy:
      return h.y();
    default:
      return std::sqrt(std::norm(h.x()) + std::norm(h.y()));
  }
}

// Weights of element values giving the recovered value at node v: a
// least-squares linear fit over the same-region triangles around v, widened
// twice by edge neighbours. The wider patch keeps the fit well posed at region
// faces, where one ring of thin layer elements fixes no normal slope. The patch grows once more when the fit
// is still degenerate; a plain area average is the last resort.
using EdgeTriangles = std::unordered_map<std::uint64_t, std::vector<int>>;

std::vector<std::pair<int, double>> nodal_weights(const Mesh2D& mesh, const std::vector<std::vector<int>>& incident,
                                                  const EdgeTriangles& edge_triangles, int v, Region r) {
  std::vector<int> patch;
  for (int u : incident[v])
    if (mesh.triangles[u].region == r) patch.push_back(u);
  const Point& x0 = mesh.nodes[v];
  // Growth goes through shared edges only, so it never jumps across a crack
  // at its shared end nodes.
  auto grow = [&] {
    std::set<int> grown(patch.begin(), patch.end());
    for (int u : patch)
      for (int k = 0; k < 3; ++k)
        for (int q : edge_triangles.at(md::edge_key(mesh.triangles[u].v[k], mesh.triangles[u].v[(k + 1) % 3])))
          if (mesh.triangles[q].region == r) grown.insert(q);
    patch.assign(grown.begin(), grown.end());
  };
  grow();
  grow();
  for (int ring = 0; ring < 2; ++ring) {
    if (patch.size() >= 3) {
      double size = 0.0;
      for (int u : patch) size = std::max(size, (md::centroid(mesh, u) - x0).norm());
      Eigen::MatrixXd a(static_cast<Eigen::Index>(patch.size()), 3);
      for (std::size_t k = 0; k < patch.size(); ++k) {
        const Point c = (md::centroid(mesh, patch[k]) - x0) / size;
        a.row(static_cast<Eigen::Index>(k)) << 1.0, c.x(), c.y();
      }
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      if (sv[2] > 1e-6 * sv[0]) {
        // Row 0 of the pseudo-inverse maps element values to the fitted value at v.
        const Eigen::MatrixXd pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
        std::vector<std::pair<int, double>> out;
        for (std::size_t k = 0; k < patch.size(); ++k)
          out.emplace_back(patch[k], pinv(0, static_cast<Eigen::Index>(k)));
        return out;
      }
    }
    grow();
  }
  double total = 0.0;
  for (int u : patch) total += mesh.signed_area(u);
  std::vector<std::pair<int, double>> out;
  for (int u : patch) out.emplace_back(u, mesh.signed_area(u) / total);
  return out;
}

}  // namespace

Eigen::Vector2d element_h(const FieldSolution& sol, int triangle, int step) {
  if (triangle < 0 || triangle >= sol.mesh->num_triangles()) throw InvalidArgument("triangle out of range");
  return raw_state_h(sol, triangle, step);
}

Eigen::Vector2cd element_h_phasor(const FieldSolution& sol, int triangle) {
  if (sol.mode != Mode::harmonic) throw InvalidArgument("phasor of a transient solution");
  if (triangle < 0 || triangle >= sol.mesh->num_triangles()) throw InvalidArgument("triangle out of range");
  return element_field(sol, triangle, sol.phasor, sol.source.phasor());
}

Eigen::Vector2d point_h_raw(const FieldSolution& sol, const Point& p, int step) {
  const mesh2d::PointLocator loc(*sol.mesh);
  const int t = loc.locate(p);
  if (t < 0) throw InvalidArgument("point outside the mesh");
  return raw_state_h(sol, t, step);
}

FieldProbe::FieldProbe(const FieldSolution& sol, std::vector<Point> points) : sol_(&sol), points_(std::move(points)) {
  const auto& mesh = *sol.mesh;
  const mesh2d::PointLocator loc(mesh);
  const auto incident = md::node_triangles(mesh);
  std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> nodal;
  EdgeTriangles edge_triangles;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int k = 0; k < 3; ++k)
      edge_triangles[md::edge_key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3])].push_back(t);

  std::unordered_map<std::uint64_t, int> side_triangle;
  const bool sheet = sol.ts && !sol.ts->blocks.empty();
  if (sheet)
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (int k = 0; k < 3; ++k)
        side_triangle[md::edge_key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3])] = t;
  const double half = sheet ? 0.5 * sol.ts->basis.sheet().d : 0.0;
  if (sheet)
    for (const auto& b : sol.ts->blocks)
      side_triangles_.push_back({side_triangle.at(md::edge_key(b.plus[0], b.plus[1])),
                                 side_triangle.at(md::edge_key(b.minus[0], b.minus[1]))});

  stencils_.resize(points_.size());
  sheet_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Point& p = points_[i];
    if (sheet) {
      const auto& blocks = sol.ts->blocks;
      const int nb = static_cast<int>(blocks.size());
      for (int s = 0; s < nb; ++s) {
        const auto& b = blocks[s];
        const Point o = mesh.nodes[b.plus[0]];
        const Point nrm(-b.tangent.y(), b.tangent.x());
        const double along = (p - o).dot(b.tangent);
        const double depth = (p - o).dot(nrm);
        const double eps = 1e-12 * b.length;
        if (along < -eps || along > b.length + eps || std::abs(depth) > half * (1.0 + 1e-9)) continue;
        auto& ss = sheet_[i];
        ss.depth = std::clamp(depth, -half, half);
        ss.phis = sol.ts->reduced.phis(sol.ts->basis, ss.depth);
        // Neighbour on the side of the segment midpoint where p lies.
        const double off = along - 0.5 * b.length;
        const int nbr = off < 0.0 ? s - 1 : s + 1;
        if (nbr < 0 || nbr >= nb || off == 0.0) {
          ss.segments = {{s, 1.0}};
        } else {
          const double span = 0.5 * (b.length + blocks[nbr].length);
          const double theta = std::abs(off) / span;
          ss.segments = {{s, 1.0 - theta}, {nbr, theta}};
        }
        break;
      }
      if (!sheet_[i].segments.empty()) continue;
    }
    const int t = loc.locate(p, static_cast<int>(Region::shield));
    if (t < 0)
      throw InvalidArgument("probe point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                            ") is outside the mesh");
    const Eigen::Vector3d lam = loc.barycentric(t, p);
    const Region r = mesh.triangles[t].region;
    std::map<int, double> w;
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.triangles[t].v[k];
      const auto key = std::make_pair(v, static_cast<int>(r));
      auto it = nodal.find(key);
      if (it == nodal.end()) it = nodal.emplace(key, nodal_weights(mesh, incident, edge_triangles, v, r)).first;
      for (const auto& [u, wt] : it->second) w[u] += lam[k] * wt;
    }
    for (const auto& [u, wt] : w) stencils_[i].push_back({u, wt});
  }
}

std::vector<Eigen::Vector2d> FieldProbe::h(int step) const {
  const auto& sol = *sol_;
  const int s = resolve_step(sol, step);
  std::unordered_map<int, Eigen::Vector2d> cache;
  auto elem = [&](int t) -> const Eigen::Vector2d& {
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, element_field(sol, t, sol.states[s], sol.currents[s])).first;
    return it->second;
  };
  std::vector<Eigen::Vector2d> out(points_.size(), Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& ss = sheet_[i];
    if (!ss.segments.empty()) {
      for (const auto& [seg, wt] : ss.segments) {
        const auto& b = sol.ts->blocks[seg];
        const double ht = ss.phis.dot(detail::sheet_state(b, sol.states[s], sol.currents[s]));
        const Point nrm(-b.tangent.y(), b.tangent.x());
        double bn = 0.0;
        for (int t : side_triangles_[seg]) bn += 0.5 * mu0 * nrm.dot(elem(t));
        const double hn = bn / materials::permeability(sol.material, std::abs(ht));
        out[i] += wt * (ht * b.tangent + hn * nrm);
      }
      continue;
    }
    for (const auto& term : stencils_[i]) out[i] += term.weight * elem(term.triangle);
  }
  return out;
}

std::vector<Eigen::Vector2cd> FieldProbe::h_phasor() const {
  const auto& sol = *sol_;
  if (sol.mode != Mode::harmonic) throw InvalidArgument("phasor of a transient solution");
  std::unordered_map<int, Eigen::Vector2cd> cache;
  auto elem = [&](int t) -> const Eigen::Vector2cd& {
    auto it = cache.find(t);
    if (it == cache.end()) it = cache.emplace(t, element_field(sol, t, sol.phasor, sol.source.phasor())).first;
    return it->second;
  };
  std::vector<Eigen::Vector2cd> out(points_.size(), Eigen::Vector2cd::Zero());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& ss = sheet_[i];
    if (!ss.segments.empty()) {
      for (const auto& [seg, wt] : ss.segments) {
        const auto& b = sol.ts->blocks[seg];
        const cplx ht = ss.phis.cast<cplx>().dot(detail::sheet_state(b, sol.phasor, sol.source.phasor()));
        const Eigen::Vector2cd nrm = Point(-b.tangent.y(), b.tangent.x()).cast<cplx>();
        cplx bn = 0.0;
        for (int t : side_triangles_[seg]) bn += 0.5 * mu0 * nrm.dot(elem(t));
        const cplx hn = bn / materials::permeability(sol.material, 0.0);
        out[i] += wt * (ht * b.tangent.cast<cplx>() + hn * nrm);
      }
      continue;
    }
    for (const auto& term : stencils_[i]) out[i] += term.weight * elem(term.triangle);
  }
  return out;
}

namespace {

ProbeSeries sample(const FieldSolution& sol, std::vector<Point> pts, std::vector<double> coord, Component c, int step) {
  const FieldProbe probe(sol, std::move(pts));
  ProbeSeries out;
  out.coord = std::move(coord);
  if (sol.mode == Mode::harmonic) {
    for (const auto& h : probe.h_phasor()) out.value.push_back(pick(h, c));
  } else {
    for (const auto& h : probe.h(step)) out.value.push_back(pick(h, c));
  }
  return out;
}

}  // namespace

ProbeSeries probe_line(const FieldSolution& sol, const Point& a, const Point& b, int samples, Component c, int step) {
  if (samples < 2) throw InvalidArgument("probe_line: at least two samples");
  std::vector<Point> pts;
  std::vector<double> coord;
  const double len = (b - a).norm();
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / (samples - 1);
    const Point p = a + s * (b - a);
    pts.push_back(p);
    if (a.x() == b.x())
      coord.push_back(p.y());
    else if (a.y() == b.y())
      coord.push_back(p.x());
    else
      coord.push_back(s * len);
  }
  return sample(sol, std::move(pts), std::move(coord), c, step);
}

ProbeSeries probe_point(const FieldSolution& sol, const Point& p, Component c) {
  const FieldProbe probe(sol, {p});
  ProbeSeries out;
  if (sol.mode == Mode::harmonic) {
    out.coord = {0.0};
    out.value = {pick(probe.h_phasor()[0], c)};
    return out;
  }
  for (int k = 0; k <= sol.steps(); ++k) {
    out.coord.push_back(sol.grid.time(k));
    out.value.push_back(pick(probe.h(k)[0], c));
  }
  return out;
}

ProbeSeries probe_depth(const FieldSolution& sol, double x, const std::vector<double>& depths, Component c, int step) {
  std::vector<Point> pts;
  for (double y : depths) pts.emplace_back(x, y);
  return sample(sol, std::move(pts), depths, c, step);
}

constexpr double kSideOffset = 1e-9;  // m

double circulation(const FieldSolution& sol, const std::vector<Point>& polygon, int step, int samples_per_side) {
  if (polygon.size() < 3) throw InvalidArgument("circulation: polygon needs three vertices");
  if (samples_per_side < 1) throw InvalidArgument("circulation: samples_per_side must be positive");
  const mesh2d::PointLocator loc(*sol.mesh);
  double total = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % polygon.size()];
    const Point dl = (b - a) / samples_per_side;
    // Samples on an element edge take the mean of both sides.
    const Point off = kSideOffset * Point(-dl.y(), dl.x()).normalized();
    for (int k = 0; k < samples_per_side; ++k) {
      for (double side : {-1.0, 1.0}) {
        const Point p = a + (k + 0.5) * dl + side * off;
        const int t = loc.locate(p);
        if (t < 0) throw InvalidArgument("circulation: polygon leaves the mesh");
        const Eigen::Vector2d h =
            sol.mode == Mode::harmonic ? Eigen::Vector2d(element_h_phasor(sol, t).real()) : raw_state_h(sol, t, step);
        total += 0.5 * h.dot(dl);
      }
    }
  }
  return total;
}

double total_loss(const FieldSolution& sol) {
  if (sol.mode == Mode::harmonic) return sol.loss.empty() ? 0.0 : sol.loss.front();
  double e = 0.0;
  for (std::size_t k = 1; k < sol.loss.size(); ++k) e += sol.grid.dt() * sol.loss[k];
  return e;
}

namespace {

template <typename T>
double rel_diff(const std::vector<T>& ts, const std::vector<T>& ref) {
  if (ts.size() != ref.size()) throw InvalidArgument("relative_difference: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    num += std::norm(ts[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  if (!(den > 0.0)) throw UndefinedMetric("relative_difference: reference norm is zero");
  return 100.0 * std::sqrt(num / den);
}

}  // namespace

double relative_difference(const std::vector<double>& ts, const std::vector<double>& ref) { return rel_diff(ts, ref); }
double relative_difference(const std::vector<cplx>& ts, const std::vector<cplx>& ref) { return rel_diff(ts, ref); }

}  // namespace thinshell::fem2d
