#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "thinshell/mesh2d.hpp"

namespace thinshell::mesh2d::detail {

/// Twice the signed area of (a, b, c).
inline double orient(const Point& a, const Point& b, const Point& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

inline std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(a < b ? a : b);
  const auto hi = static_cast<std::uint64_t>(a < b ? b : a);
  return (lo << 32) | hi;
}

inline Point centroid(const Mesh2D& m, int t) {
  const auto& v = m.triangles[t].v;
  return (m.nodes[v[0]] + m.nodes[v[1]] + m.nodes[v[2]]) / 3.0;
}

inline std::unordered_set<std::uint64_t> edge_set(const Mesh2D& m) {
  std::unordered_set<std::uint64_t> s;
  s.reserve(m.triangles.size() * 2);
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) s.insert(edge_key(t.v[k], t.v[(k + 1) % 3]));
  return s;
}

inline std::vector<std::vector<int>> node_triangles(const Mesh2D& m) {
  std::vector<std::vector<int>> out(m.nodes.size());
  for (int t = 0; t < m.num_triangles(); ++t)
    for (int v : m.triangles[t].v) out[v].push_back(t);
  return out;
}

inline std::vector<std::vector<int>> node_neighbours(const Mesh2D& m) {
  std::vector<std::vector<int>> out(m.nodes.size());
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t.v[k], b = t.v[(k + 1) % 3];
      out[a].push_back(b);
      out[b].push_back(a);
    }
  for (auto& v : out) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return out;
}

/// Whether c lies on the left of a path passing through p. At an interior
/// node the left sector runs counter-clockwise from the outgoing direction to
/// the incoming one; at an end of the path the adjacent segment's line decides.
inline bool left_of_path(const Point* prev, const Point& p, const Point* next, const Point& c) {
  if (!prev) return orient(p, *next, c) > 0.0;
  if (!next) return orient(*prev, p, c) > 0.0;
  const double two_pi = 2.0 * M_PI;
  auto angle = [&](const Point& q) {
    const double a = std::atan2(q.y() - p.y(), q.x() - p.x());
    return a < 0.0 ? a + two_pi : a;
  };
  const double out_dir = angle(*next);
  auto ccw_from_out = [&](const Point& q) {
    const double a = angle(q) - out_dir;
    return a < 0.0 ? a + two_pi : a;
  };
  return ccw_from_out(c) < ccw_from_out(*prev);
}

}  // namespace thinshell::mesh2d::detail
