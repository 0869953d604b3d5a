#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <vector>

#include "thinshell/fem2d.hpp"
#include "thinshell/mesh2d.hpp"

namespace thinshell::fem2d::detail {

/// Area and barycentric gradients of a linear triangle.
struct P1Triangle {
  double area = 0.0;
  std::array<Eigen::Vector2d, 3> grad;
};

inline P1Triangle p1_triangle(const mesh2d::Mesh2D& m, int t) {
  const auto& v = m.triangles[t].v;
  const Eigen::Vector2d &a = m.nodes[v[0]], &b = m.nodes[v[1]], &c = m.nodes[v[2]];
  const double det = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  P1Triangle out;
  out.area = 0.5 * det;
  out.grad[0] = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / det;
  out.grad[1] = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / det;
  out.grad[2] = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det;
  return out;
}

/// In-plane curl of a scalar shape function: (d/dy, -d/dx).
inline Eigen::Vector2d curl(const Eigen::Vector2d& g) { return {g.y(), -g.x()}; }

/// Mean over the triangle of the Whitney field with edge values e[k] along v[k] -> v[k+1].
inline Eigen::Vector2d whitney_mean(const P1Triangle& p, const std::array<double, 3>& e) {
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  for (int k = 0; k < 3; ++k) s += e[k] * (p.grad[(k + 1) % 3] - p.grad[k]) / 3.0;
  return s;
}

/// Whitney field at barycentric coordinates l.
inline Eigen::Vector2d whitney_at(const P1Triangle& p, const std::array<double, 3>& e, const Eigen::Vector3d& l) {
  Eigen::Vector2d s = Eigen::Vector2d::Zero();
  for (int k = 0; k < 3; ++k) {
    const int i = k, j = (k + 1) % 3;
    s += e[k] * (l[i] * p.grad[j] - l[j] * p.grad[i]);
  }
  return s;
}

/// Rows and columns flagged in `fixed` become identity rows.
template <typename Scalar>
void pin(Eigen::SparseMatrix<Scalar>& a, const std::vector<char>& fixed) {
  a.prune([&](Eigen::Index r, Eigen::Index c, const Scalar&) { return !fixed[r] && !fixed[c]; });
  Eigen::SparseMatrix<Scalar> id(a.rows(), a.cols());
  std::vector<Eigen::Triplet<Scalar>> t;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    if (fixed[i]) t.emplace_back(i, i, Scalar(1));
  id.setFromTriplets(t.begin(), t.end());
  a += id;
}

/// Unknown indices of a block: [+a, +b, -a, -b, internals...].
inline std::vector<int> block_dofs(const TSCouplingBlock& b) {
  std::vector<int> g{b.plus[0], b.plus[1], b.minus[0], b.minus[1]};
  for (int i = 0; i < b.internal_count; ++i) g.push_back(b.internal_offset + i);
  return g;
}

/// Maps the block unknowns to the reduced sheet coordinates (without the source part).
inline Eigen::MatrixXd block_map(const TSCouplingBlock& b) {
  const int m = b.internal_count + 2;
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, 4 + b.internal_count);
  e(0, 0) = 1.0 / b.length;
  e(0, 1) = -1.0 / b.length;
  e(1, 2) = 1.0 / b.length;
  e(1, 3) = -1.0 / b.length;
  for (int i = 0; i < b.internal_count; ++i) e(2 + i, 4 + i) = 1.0;
  return e;
}

inline Eigen::VectorXd block_source(const TSCouplingBlock& b) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(b.internal_count + 2);
  t[0] = b.tangential_source[0];
  t[1] = b.tangential_source[1];
  return t;
}

template <typename Vec>
Vec gather(const Vec& x, const std::vector<int>& g) {
  Vec out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) out[static_cast<Eigen::Index>(i)] = x[g[i]];
  return out;
}

inline Eigen::VectorXd sheet_state(const TSCouplingBlock& b, const Eigen::VectorXd& x, double current) {
  return block_map(b) * gather(x, block_dofs(b)) + current * block_source(b);
}

inline Eigen::VectorXcd sheet_state(const TSCouplingBlock& b, const Eigen::VectorXcd& x, cplx current) {
  return block_map(b).cast<cplx>() * gather(x, block_dofs(b)) + current * block_source(b).cast<cplx>();
}

/// Reference-model part of recompute_loss.
std::vector<double> reference_loss(const FieldSolution& sol);

}  // namespace thinshell::fem2d::detail
