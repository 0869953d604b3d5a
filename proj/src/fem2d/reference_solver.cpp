#include <cmath>

#include "fem_util.hpp"
#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/fem2d.hpp"

namespace thinshell::fem2d {

using mesh2d::Region;
using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

namespace {

// Vector potential a_z on the nodes plus, when a shield is present, the time
// integral w of its electric field offset, which keeps the net shield current
// at zero: J = -sigma d(a - w)/dt with int J dA = 0. The offset couples to
// every shield node, so it is kept out of the sparse factorization and
// eliminated by a Schur complement.
struct ReferenceSystem {
  int nodes = 0;
  int size = 0;
  bool has_shield = false;
  std::vector<char> fixed;
  SpMat k_lin;          // reluctivity term of the linear regions
  SpMat m_sigma;        // conductivity mass on the nodes
  Eigen::VectorXd g;    // sigma int N dA over the shield
  double s_area = 0.0;  // sigma times the shield area
  Eigen::VectorXd f;    // unit-current density load
  std::vector<int> shield_triangles;

  // sigma int (da - dw)^2 dA for an increment of the full state.
  double mass_form(const Eigen::VectorXd& dx) const {
    const Eigen::VectorXd da = dx.head(nodes);
    double e = da.dot(m_sigma * da);
    if (has_shield) {
      const double dw = dx[nodes];
      e += -2.0 * dw * g.dot(da) + s_area * dw * dw;
    }
    return e;
  }
  cplx mass_form_phasor(const Eigen::VectorXcd& x) const {
    const Eigen::VectorXcd a = x.head(nodes);
    cplx e = a.dot(m_sigma.cast<cplx>() * a);
    if (has_shield) {
      const cplx w = x[nodes];
      e += -2.0 * std::real(std::conj(w) * g.cast<cplx>().dot(a)) + s_area * std::norm(w);
    }
    return e;
  }
};

// Solves [A, -c; -c^T, s] [a; w] = [r_a; r_w] with one sparse factorization of A.
template <typename Scalar>
class BorderedSolver {
 public:
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  void factorize(const Eigen::SparseMatrix<Scalar>& a, const Vec& c, Scalar s, bool bordered) {
    bordered_ = bordered;
    lu_.factorize(a);
    if (!bordered_) return;
    c_ = c;
    y_ = lu_.solve(c);
    denom_ = s - (c_.transpose() * y_)(0);
  }
  Vec solve(const Vec& r) const {
    const Eigen::Index n = static_cast<Eigen::Index>(lu_.dimension());
    if (!bordered_) return lu_.solve(r);
    const Vec z = lu_.solve(r.head(n));
    const Scalar w = (r[n] + (c_.transpose() * z)(0)) / denom_;
    Vec x(n + 1);
    x.head(n) = z + w * y_;
    x[n] = w;
    return x;
  }

 private:
  numerics::SparseLU<Scalar> lu_;
  Vec c_, y_;
  Scalar denom_{};
  bool bordered_ = false;
};

ReferenceSystem assemble(const Mesh2D& mesh, const MaterialModel& material) {
  ReferenceSystem sys;
  sys.nodes = mesh.num_nodes();
  const int n = sys.nodes;
  double a_plus = 0.0, a_minus = 0.0, a_shield = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double a = mesh.signed_area(t);
    if (!(a > 0.0)) throw TopologyError("reference mesh has a non-positive triangle");
    switch (mesh.triangles[t].region) {
      case Region::wire_plus:
        a_plus += a;
        break;
      case Region::wire_minus:
        a_minus += a;
        break;
      case Region::shield:
        a_shield += a;
        sys.shield_triangles.push_back(t);
        break;
      default:
        break;
    }
  }
  if (!(a_plus > 0.0) || !(a_minus > 0.0)) throw TopologyError("reference mesh needs both wires");
  sys.has_shield = a_shield > 0.0;
  sys.size = n + (sys.has_shield ? 1 : 0);
  const bool nonlinear = material.is_saturable();
  const double nu_shield = nonlinear ? 0.0 : 1.0 / materials::permeability(material, 0.0);

  std::vector<Trip> tk, tm;
  sys.f = Eigen::VectorXd::Zero(n);
  sys.g = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto p = detail::p1_triangle(mesh, t);
    const auto& v = mesh.triangles[t].v;
    const Region r = mesh.triangles[t].region;
    const double nu = r == Region::shield ? nu_shield : 1.0 / mu0;
    if (nu != 0.0)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) tk.emplace_back(v[i], v[j], nu * p.area * p.grad[i].dot(p.grad[j]));
    if (r == Region::wire_plus || r == Region::wire_minus) {
      const double j = r == Region::wire_plus ? 1.0 / a_plus : -1.0 / a_minus;
      for (int i = 0; i < 3; ++i) sys.f[v[i]] += j * p.area / 3.0;
    }
    if (r == Region::shield) {
      const double s = material.sigma;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) tm.emplace_back(v[i], v[j], s * p.area * (i == j ? 2.0 : 1.0) / 12.0);
        sys.g[v[i]] += s * p.area / 3.0;
      }
      sys.s_area += s * p.area;
    }
  }
  sys.k_lin.resize(n, n);
  sys.k_lin.setFromTriplets(tk.begin(), tk.end());
  sys.m_sigma.resize(n, n);
  sys.m_sigma.setFromTriplets(tm.begin(), tm.end());

  sys.fixed.assign(n, 0);
  for (const auto& e : mesh2d::boundary_edges(mesh))
    if (e.tag == mesh2d::EdgeTag::outer) sys.fixed[e.v[0]] = sys.fixed[e.v[1]] = 1;
  for (int i = 0; i < n; ++i)
    if (sys.fixed[i]) sys.g[i] = 0.0;
  return sys;
}

// Shield reluctivity contributions of a saturable material at state a.
void nonlinear_shield(const Mesh2D& mesh, const MaterialModel& material, const ReferenceSystem& sys,
                      const Eigen::VectorXd& x, Eigen::VectorXd& r, std::vector<Trip>& trips) {
  const auto a = x.head(sys.nodes);
  for (int t : sys.shield_triangles) {
    const auto p = detail::p1_triangle(mesh, t);
    const auto& v = mesh.triangles[t].v;
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    std::array<Eigen::Vector2d, 3> c;
    for (int i = 0; i < 3; ++i) {
      c[i] = detail::curl(p.grad[i]);
      b += a[v[i]] * c[i];
    }
    const double bn = b.norm();
    const Eigen::Vector2d h =
        bn > 0.0 ? Eigen::Vector2d((materials::field_from_flux(material, bn) / bn) * b) : Eigen::Vector2d::Zero();
    const Eigen::Matrix2d nu_d = materials::differential_reluctivity(material, b);
    for (int i = 0; i < 3; ++i) {
      r[v[i]] += p.area * c[i].dot(h);
      for (int j = 0; j < 3; ++j) trips.emplace_back(v[i], v[j], p.area * c[i].dot(nu_d * c[j]));
    }
  }
}

template <typename Vec>
void zero_fixed(Vec& r, const std::vector<char>& fixed) {
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (fixed[i]) r[static_cast<Eigen::Index>(i)] = 0.0;
}

}  // namespace

FieldSolution solve_reference(std::shared_ptr<const Mesh2D> mesh, const MaterialModel& material,
                              const SourceSpec& source, Mode mode, const TimeGrid& grid, const NewtonSettings& newton) {
  if (!mesh) throw InvalidArgument("solve_reference: null mesh");
  if (mesh->kind == mesh2d::MeshKind::ts) throw TopologyError("reference model needs a mesh without a crack");
  material.validate();
  source.validate();
  const ReferenceSystem sys = assemble(*mesh, material);
  if (sys.has_shield && !(material.sigma > 0.0))
    throw InvalidArgument("solve_reference: shield conductivity must be > 0");
  const int n = sys.nodes;

  FieldSolution sol;
  sol.model = ModelKind::reference;
  sol.mode = mode;
  sol.mesh = mesh;
  sol.material = material;
  sol.source = source;
  sol.grid = grid;
  int free = sys.size - n;
  for (char c : sys.fixed) free += c ? 0 : 1;
  sol.dofs = free;
  sol.nominal_dofs = free;

  if (mode == Mode::harmonic) {
    if (source.waveform != Waveform::sinusoid)
      throw InvalidArgument("solve_reference: harmonic mode needs a sinusoidal source");
    if (material.is_saturable()) throw InvalidArgument("solve_reference: harmonic mode needs a linear shield");
    const double omega = 2.0 * pi * source.frequency;
    const cplx jw(0.0, omega);
    Eigen::SparseMatrix<cplx> a = sys.k_lin.cast<cplx>() + jw * sys.m_sigma.cast<cplx>();
    detail::pin(a, sys.fixed);
    BorderedSolver<cplx> solver;
    solver.factorize(a, jw * sys.g.cast<cplx>(), jw * sys.s_area, sys.has_shield);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(sys.size);
    rhs.head(n) = source.phasor() * sys.f.cast<cplx>();
    zero_fixed(rhs, sys.fixed);
    sol.phasor = solver.solve(rhs);
    sol.frequency = source.frequency;
    sol.loss = {0.5 * omega * omega * sys.mass_form_phasor(sol.phasor).real()};
    return sol;
  }

  grid.validate();
  newton.validate();
  const double dt = grid.dt();
  sol.states.push_back(Eigen::VectorXd::Zero(sys.size));
  sol.currents.push_back(0.0);  // start from rest
  sol.loss.push_back(0.0);
  const SpMat m_dt = sys.m_sigma / dt;
  const Eigen::VectorXd c = sys.g / dt;
  const double s = sys.s_area / dt;
  // Right-hand side of one implicit Euler step from the previous state xp.
  auto step_rhs = [&](const Eigen::VectorXd& xp, double ik) {
    Eigen::VectorXd r(sys.size);
    r.head(n) = ik * sys.f + m_dt * xp.head(n);
    if (sys.has_shield) {
      r.head(n) -= c * xp[n];
      r[n] = -c.dot(xp.head(n)) + s * xp[n];
    }
    zero_fixed(r, sys.fixed);
    return r;
  };
  // The step operator applied to x, with the shield trimmed to its linear part.
  auto apply_linear = [&](const SpMat& a, const Eigen::VectorXd& x) {
    Eigen::VectorXd r(sys.size);
    r.head(n) = a * x.head(n);
    if (sys.has_shield) {
      r.head(n) -= c * x[n];
      r[n] = -c.dot(x.head(n)) + s * x[n];
    }
    return r;
  };

  if (!material.is_saturable()) {
    SpMat a = sys.k_lin + m_dt;
    detail::pin(a, sys.fixed);
    BorderedSolver<double> solver;
    solver.factorize(a, c, s, sys.has_shield);
    for (int k = 1; k <= grid.steps; ++k) {
      const double ik = source.current(grid.time(k));
      Eigen::VectorXd x = solver.solve(step_rhs(sol.states.back(), ik));
      sol.loss.push_back(sys.mass_form(Eigen::VectorXd(x - sol.states.back())) / (dt * dt));
      sol.states.push_back(std::move(x));
      sol.currents.push_back(ik);
    }
    return sol;
  }

  const SpMat lin_part = sys.k_lin + m_dt;
  for (int k = 1; k <= grid.steps; ++k) {
    const double ik = source.current(grid.time(k));
    const Eigen::VectorXd& xp = sol.states.back();
    const Eigen::VectorXd load = step_rhs(xp, ik);
    auto linearize = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd r = apply_linear(lin_part, x) - load;
      std::vector<Trip> trips;
      Eigen::VectorXd rn = Eigen::VectorXd::Zero(n);
      nonlinear_shield(*mesh, material, sys, x, rn, trips);
      r.head(n) += rn;
      SpMat jn(n, n);
      jn.setFromTriplets(trips.begin(), trips.end());
      auto jac = std::make_shared<SpMat>(lin_part + jn);
      detail::pin(*jac, sys.fixed);
      zero_fixed(r, sys.fixed);
      numerics::Linearization lin;
      lin.residual = std::move(r);
      lin.solve = [jac, &sys, &c, s](const Eigen::VectorXd& rhs) {
        BorderedSolver<double> solver;
        solver.factorize(*jac, c, s, sys.has_shield);
        return solver.solve(rhs);
      };
      return lin;
    };
    const auto res = numerics::newton_solve(linearize, xp, newton);
    sol.loss.push_back(sys.mass_form(Eigen::VectorXd(res.x - xp)) / (dt * dt));
    sol.states.push_back(res.x);
    sol.currents.push_back(ik);
    sol.newton_iterations.push_back(res.iterations);
    sol.converged.push_back(res.converged ? 1 : 0);
  }
  return sol;
}

std::vector<double> detail::reference_loss(const FieldSolution& sol) {
  if (!sol.mesh) throw InvalidArgument("recompute_loss: solution without a mesh");
  const ReferenceSystem sys = assemble(*sol.mesh, sol.material);
  if (sol.mode == Mode::harmonic) {
    const double omega = 2.0 * pi * sol.frequency;
    return {0.5 * omega * omega * sys.mass_form_phasor(sol.phasor).real()};
  }
  const double dt = sol.grid.dt();
  std::vector<double> out{0.0};
  for (int k = 1; k <= sol.steps(); ++k)
    out.push_back(sys.mass_form(Eigen::VectorXd(sol.states[k] - sol.states[k - 1])) / (dt * dt));
  return out;
}

}  // namespace thinshell::fem2d
