#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "../mesh2d/mesh_util.hpp"
#include "fem_util.hpp"
#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/fem2d.hpp"

namespace thinshell::fem2d {

namespace md = mesh2d::detail;
using detail::block_dofs;
using detail::block_map;
using detail::block_source;
using detail::gather;
using detail::sheet_state;
using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

int TSModel::nominal_size() const { return num_potential + static_cast<int>(blocks.size()) * (basis.size() - 2); }

int FieldSolution::max_newton_iterations() const {
  return newton_iterations.empty() ? 0 : *std::max_element(newton_iterations.begin(), newton_iterations.end());
}

bool FieldSolution::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](char c) { return c != 0; });
}

namespace {

void scatter(std::vector<Trip>& trips, const std::vector<int>& g, const Eigen::MatrixXd& a) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double v = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v != 0.0) trips.emplace_back(g[i], g[j], v);
    }
}

void scatter(Eigen::VectorXd& r, const std::vector<int>& g, const Eigen::VectorXd& a) {
  for (std::size_t i = 0; i < g.size(); ++i) r[g[i]] += a[static_cast<Eigen::Index>(i)];
}

SpMat build(int n, const std::vector<Trip>& t) {
  SpMat a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Linear operators of the thin-shell system: air magnetic energy, sheet
/// magnetic energy, and sheet Joule term, each with its unit-current source.
struct Operators {
  SpMat k_air, k_sheet, k_rho;
  Eigen::VectorXd s_air, s_sheet, s_rho;
};

Operators assemble(const Mesh2D& mesh, const TSModel& model, double rho, double mu_sheet) {
  const int n = model.size();
  Operators op;
  std::vector<Trip> ta, ts, tr;
  op.s_air = Eigen::VectorXd::Zero(n);
  op.s_sheet = Eigen::VectorXd::Zero(n);
  op.s_rho = Eigen::VectorXd::Zero(n);
  ta.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto p = detail::p1_triangle(mesh, t);
    const auto& v = mesh.triangles[t].v;
    const Eigen::Vector2d src = p.area * detail::whitney_mean(p, model.source_edges[t]);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) ta.emplace_back(v[i], v[j], mu0 * p.area * p.grad[i].dot(p.grad[j]));
      op.s_air[v[i]] -= mu0 * src.dot(p.grad[i]);
    }
  }
  for (const auto& b : model.blocks) {
    const auto g = block_dofs(b);
    const Eigen::MatrixXd e = block_map(b);
    const Eigen::VectorXd tau = block_source(b);
    scatter(ts, g, mu_sheet * e.transpose() * b.M * e);
    scatter(op.s_sheet, g, mu_sheet * e.transpose() * (b.M * tau));
    scatter(tr, g, rho * e.transpose() * b.S * e);
    scatter(op.s_rho, g, rho * e.transpose() * (b.S * tau));
  }
  op.k_air = build(n, ta);
  op.k_sheet = build(n, ts);
  op.k_rho = build(n, tr);
  return op;
}

std::vector<char> pinned_mask(const TSModel& model) {
  std::vector<char> fixed(model.size(), 0);
  fixed[model.pinned] = 1;
  return fixed;
}

double sheet_loss(const TSModel& model, double rho, const Eigen::VectorXd& x, double current) {
  double p = 0.0;
  for (const auto& b : model.blocks) {
    const Eigen::VectorXd u = sheet_state(b, x, current);
    p += rho * u.dot(b.S * u);
  }
  return p;
}

}  // namespace

TSModel build_ts_model(const Mesh2D& mesh, const BasisSet& basis, int quad_order) {
  if (mesh.kind == mesh2d::MeshKind::volume)
    throw TopologyError("thin-shell model needs a mesh without a sheet volume");
  for (const auto& t : mesh.triangles)
    if (t.region == mesh2d::Region::shield) throw TopologyError("thin-shell mesh must not contain shield triangles");
  TSModel model{basis, slab1d::reduce_basis(basis, quad_order), {}, mesh.num_nodes(), 0, 0, build_source_field(mesh)};

  int pinned = std::numeric_limits<int>::max();
  for (const auto& e : mesh2d::boundary_edges(mesh))
    if (e.tag == mesh2d::EdgeTag::outer) pinned = std::min({pinned, e.v[0], e.v[1]});
  if (pinned == std::numeric_limits<int>::max()) throw TopologyError("mesh has no outer boundary");
  model.pinned = pinned;

  if (!mesh.has_crack()) return model;
  const auto plus = mesh.crack_chain(true);
  const auto minus = mesh.crack_chain(false);
  const int m = model.reduced.size();
  // Triangles bordering each crack side, found once.
  std::unordered_map<std::uint64_t, std::vector<std::pair<int, int>>> by_edge;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int k = 0; k < 3; ++k)
      by_edge[md::edge_key(mesh.triangles[t].v[k], mesh.triangles[t].v[(k + 1) % 3])].push_back({t, k});
  const auto side_value = [&](int a, int b) {
    const auto it = by_edge.find(md::edge_key(a, b));
    if (it == by_edge.end() || it->second.size() != 1) throw TopologyError("crack side edge must border one triangle");
    const auto [t, k] = it->second.front();
    return mesh.triangles[t].v[k] == a ? model.source_edges[t][k] : -model.source_edges[t][k];
  };

  for (std::size_t s = 0; s + 1 < plus.size(); ++s) {
    TSCouplingBlock b;
    b.plus = {plus[s], plus[s + 1]};
    b.minus = {minus[s], minus[s + 1]};
    const Point dx = mesh.nodes[plus[s + 1]] - mesh.nodes[plus[s]];
    b.length = dx.norm();
    if (!(b.length > 0.0)) throw TopologyError("degenerate crack segment");
    b.tangent = dx / b.length;
    b.tangential_source = {side_value(b.plus[0], b.plus[1]) / b.length, side_value(b.minus[0], b.minus[1]) / b.length};
    b.internal_offset = model.num_potential + model.num_internal;
    b.internal_count = m - 2;
    b.S = model.reduced.S * b.length;
    b.M = model.reduced.M * b.length;
    model.num_internal += m - 2;
    model.blocks.push_back(std::move(b));
  }
  return model;
}

Eigen::Matrix2cd eliminate_internal(const TSCouplingBlock& block, double rho, double mu, double omega) {
  const int m = block.internal_count + 2;
  const Eigen::MatrixXcd a = (rho * block.S.cast<cplx>() + cplx(0.0, omega * mu) * block.M.cast<cplx>()) / block.length;
  if (m == 2) return a.topLeftCorner(2, 2);
  const Eigen::MatrixXcd aii = a.bottomRightCorner(m - 2, m - 2);
  return a.topLeftCorner(2, 2) - a.topRightCorner(2, m - 2) * aii.partialPivLu().solve(a.bottomLeftCorner(m - 2, 2));
}

std::vector<double> recompute_loss(const FieldSolution& sol) {
  if (sol.model == ModelKind::reference) return detail::reference_loss(sol);
  if (!sol.ts) throw InvalidArgument("recompute_loss: thin-shell solution without a model");
  const double rho = 1.0 / sol.material.sigma;
  if (sol.mode == Mode::harmonic) {
    double p = 0.0;
    for (const auto& b : sol.ts->blocks) {
      const Eigen::VectorXcd u = sheet_state(b, sol.phasor, sol.source.phasor());
      p += 0.5 * rho * (u.adjoint() * b.S * u)(0).real();
    }
    return {p};
  }
  std::vector<double> out{0.0};
  for (int k = 1; k <= sol.steps(); ++k) out.push_back(sheet_loss(*sol.ts, rho, sol.states[k], sol.currents[k]));
  return out;
}

Eigen::VectorXd FieldSolution::segment_coefficients(int segment, int step) const {
  if (!ts) throw InvalidArgument("segment_coefficients: not a thin-shell solution");
  if (segment < 0 || segment >= static_cast<int>(ts->blocks.size()))
    throw InvalidArgument("segment_coefficients: segment out of range");
  if (mode != Mode::transient || step < 0 || step > steps())
    throw InvalidArgument("segment_coefficients: step out of range");
  return ts->reduced.P * sheet_state(ts->blocks[segment], states[step], currents[step]);
}

FieldSolution solve_ts(std::shared_ptr<const Mesh2D> mesh, const BasisSet& basis, const MaterialModel& material,
                       const SourceSpec& source, Mode mode, const TimeGrid& grid, const NewtonSettings& newton) {
  if (!mesh) throw InvalidArgument("solve_ts: null mesh");
  material.validate();
  source.validate();
  if (!(material.sigma > 0.0)) throw InvalidArgument("solve_ts: sheet conductivity must be > 0");
  auto model = std::make_shared<TSModel>(build_ts_model(*mesh, basis));

  FieldSolution sol;
  sol.model = ModelKind::ts;
  sol.mode = mode;
  sol.mesh = mesh;
  sol.ts = model;
  sol.material = material;
  sol.source = source;
  sol.grid = grid;
  sol.dofs = model->size() - 1;
  sol.nominal_dofs = model->nominal_size() - 1;

  const double rho = 1.0 / material.sigma;
  const int n = model->size();
  const auto fixed = pinned_mask(*model);

  if (mode == Mode::harmonic) {
    if (source.waveform != Waveform::sinusoid)
      throw InvalidArgument("solve_ts: harmonic mode needs a sinusoidal source");
    if (material.is_saturable()) throw InvalidArgument("solve_ts: harmonic mode needs a linear sheet");
    const double omega = 2.0 * pi * source.frequency;
    const Operators op = assemble(*mesh, *model, rho, materials::permeability(material, 0.0));
    const cplx jw(0.0, omega);
    Eigen::SparseMatrix<cplx> a = jw * (op.k_air + op.k_sheet).cast<cplx>() + op.k_rho.cast<cplx>();
    Eigen::VectorXcd rhs = -source.phasor() * (jw * (op.s_air + op.s_sheet).cast<cplx>() + op.s_rho.cast<cplx>());
    detail::pin(a, fixed);
    rhs[model->pinned] = 0.0;
    numerics::SparseLU<cplx> lu;
    lu.factorize(a);
    sol.phasor = lu.solve(rhs);
    sol.frequency = source.frequency;
    sol.loss = recompute_loss(sol);
    return sol;
  }

  grid.validate();
  newton.validate();
  const double dt = grid.dt();
  sol.states.reserve(grid.steps + 1);
  sol.states.push_back(Eigen::VectorXd::Zero(n));
  sol.currents.push_back(0.0);  // start from rest
  sol.loss.push_back(0.0);

  if (!material.is_saturable()) {
    const Operators op = assemble(*mesh, *model, rho, materials::permeability(material, 0.0));
    const SpMat k_mu = op.k_air + op.k_sheet;
    const Eigen::VectorXd s_mu = op.s_air + op.s_sheet;
    SpMat a = k_mu + dt * op.k_rho;
    detail::pin(a, fixed);
    numerics::SparseLU<double> lu;
    lu.factorize(a);
    for (int k = 1; k <= grid.steps; ++k) {
      const double ik = source.current(grid.time(k));
      const double ip = sol.currents.back();
      Eigen::VectorXd rhs = k_mu * sol.states.back() - (ik - ip) * s_mu - dt * ik * op.s_rho;
      rhs[model->pinned] = 0.0;
      sol.states.push_back(lu.solve(rhs));
      sol.currents.push_back(ik);
      sol.loss.push_back(sheet_loss(*model, rho, sol.states.back(), ik));
    }
    return sol;
  }

  // Saturable sheet: the sheet magnetic term becomes int (b(h^k) - b(h^{k-1})) phi dy.
  const Operators op = assemble(*mesh, *model, rho, 0.0);
  const double d = basis.sheet().d;
  const auto rule = numerics::composite_gauss_legendre(-0.5 * d, 0.5 * d, 20, 1);
  const auto nq = static_cast<Eigen::Index>(rule.size());
  const int m = model->reduced.size();
  Eigen::MatrixXd phi(m, nq);
  for (Eigen::Index q = 0; q < nq; ++q) phi.col(q) = model->reduced.phis(basis, rule.points[q]);
  auto flux = [&](double h) { return materials::flux_from_field(material, std::abs(h)) * (h < 0 ? -1.0 : 1.0); };

  SpMat lin_part = op.k_air + dt * op.k_rho;
  std::vector<std::vector<int>> dofs;
  std::vector<Eigen::MatrixXd> maps;
  std::vector<Eigen::VectorXd> taus;
  for (const auto& b : model->blocks) {
    dofs.push_back(block_dofs(b));
    maps.push_back(block_map(b));
    taus.push_back(block_source(b));
  }

  for (int k = 1; k <= grid.steps; ++k) {
    const double ik = source.current(grid.time(k));
    const double ip = sol.currents.back();
    const Eigen::VectorXd& xp = sol.states.back();
    std::vector<Eigen::VectorXd> b_old(model->blocks.size());
    for (std::size_t s = 0; s < model->blocks.size(); ++s) {
      const Eigen::VectorXd u = maps[s] * gather(xp, dofs[s]) + ip * taus[s];
      b_old[s].resize(nq);
      for (Eigen::Index q = 0; q < nq; ++q) b_old[s][q] = flux(phi.col(q).dot(u));
    }
    const Eigen::VectorXd fixed_rhs = op.k_air * xp - (ik - ip) * op.s_air - dt * ik * op.s_rho;

    auto linearize = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd r = lin_part * x - fixed_rhs;
      std::vector<Trip> trips;
      for (std::size_t s = 0; s < model->blocks.size(); ++s) {
        const auto& b = model->blocks[s];
        const Eigen::VectorXd u = maps[s] * gather(x, dofs[s]) + ik * taus[s];
        Eigen::VectorXd rs = Eigen::VectorXd::Zero(m);
        Eigen::MatrixXd js = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index q = 0; q < nq; ++q) {
          const double h = phi.col(q).dot(u);
          const double w = rule.weights[q] * b.length;
          rs.noalias() += w * (flux(h) - b_old[s][q]) * phi.col(q);
          js.noalias() +=
              w * materials::differential_scalar(material, std::abs(h)) * phi.col(q) * phi.col(q).transpose();
        }
        scatter(r, dofs[s], maps[s].transpose() * rs);
        scatter(trips, dofs[s], maps[s].transpose() * js * maps[s]);
      }
      numerics::Linearization lin;
      lin.jacobian = lin_part + build(n, trips);
      detail::pin(lin.jacobian, fixed);
      r[model->pinned] = 0.0;
      lin.residual = std::move(r);
      return lin;
    };
    const auto res = numerics::newton_solve(linearize, xp, newton);
    sol.states.push_back(res.x);
    sol.currents.push_back(ik);
    sol.newton_iterations.push_back(res.iterations);
    sol.converged.push_back(res.converged ? 1 : 0);
    sol.loss.push_back(sheet_loss(*model, rho, res.x, ik));
  }
  return sol;
}

}  // namespace thinshell::fem2d
