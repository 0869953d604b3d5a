#include "thinshell/slab1d.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"

namespace thinshell::slab1d {

using hyperbasis::Side;

namespace {

numerics::QuadratureRule thickness_rule(const BasisSet& basis, int quad_order) {
  if (quad_order < 2) throw InvalidArgument("assemble_SM: quad_order must be >= 2");
  const double d = basis.sheet().d;
  double delta_min = basis.skin_depth(0);
  for (int k = 1; k < basis.n(); ++k) delta_min = std::min(delta_min, basis.skin_depth(k));
  const int panels = std::max(1, static_cast<int>(std::ceil(d / delta_min)));
  const int order = std::max(quad_order, static_cast<int>(std::ceil(20.0 / panels)));
  return numerics::composite_gauss_legendre(-0.5 * d, 0.5 * d, order, panels);
}

// Weighted Gram matrix sum_q w_q v_q v_q^T of the columns of `samples`.
Eigen::MatrixXd gram(const Eigen::MatrixXd& samples, const Eigen::VectorXd& w) {
  Eigen::MatrixXd g = samples * w.asDiagonal() * samples.transpose();
  return 0.5 * (g + g.transpose());
}

}  // namespace

ElementaryMatrices assemble_SM(const BasisSet& basis, int quad_order) {
  const auto rule = thickness_rule(basis, quad_order);
  const int N = basis.size();
  const auto nq = static_cast<Eigen::Index>(rule.size());
  Eigen::MatrixXd t(N, nq), dt(N, nq);
  for (Eigen::Index q = 0; q < nq; ++q) {
    t.col(q) = basis.thetas(rule.points[q]);
    dt.col(q) = basis.dthetas(rule.points[q]);
  }
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), nq);
  return ElementaryMatrices{gram(dt, w), gram(t, w)};
}

ReducedBasis reduce_basis(const BasisSet& basis, int quad_order, double drop_tol) {
  const auto rule = thickness_rule(basis, quad_order);
  const int N = basis.size();
  const int ip = basis.trace_index(Side::plus);
  const int im = basis.trace_index(Side::minus);
  const double d = basis.sheet().d;
  const auto nq = static_cast<Eigen::Index>(rule.size());
  Eigen::MatrixXd t(N, nq), dt(N, nq);
  for (Eigen::Index q = 0; q < nq; ++q) {
    t.col(q) = basis.thetas(rule.points[q]);
    dt.col(q) = basis.dthetas(rule.points[q]);
  }
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), nq);

  std::vector<int> interior;
  for (int i = 0; i < N; ++i)
    if (i != ip && i != im) interior.push_back(i);
  const auto ni = static_cast<Eigen::Index>(interior.size());

  ReducedBasis r;
  Eigen::MatrixXd q_int;  // N x kept
  if (ni > 0) {
    Eigen::MatrixXd ti(ni, nq);
    for (Eigen::Index i = 0; i < ni; ++i) ti.row(i) = t.row(interior[i]);
    const Eigen::MatrixXd g = gram(ti, w);
    // Jacobi scaling first so that tiny-but-independent functions survive.
    Eigen::VectorXd scale(ni);
    for (Eigen::Index i = 0; i < ni; ++i) scale[i] = g(i, i) > 0.0 ? 1.0 / std::sqrt(g(i, i)) : 0.0;
    const Eigen::MatrixXd gs = scale.asDiagonal() * g * scale.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gs);
    const double top = es.eigenvalues().maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = ni - 1; k >= 0; --k)
      if (es.eigenvalues()[k] > drop_tol * top) keep.push_back(k);
    q_int = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      const Eigen::VectorXd v =
          scale.asDiagonal() * es.eigenvectors().col(keep[j]) * std::sqrt(d / es.eigenvalues()[keep[j]]);
      for (Eigen::Index i = 0; i < ni; ++i) q_int(interior[i], static_cast<Eigen::Index>(j)) = v[i];
    }
    r.dropped = static_cast<int>(ni - static_cast<Eigen::Index>(keep.size()));
  }
  r.P = Eigen::MatrixXd::Zero(N, 2 + q_int.cols());
  r.P(ip, 0) = 1.0;
  r.P(im, 1) = 1.0;
  if (q_int.cols() > 0) r.P.rightCols(q_int.cols()) = q_int;
  r.S = gram(r.P.transpose() * dt, w);
  r.M = gram(r.P.transpose() * t, w);
  return r;
}

double SlabSystem::mu() const {
  if (material.is_saturable()) throw InvalidArgument("SlabSystem: linear solve requires a linear material");
  return materials::permeability(material, 0.0);
}

SlabSystem make_system(const BasisSet& basis, const MaterialModel& material, int quad_order) {
  material.validate();
  if (!(material.sigma > 0.0)) throw InvalidArgument("slab: sigma must be > 0");
  auto sm = assemble_SM(basis, quad_order);
  return SlabSystem{basis, material, std::move(sm.S), std::move(sm.M), reduce_basis(basis, quad_order)};
}

HarmonicBC HarmonicBC::polar(double mag_plus, double phase_plus, double mag_minus, double phase_minus, double f) {
  return HarmonicBC{std::polar(mag_plus, phase_plus), std::polar(mag_minus, phase_minus), f};
}

WaveformBC WaveformBC::sample(const TimeGrid& grid, const std::function<double(double)>& plus,
                              const std::function<double(double)>& minus) {
  grid.validate();
  WaveformBC bc;
  for (int k = 0; k <= grid.steps; ++k) {
    bc.h_plus.push_back(plus(grid.time(k)));
    bc.h_minus.push_back(minus(grid.time(k)));
  }
  return bc;
}

void WaveformBC::check(const TimeGrid& grid) const {
  grid.validate();
  const auto n = static_cast<std::size_t>(grid.steps) + 1;
  if (h_plus.size() != n || h_minus.size() != n)
    throw InvalidArgument("WaveformBC: sampling does not match the time grid");
}

cplx analytic_harmonic(const SheetSpec& sheet, const HarmonicBC& bc, double y) {
  return bc.h_plus * hyperbasis::psi(sheet, bc.frequency, Side::plus, y) +
         bc.h_minus * hyperbasis::psi(sheet, bc.frequency, Side::minus, y);
}

int CoefficientHistory::max_newton_iterations() const {
  return newton_iterations.empty() ? 0 : *std::max_element(newton_iterations.begin(), newton_iterations.end());
}

namespace {

// Least-squares reduced coordinates of a full coefficient vector.
Eigen::VectorXd to_reduced(const ReducedBasis& r, const Eigen::VectorXd& c) {
  return r.P.colPivHouseholderQr().solve(c);
}

}  // namespace

CoefficientHistory solve_transient_spectral(const SlabSystem& system, const WaveformBC& bc, const TimeGrid& grid,
                                            const Eigen::VectorXd& initial) {
  bc.check(grid);
  const int N = system.basis.size();
  const ReducedBasis& red = system.reduced;
  const int m = red.size();
  if (initial.size() != 0 && initial.size() != N)
    throw InvalidArgument("solve_transient_spectral: bad initial state size");
  const double dt = grid.dt();
  const Eigen::MatrixXd mass = system.mu() / dt * red.M;
  Eigen::MatrixXd a = system.rho() * red.S + mass;
  for (int idx : {0, 1}) {
    a.row(idx).setZero();
    a(idx, idx) = 1.0;
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);

  CoefficientHistory out;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  if (initial.size() == N) {
    u = to_reduced(red, initial);
  } else {
    u[0] = bc.h_plus[0];
    u[1] = bc.h_minus[0];
  }
  out.reduced.push_back(u);
  out.coefficients.push_back(initial.size() == N ? initial : Eigen::VectorXd(red.P * u));
  for (int k = 1; k <= grid.steps; ++k) {
    Eigen::VectorXd rhs = mass * u;
    rhs[0] = bc.h_plus[k];
    rhs[1] = bc.h_minus[k];
    u = lu.solve(rhs);
    out.reduced.push_back(u);
    out.coefficients.push_back(red.P * u);
  }
  return out;
}

Eigen::VectorXcd solve_harmonic_spectral(const SlabSystem& system, const HarmonicBC& bc) {
  const ReducedBasis& red = system.reduced;
  const int m = red.size();
  const double omega = 2.0 * pi * bc.frequency;
  Eigen::MatrixXcd a = system.rho() * red.S.cast<cplx>() + cplx(0.0, omega * system.mu()) * red.M.cast<cplx>();
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(m);
  for (int idx : {0, 1}) {
    a.row(idx).setZero();
    a(idx, idx) = 1.0;
  }
  rhs[0] = bc.h_plus;
  rhs[1] = bc.h_minus;
  const Eigen::VectorXcd u = a.partialPivLu().solve(rhs);
  return red.P.cast<cplx>() * u;
}

TraceRelation harmonic_trace_relation(const SlabSystem& system, double f) {
  const ReducedBasis& red = system.reduced;
  const int m = red.size();
  const double omega = 2.0 * pi * f;
  const Eigen::MatrixXcd a = system.rho() * red.S.cast<cplx>() + cplx(0.0, omega * system.mu()) * red.M.cast<cplx>();
  const Eigen::Matrix2cd att = a.topLeftCorner(2, 2);
  TraceRelation rel;
  if (m > 2) {
    const Eigen::MatrixXcd aii = a.bottomRightCorner(m - 2, m - 2);
    const Eigen::MatrixXcd ait = a.bottomLeftCorner(m - 2, 2);
    const Eigen::MatrixXcd ati = a.topRightCorner(2, m - 2);
    rel.K = att - ati * aii.partialPivLu().solve(ait);
  } else {
    rel.K = att;
  }
  rel.eta_h = -(rel.K(0, 0) + rel.K(0, 1));
  rel.eta_e = 1.0 / (rel.K(0, 0) - rel.K(0, 1));
  return rel;
}

CoefficientHistory solve_transient_nonlinear(const BasisSet& basis, const MaterialModel& material, const WaveformBC& bc,
                                             const TimeGrid& grid, const numerics::NewtonSettings& newton,
                                             int quad_points) {
  bc.check(grid);
  material.validate();
  newton.validate();
  if (!(material.sigma > 0.0)) throw InvalidArgument("slab: sigma must be > 0");
  if (quad_points < 1) throw InvalidArgument("solve_transient_nonlinear: quad_points must be >= 1");

  const ReducedBasis red = reduce_basis(basis);
  const int m = red.size();
  const int nf = m - 2;
  const double d = basis.sheet().d;
  const double dt = grid.dt();
  const double rho = 1.0 / material.sigma;

  const auto rule = numerics::composite_gauss_legendre(-0.5 * d, 0.5 * d, quad_points, 1);
  const auto nq = static_cast<Eigen::Index>(rule.size());
  Eigen::MatrixXd phi(m, nq);
  for (Eigen::Index q = 0; q < nq; ++q) phi.col(q) = red.phis(basis, rule.points[q]);

  auto flux = [&](double h) { return materials::flux_from_field(material, std::abs(h)) * (h < 0 ? -1.0 : 1.0); };

  CoefficientHistory out;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  u[0] = bc.h_plus[0];
  u[1] = bc.h_minus[0];
  out.reduced.push_back(u);
  out.coefficients.push_back(red.P * u);

  for (int k = 1; k <= grid.steps; ++k) {
    Eigen::VectorXd b_old(nq);
    for (Eigen::Index q = 0; q < nq; ++q) b_old[q] = flux(phi.col(q).dot(u));
    u[0] = bc.h_plus[k];
    u[1] = bc.h_minus[k];

    // Residual over the interior rows: dt rho S u + int (b(h) - b_old) phi dy.
    auto linearize = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd uu = u;
      uu.tail(nf) = z;
      Eigen::VectorXd r = dt * rho * (red.S.bottomRows(nf) * uu);
      Eigen::MatrixXd jac = dt * rho * red.S.bottomRightCorner(nf, nf);
      for (Eigen::Index q = 0; q < nq; ++q) {
        const double h = phi.col(q).dot(uu);
        const double w = rule.weights[q];
        const auto pz = phi.col(q).tail(nf);
        r.noalias() += w * (flux(h) - b_old[q]) * pz;
        jac.noalias() += w * materials::differential_scalar(material, std::abs(h)) * pz * pz.transpose();
      }
      numerics::Linearization lin;
      lin.residual = std::move(r);
      lin.jacobian = jac.sparseView();
      return lin;
    };

    if (nf > 0) {
      const auto res = numerics::newton_solve(linearize, u.tail(nf), newton);
      u.tail(nf) = res.x;
      out.newton_iterations.push_back(res.iterations);
      out.converged.push_back(res.converged ? 1 : 0);
    } else {
      out.newton_iterations.push_back(0);
      out.converged.push_back(1);
    }
    out.reduced.push_back(u);
    out.coefficients.push_back(red.P * u);
  }
  return out;
}

double instantaneous_loss(const SlabSystem& system, const Eigen::VectorXd& c) {
  return system.rho() * c.dot(system.S * c);
}

double instantaneous_loss_reduced(const SlabSystem& system, const Eigen::VectorXd& u) {
  return system.rho() * u.dot(system.reduced.S * u);
}

double energy_loss(const SlabSystem& system, const CoefficientHistory& history, const TimeGrid& grid) {
  double e = 0.0;
  const bool reduced = history.reduced.size() == history.coefficients.size();
  for (std::size_t k = 1; k < history.coefficients.size(); ++k)
    e += grid.dt() * (reduced ? instantaneous_loss_reduced(system, history.reduced[k])
                              : instantaneous_loss(system, history.coefficients[k]));
  return e;
}

double field_at(const BasisSet& basis, const Eigen::VectorXd& c, double y) { return basis.thetas(y).dot(c); }

cplx field_at(const BasisSet& basis, const Eigen::VectorXcd& c, double y) {
  return basis.thetas(y).cast<cplx>().dot(c);
}

namespace {

struct FdGrid {
  int cells;
  double dy;
  std::vector<double> y;
};

FdGrid make_grid(double d, int cells) {
  if (cells < 16) throw InvalidArgument("reference_slab_fd: cells must be >= 16");
  FdGrid g{cells, d / cells, {}};
  for (int i = 0; i <= cells; ++i) g.y.push_back(-0.5 * d + i * g.dy);
  return g;
}

// Implicit Euler step of mu dh/dt = rho d2h/dy2 with Dirichlet ends (Thomas algorithm).
class LinearFdStepper {
 public:
  LinearFdStepper(const FdGrid& g, double r) : n_(g.cells + 1), r_(r), cp_(n_), dp_(n_) {}

  void step(Eigen::VectorXd& h, double left, double right) {
    // Unknowns 1..n-2; Dirichlet values at 0 and n-1.
    const int n = n_;
    const double a = -r_, b = 1.0 + 2.0 * r_, c = -r_;
    for (int i = 1; i <= n - 2; ++i) {
      double rhs = h[i];
      if (i == 1) rhs += r_ * left;
      if (i == n - 2) rhs += r_ * right;
      const double m = i == 1 ? b : b - a * cp_[i - 1];
      cp_[i] = c / m;
      dp_[i] = i == 1 ? rhs / m : (rhs - a * dp_[i - 1]) / m;
    }
    h[0] = left;
    h[n - 1] = right;
    h[n - 2] = dp_[n - 2];
    for (int i = n - 3; i >= 1; --i) h[i] = dp_[i] - cp_[i] * h[i + 1];
  }

 private:
  int n_;
  double r_;
  std::vector<double> cp_, dp_;
};

}  // namespace

double FdHistory::at(int step, double depth) const {
  const Eigen::VectorXd& p = h.at(static_cast<std::size_t>(step));
  const double y0 = y.front();
  const double dy = y[1] - y[0];
  double s = (depth - y0) / dy;
  const int cells = static_cast<int>(y.size()) - 1;
  if (s < -1e-9 || s > cells + 1e-9) throw InvalidArgument("FdHistory::at: depth outside the sheet");
  s = std::clamp(s, 0.0, static_cast<double>(cells));
  int i = std::min(static_cast<int>(std::floor(s)), cells - 1);
  const double t = s - i;
  return (1.0 - t) * p[i] + t * p[i + 1];
}

FdHistory reference_slab_fd(const SheetSpec& sheet, const MaterialModel& material, const WaveformBC& bc,
                            const TimeGrid& grid, int cells, const numerics::NewtonSettings& newton) {
  sheet.validate();
  bc.check(grid);
  material.validate();
  const FdGrid g = make_grid(sheet.d, cells);
  const double rho = 1.0 / material.sigma;
  const double dt = grid.dt();
  const int n = cells + 1;

  FdHistory out;
  out.y = g.y;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  h[0] = bc.h_minus[0];
  h[n - 1] = bc.h_plus[0];
  out.h.push_back(h);

  if (!material.is_saturable()) {
    LinearFdStepper stepper(g, rho * dt / (materials::permeability(material, 0.0) * g.dy * g.dy));
    for (int k = 1; k <= grid.steps; ++k) {
      stepper.step(h, bc.h_minus[k], bc.h_plus[k]);
      out.h.push_back(h);
    }
    return out;
  }

  const double r = rho * dt / (g.dy * g.dy);
  auto flux = [&](double v) { return materials::flux_from_field(material, std::abs(v)) * (v < 0 ? -1.0 : 1.0); };
  const int m = n - 2;
  for (int k = 1; k <= grid.steps; ++k) {
    Eigen::VectorXd b_old(m);
    for (int i = 0; i < m; ++i) b_old[i] = flux(h[i + 1]);
    const double left = bc.h_minus[k], right = bc.h_plus[k];
    auto linearize = [&](const Eigen::VectorXd& x) {
      numerics::Linearization lin;
      lin.residual.resize(m);
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(3 * static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) {
        const double hl = i == 0 ? left : x[i - 1];
        const double hr = i == m - 1 ? right : x[i + 1];
        lin.residual[i] = flux(x[i]) - b_old[i] - r * (hl - 2.0 * x[i] + hr);
        trip.emplace_back(i, i, materials::differential_scalar(material, std::abs(x[i])) + 2.0 * r);
        if (i > 0) trip.emplace_back(i, i - 1, -r);
        if (i < m - 1) trip.emplace_back(i, i + 1, -r);
      }
      lin.jacobian.resize(m, m);
      lin.jacobian.setFromTriplets(trip.begin(), trip.end());
      return lin;
    };
    const auto res = numerics::newton_solve(linearize, h.segment(1, m), newton);
    h[0] = left;
    h[n - 1] = right;
    h.segment(1, m) = res.x;
    out.h.push_back(h);
    out.newton_iterations.push_back(res.iterations);
  }
  return out;
}

cplx last_period_phasor(const std::vector<double>& samples, int steps_per_period, const TimeGrid& grid,
                        double frequency) {
  const int last = static_cast<int>(samples.size()) - 1;
  if (steps_per_period < 2 || last < steps_per_period) throw InvalidArgument("last_period_phasor: not enough samples");
  const double omega = 2.0 * pi * frequency;
  cplx acc = 0.0;
  for (int k = last - steps_per_period + 1; k <= last; ++k)
    acc += samples[k] * std::exp(cplx(0.0, -omega * grid.time(k)));
  return 2.0 * acc / static_cast<double>(steps_per_period);
}

std::vector<cplx> reference_slab_fd_harmonic(const SheetSpec& sheet, const MaterialModel& material,
                                             const HarmonicBC& bc, int cells, int periods, int steps_per_period,
                                             const std::vector<double>& depths) {
  if (material.is_saturable()) throw InvalidArgument("reference_slab_fd_harmonic: linear material required");
  if (periods < 2 || steps_per_period < 8) throw InvalidArgument("reference_slab_fd_harmonic: too few samples");
  const FdGrid g = make_grid(sheet.d, cells);
  const double period = 1.0 / bc.frequency;
  const TimeGrid grid{periods * period, periods * steps_per_period};
  const double omega = 2.0 * pi * bc.frequency;
  const double rho = 1.0 / material.sigma;
  LinearFdStepper stepper(g, rho * grid.dt() / (materials::permeability(material, 0.0) * g.dy * g.dy));

  FdHistory probe;
  probe.y = g.y;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(cells + 1);
  std::vector<cplx> acc(depths.size(), 0.0);
  const int first = grid.steps - steps_per_period + 1;
  for (int k = 1; k <= grid.steps; ++k) {
    const double t = grid.time(k);
    const cplx rot = std::exp(cplx(0.0, omega * t));
    stepper.step(h, (bc.h_minus * rot).real(), (bc.h_plus * rot).real());
    if (k >= first) {
      probe.h.assign(1, h);
      const cplx w = std::conj(rot);
      for (std::size_t i = 0; i < depths.size(); ++i) acc[i] += probe.at(0, depths[i]) * w;
    }
  }
  for (auto& a : acc) a *= 2.0 / steps_per_period;
  return acc;
}

double transient_profile_difference(const BasisSet& basis, const CoefficientHistory& ts, const FdHistory& fd,
                                    const std::vector<double>& depths) {
  if (ts.coefficients.size() != fd.h.size())
    throw InvalidArgument("transient_profile_difference: history lengths differ");
  double num = 0.0, den = 0.0;
  const auto nd = static_cast<Eigen::Index>(depths.size());
  for (std::size_t k = 0; k < fd.h.size(); ++k) {
    Eigen::VectorXd a(nd), b(nd);
    for (Eigen::Index i = 0; i < nd; ++i) {
      a[i] = field_at(basis, ts.coefficients[k], depths[i]);
      b[i] = fd.at(static_cast<int>(k), depths[i]);
    }
    num = std::max(num, (a - b).norm());
    den = std::max(den, b.norm());
  }
  if (den == 0.0) throw UndefinedMetric("transient_profile_difference: reference is identically zero");
  return 100.0 * num / den;
}

std::vector<double> probe_depths(double d, int count) {
  if (count < 2) throw InvalidArgument("probe_depths: need at least 2 depths");
  std::vector<double> y;
  for (int i = 0; i < count; ++i) y.push_back(-0.5 * d + d * i / (count - 1));
  y.back() = 0.5 * d;
  return y;
}

void write_history_csv(std::ostream& out, const SlabSystem& system, const CoefficientHistory& history,
                       const TimeGrid& grid) {
  const auto old_prec = out.precision(17);
  out << "t";
  for (int p = 1; p <= system.basis.size(); ++p) out << ",c" << p;
  out << ",loss\n";
  for (std::size_t k = 0; k < history.coefficients.size(); ++k) {
    out << grid.time(static_cast<int>(k));
    for (Eigen::Index p = 0; p < history.coefficients[k].size(); ++p) out << ',' << history.coefficients[k][p];
    out << ',' << instantaneous_loss(system, history.coefficients[k]) << '\n';
  }
  out.precision(old_prec);
}

}  // namespace thinshell::slab1d
