#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <iosfwd>
#include <vector>

#include "thinshell/hyperbasis.hpp"
#include "thinshell/materials.hpp"
#include "thinshell/numerics.hpp"

namespace thinshell::slab1d {

using hyperbasis::BasisSet;
using hyperbasis::cplx;
using hyperbasis::SheetSpec;
using materials::MaterialModel;
using numerics::TimeGrid;

struct ElementaryMatrices {
  Eigen::MatrixXd S;  ///< int d theta_p d theta_q dy, 1/m
  Eigen::MatrixXd M;  ///< int theta_p theta_q dy, m
};

/// Composite Gauss-Legendre with panels no wider than the smallest skin depth.
ElementaryMatrices assemble_SM(const BasisSet& basis, int quad_order = 20);

/// Well-conditioned coordinates u = (c1+, c1-, z) for the span of the basis, c = P u.
///
/// The 4n - 2 interior functions are nearly linearly dependent for larger n
/// (Gram conditioning beyond 1e16). They are replaced by an M-orthogonal
/// combination with int phi_i phi_j dy = d delta_ij, dropping directions whose
/// Gram eigenvalue is below `drop_tol` of the largest. The reduced matrices are
/// formed as Gram products of the transformed samples, so they stay
/// positive semidefinite in floating point.
struct ReducedBasis {
  Eigen::MatrixXd P;  ///< 4n x m, columns 0 and 1 select c1+ and c1-
  Eigen::MatrixXd S;  ///< m x m
  Eigen::MatrixXd M;  ///< m x m
  int dropped = 0;    ///< interior directions removed as numerically dependent

  int size() const { return static_cast<int>(P.cols()); }
  /// Reduced shape functions at y (length m).
  Eigen::VectorXd phis(const BasisSet& basis, double y) const { return P.transpose() * basis.thetas(y); }
};

ReducedBasis reduce_basis(const BasisSet& basis, int quad_order = 20, double drop_tol = 1e-12);

/// Spectral system for a linear sheet: basis, matrices, and the physical material.
struct SlabSystem {
  BasisSet basis;
  MaterialModel material;
  Eigen::MatrixXd S;
  Eigen::MatrixXd M;
  ReducedBasis reduced;

  double rho() const { return 1.0 / material.sigma; }
  double mu() const;
};

SlabSystem make_system(const BasisSet& basis, const MaterialModel& material, int quad_order = 20);

/// Phasor traces: h(+-d/2, t) = Re(h_plus/minus exp(j omega t)).
struct HarmonicBC {
  cplx h_plus;
  cplx h_minus;
  double frequency = 0.0;

  static HarmonicBC polar(double mag_plus, double phase_plus, double mag_minus, double phase_minus, double f);
};

/// Face values sampled at t_k = k dt, k = 0..steps.
struct WaveformBC {
  std::vector<double> h_plus;
  std::vector<double> h_minus;

  static WaveformBC sample(const TimeGrid& grid, const std::function<double(double)>& plus,
                           const std::function<double(double)>& minus);
  void check(const TimeGrid& grid) const;
};

/// h(y) = h+ psi+(y) + h- psi-(y).
cplx analytic_harmonic(const SheetSpec& sheet, const HarmonicBC& bc, double y);

struct CoefficientHistory {
  std::vector<Eigen::VectorXd> coefficients;  ///< steps + 1 entries, 4n basis coordinates
  std::vector<Eigen::VectorXd> reduced;       ///< the same states in ReducedBasis coordinates
  std::vector<int> newton_iterations;         ///< per step; empty for linear solves
  std::vector<char> converged;                ///< per step; empty for linear solves

  int max_newton_iterations() const;
};

/// Implicit Euler on (rho S + mu M / dt) c^k = mu M c^{k-1} / dt with c1+-
/// pinned to the face values.
CoefficientHistory solve_transient_spectral(const SlabSystem& system, const WaveformBC& bc, const TimeGrid& grid,
                                            const Eigen::VectorXd& initial = {});

/// Complex coefficients of the harmonic steady state at bc.frequency.
Eigen::VectorXcd solve_harmonic_spectral(const SlabSystem& system, const HarmonicBC& bc);

/// Newton per step with b(h) integrated by `quad_points`-point Gauss-Legendre.
CoefficientHistory solve_transient_nonlinear(const BasisSet& basis, const MaterialModel& material, const WaveformBC& bc,
                                             const TimeGrid& grid, const numerics::NewtonSettings& newton,
                                             int quad_points = 20);

/// rho c^T S c, W/m^2.
double instantaneous_loss(const SlabSystem& system, const Eigen::VectorXd& c);
/// The same quadratic form in reduced coordinates.
double instantaneous_loss_reduced(const SlabSystem& system, const Eigen::VectorXd& u);
/// Sum over steps 1..K of dt times the instantaneous loss, J/m^2.
double energy_loss(const SlabSystem& system, const CoefficientHistory& history, const TimeGrid& grid);

/// h_x at depth y from a coefficient vector.
double field_at(const BasisSet& basis, const Eigen::VectorXd& c, double y);
cplx field_at(const BasisSet& basis, const Eigen::VectorXcd& c, double y);

/// Relation between face fields and face fluxes q = rho dh/dy after
/// eliminating the interior coefficients of a harmonic solve:
/// [q(+d/2), -q(-d/2)] = K [h+, h-].
struct TraceRelation {
  Eigen::Matrix2cd K;
  cplx eta_h;  ///< -(K11 + K12)
  cplx eta_e;  ///< 1 / (K11 - K12)
};
TraceRelation harmonic_trace_relation(const SlabSystem& system, double f);

/// Nodal finite differences on a uniform grid with implicit Euler in time.
struct FdHistory {
  std::vector<double> y;
  std::vector<Eigen::VectorXd> h;  ///< steps + 1 nodal profiles
  std::vector<int> newton_iterations;

  double at(int step, double depth) const;
};

FdHistory reference_slab_fd(const SheetSpec& sheet, const MaterialModel& material, const WaveformBC& bc,
                            const TimeGrid& grid, int cells, const numerics::NewtonSettings& newton = {});

/// Phasor of a sampled periodic signal from its last full period.
cplx last_period_phasor(const std::vector<double>& samples, int steps_per_period, const TimeGrid& grid,
                        double frequency);

/// Harmonic steady state of the FD oracle, returned as phasors at `depths`.
std::vector<cplx> reference_slab_fd_harmonic(const SheetSpec& sheet, const MaterialModel& material,
                                             const HarmonicBC& bc, int cells, int periods, int steps_per_period,
                                             const std::vector<double>& depths);

/// 100 max_k ||TS_k - FD_k|| / max_k ||FD_k|| over the sampled depths.
double transient_profile_difference(const BasisSet& basis, const CoefficientHistory& ts, const FdHistory& fd,
                                    const std::vector<double>& depths);

/// `count` equally spaced depths from -d/2 to d/2.
std::vector<double> probe_depths(double d, int count = 9);

/// Columns t, c1..c4n, loss.
void write_history_csv(std::ostream& out, const SlabSystem& system, const CoefficientHistory& history,
                       const TimeGrid& grid);

}  // namespace thinshell::slab1d
