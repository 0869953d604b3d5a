#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace thinshell::numerics {

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss-Legendre rule on the reference interval [-1, 1].
struct QuadratureRule {
  std::vector<double> points;   ///< increasing abscissae
  std::vector<double> weights;  ///< positive, sum to 2

  std::size_t size() const { return points.size(); }
};

/// Nodes from Newton iteration on P_order with Chebyshev-like initial guesses.
QuadratureRule gauss_legendre(int order);

/// Composite rule on [a, b]: `subintervals` equal panels with `order` points each.
/// Points and weights are already mapped to [a, b].
QuadratureRule composite_gauss_legendre(double a, double b, int order, int subintervals);

// ---------------------------------------------------------------------------
// Sparse systems

/// Coordinate-format accumulator for a square system A x = b.
///
/// Duplicate (row, col) entries are summed by `matrix()`. Several buffers filled
/// independently can be merged with `append`; the result is independent of the
/// order in which contributions arrive.
template <typename Scalar>
class SparseSystem {
 public:
  using Triplet = Eigen::Triplet<Scalar>;
  using Matrix = Eigen::SparseMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit SparseSystem(std::size_t dimension);

  std::size_t dimension() const { return dimension_; }

  void add(std::size_t row, std::size_t col, Scalar value);
  void add_rhs(std::size_t row, Scalar value);
  void append(const SparseSystem& other);
  void reserve(std::size_t entries) { triplets_.reserve(entries); }

  const std::vector<Triplet>& triplets() const { return triplets_; }
  Vector& rhs() { return rhs_; }
  const Vector& rhs() const { return rhs_; }

  /// Compressed matrix with duplicates summed.
  Matrix matrix() const;

 private:
  std::size_t dimension_;
  std::vector<Triplet> triplets_;
  Vector rhs_;
};

using RealSystem = SparseSystem<double>;
using ComplexSystem = SparseSystem<std::complex<double>>;

/// Direct sparse LU factorization that can be reused for many right-hand sides.
template <typename Scalar>
class SparseLU {
 public:
  using Matrix = Eigen::SparseMatrix<Scalar>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SparseLU();
  ~SparseLU();
  SparseLU(SparseLU&&) noexcept;
  SparseLU& operator=(SparseLU&&) noexcept;

  /// Throws FactorizationError carrying the failing pivot.
  void factorize(const Matrix& a);
  Vector solve(const Vector& b) const;
  std::size_t dimension() const { return dimension_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t dimension_ = 0;
};

/// One-shot factor-and-solve of a finalized system.
Eigen::VectorXd solve_sparse(const RealSystem& system);
Eigen::VectorXcd solve_sparse(const ComplexSystem& system);

/// Replace row and column `index` by the identity, moving the known value to the rhs.
/// Keeps symmetric matrices symmetric.
template <typename Scalar>
void apply_dirichlet(Eigen::SparseMatrix<Scalar>& a, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                     const std::vector<std::size_t>& indices, const std::vector<Scalar>& values);

// ---------------------------------------------------------------------------
// Time stepping

struct TimeGrid {
  double t_max = 0.0;
  int steps = 1;

  double dt() const { return t_max / steps; }
  double time(int k) const { return t_max * static_cast<double>(k) / steps; }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Newton-Raphson

struct NewtonSettings {
  int max_iterations = 12;
  double relative_residual_tol = 1e-6;
  /// Halve the step until the residual norm decreases, at most this many times.
  int max_backtracks = 6;

  void validate() const;
};

struct Linearization {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;
  /// Scale used for the relative test. Zero means "use the initial residual norm".
  double reference_norm = 0.0;
  /// Optional solve of jacobian * dx = rhs; the sparse jacobian is factorized when empty.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> solve;
};

struct NewtonResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
};

using LinearizeFn = std::function<Linearization(const Eigen::VectorXd&)>;

/// Damped Newton: full steps when they reduce ||r||, otherwise backtracking.
/// Convergence is ||r|| <= tol * scale, scale being the callback's reference norm
/// or the initial residual norm. The last iterate is returned either way.
NewtonResult newton_solve(const LinearizeFn& linearize, Eigen::VectorXd x0, const NewtonSettings& settings);

}  // namespace thinshell::numerics
