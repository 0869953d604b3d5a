#include <Eigen/SparseLU>
#include <regex>
#include <string>

#include "thinshell/errors.hpp"
#include "thinshell/numerics.hpp"

namespace thinshell::numerics {

template <typename Scalar>
SparseSystem<Scalar>::SparseSystem(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw InvalidArgument("SparseSystem: dimension must be positive");
  rhs_ = Vector::Zero(static_cast<Eigen::Index>(dimension));
}

template <typename Scalar>
void SparseSystem<Scalar>::add(std::size_t row, std::size_t col, Scalar value) {
  if (row >= dimension_ || col >= dimension_) throw InvalidArgument("SparseSystem::add: index out of range");
  triplets_.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
}

template <typename Scalar>
void SparseSystem<Scalar>::add_rhs(std::size_t row, Scalar value) {
  if (row >= dimension_) throw InvalidArgument("SparseSystem::add_rhs: index out of range");
  rhs_[static_cast<Eigen::Index>(row)] += value;
}

template <typename Scalar>
void SparseSystem<Scalar>::append(const SparseSystem& other) {
  if (other.dimension_ != dimension_) throw InvalidArgument("SparseSystem::append: dimension mismatch");
  triplets_.insert(triplets_.end(), other.triplets_.begin(), other.triplets_.end());
  rhs_ += other.rhs_;
}

template <typename Scalar>
typename SparseSystem<Scalar>::Matrix SparseSystem<Scalar>::matrix() const {
  const auto n = static_cast<Eigen::Index>(dimension_);
  Matrix a(n, n);
  a.setFromTriplets(triplets_.begin(), triplets_.end());
  a.makeCompressed();
  return a;
}

template class SparseSystem<double>;
template class SparseSystem<std::complex<double>>;

namespace {

// Eigen reports structural/numerical singularity as text, e.g.
// "THE MATRIX IS STRUCTURALLY SINGULAR ... ZERO COLUMN AT 12".
std::ptrdiff_t parse_pivot(const std::string& message) {
  static const std::regex number(R"((\d+)\s*$)");
  std::smatch m;
  if (std::regex_search(message, m, number)) return std::stoll(m[1].str());
  return -1;
}

}  // namespace

template <typename Scalar>
struct SparseLU<Scalar>::Impl {
  Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>> lu;
};

template <typename Scalar>
SparseLU<Scalar>::SparseLU() : impl_(std::make_unique<Impl>()) {}
template <typename Scalar>
SparseLU<Scalar>::~SparseLU() = default;
template <typename Scalar>
SparseLU<Scalar>::SparseLU(SparseLU&&) noexcept = default;
template <typename Scalar>
SparseLU<Scalar>& SparseLU<Scalar>::operator=(SparseLU&&) noexcept = default;

template <typename Scalar>
void SparseLU<Scalar>::factorize(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InvalidArgument("SparseLU: matrix must be square and nonempty");
  Matrix compressed = a;
  compressed.makeCompressed();
  impl_->lu.analyzePattern(compressed);
  impl_->lu.factorize(compressed);
  if (impl_->lu.info() != Eigen::Success) {
    const std::string message = impl_->lu.lastErrorMessage();
    throw FactorizationError("sparse LU failed: " + message, parse_pivot(message));
  }
  dimension_ = static_cast<std::size_t>(a.rows());
}

template <typename Scalar>
typename SparseLU<Scalar>::Vector SparseLU<Scalar>::solve(const Vector& b) const {
  if (dimension_ == 0) throw InvalidArgument("SparseLU::solve: not factorized");
  if (static_cast<std::size_t>(b.size()) != dimension_) throw InvalidArgument("SparseLU::solve: size mismatch");
  return impl_->lu.solve(b);
}

template class SparseLU<double>;
template class SparseLU<std::complex<double>>;

Eigen::VectorXd solve_sparse(const RealSystem& system) {
  SparseLU<double> lu;
  lu.factorize(system.matrix());
  return lu.solve(system.rhs());
}

Eigen::VectorXcd solve_sparse(const ComplexSystem& system) {
  SparseLU<std::complex<double>> lu;
  lu.factorize(system.matrix());
  return lu.solve(system.rhs());
}

template <typename Scalar>
void apply_dirichlet(Eigen::SparseMatrix<Scalar>& a, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b,
                     const std::vector<std::size_t>& indices, const std::vector<Scalar>& values) {
  if (indices.size() != values.size()) throw InvalidArgument("apply_dirichlet: size mismatch");
  const Eigen::Index n = a.rows();
  std::vector<char> fixed(static_cast<std::size_t>(n), 0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> known = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= static_cast<std::size_t>(n)) throw InvalidArgument("apply_dirichlet: index out of range");
    fixed[indices[i]] = 1;
    known[static_cast<Eigen::Index>(indices[i])] = values[i];
  }
  b -= a * known;
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (typename Eigen::SparseMatrix<Scalar>::InnerIterator it(a, k); it; ++it) {
      if (fixed[it.row()] || fixed[it.col()]) it.valueRef() = (it.row() == it.col()) ? Scalar(1) : Scalar(0);
    }
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(indices[i]);
    if (a.coeff(r, r) != Scalar(1)) a.coeffRef(r, r) = Scalar(1);
    b[r] = values[i];
  }
  a.prune(Scalar(0));
}

template void apply_dirichlet<double>(Eigen::SparseMatrix<double>&, Eigen::VectorXd&, const std::vector<std::size_t>&,
                                      const std::vector<double>&);
template void apply_dirichlet<std::complex<double>>(Eigen::SparseMatrix<std::complex<double>>&, Eigen::VectorXcd&,
                                                    const std::vector<std::size_t>&,
                                                    const std::vector<std::complex<double>>&);

}  // namespace thinshell::numerics
