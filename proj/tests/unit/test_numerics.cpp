#include <doctest.h>

#include <cmath>
#include <random>

#include "thinshell/errors.hpp"
#include "thinshell/numerics.hpp"

using namespace thinshell;
using namespace thinshell::numerics;

namespace {

// Adaptive composite Simpson, independent of any Gauss machinery.
template <typename F>
double simpson_adaptive(F f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double simpson(F f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson_adaptive(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50);
}

// Textbook Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

TEST_CASE("gauss_legendre low orders match closed forms") {
  auto r1 = gauss_legendre(1);
  REQUIRE(r1.size() == 1);
  CHECK(r1.points[0] == doctest::Approx(0.0));
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-15));
  auto r2 = gauss_legendre(2);
  CHECK(r2.points[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.points[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(gauss_legendre(0), InvalidArgument);
}

TEST_CASE("gauss_legendre order 20 integrates cos against Simpson") {
  const auto r = gauss_legendre(20);
  double g = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) g += r.weights[i] * std::cos(r.points[i]);
  const double s = simpson([](double y) { return std::cos(y); }, -1.0, 1.0, 1e-15);
  CHECK(std::abs(g - s) < 1e-14);
  CHECK(std::abs(g - 2.0 * std::sin(1.0)) < 1e-14);
}

TEST_CASE("gauss_legendre structure and exactness for orders 1..24") {
  for (int m = 1; m <= 24; ++m) {
    const auto r = gauss_legendre(m);
    double wsum = 0.0;
    for (double w : r.weights) {
      CHECK(w > 0.0);
      wsum += w;
    }
    CHECK(std::abs(wsum - 2.0) < 1e-13);
    for (int i = 0; i < m; ++i) {
      if (i > 0) CHECK(r.points[i] > r.points[i - 1]);
      CHECK(std::abs(r.points[i] + r.points[m - 1 - i]) < 1e-13);
    }
    for (int k = 0; k <= 2 * m - 1; ++k) {
      double v = 0.0;
      for (int i = 0; i < m; ++i) v += r.weights[i] * std::pow(r.points[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      CHECK(std::abs(v - exact) <= 1e-12 * std::max(1.0, exact));
    }
  }
}

TEST_CASE("composite rule maps panels onto the interval") {
  const auto r = composite_gauss_legendre(0.0, 3.0, 4, 3);
  CHECK(r.size() == 12);
  double s = 0.0, x3 = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    s += r.weights[i];
    x3 += r.weights[i] * r.points[i] * r.points[i] * r.points[i];
  }
  CHECK(s == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(x3 == doctest::Approx(81.0 / 4.0).epsilon(1e-13));
}

TEST_CASE("solve_sparse trivial systems") {
  RealSystem id(4);
  for (int i = 0; i < 4; ++i) {
    id.add(i, i, 1.0);
    id.add_rhs(i, i + 0.5);
  }
  auto x = solve_sparse(id);
  for (int i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(i + 0.5));

  RealSystem two(2);
  two.add(0, 0, 2.0);
  two.add(0, 1, 1.0);
  two.add(1, 0, 1.0);
  two.add(1, 1, 1.5);
  two.add(1, 1, 0.5);  // duplicates sum
  two.add_rhs(0, 3.0);
  two.add_rhs(1, 3.0);
  x = solve_sparse(two);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(two.add(2, 0, 1.0), InvalidArgument);
}

TEST_CASE("solve_sparse random SPD matches dense elimination") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 50;
  std::vector<std::vector<double>> g(n, std::vector<double>(n));
  for (auto& row : g)
    for (double& v : row) v = u(rng);
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) a[i][j] += g[i][k] * g[j][k];
      if (i == j) a[i][j] += n;
    }
  std::vector<double> b(n);
  for (double& v : b) v = u(rng);

  RealSystem sys(n);
  // Split each entry in two halves, added in scrambled order.
  for (int pass = 0; pass < 2; ++pass)
    for (int i = n - 1; i >= 0; --i)
      for (int j = 0; j < n; ++j) sys.add(i, j, 0.5 * a[i][j]);
  for (int i = 0; i < n; ++i) sys.add_rhs(i, b[i]);
  const auto x = solve_sparse(sys);
  const auto xo = dense_solve(a, b);
  for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - xo[i]) <= 1e-10 * (1.0 + std::abs(xo[i])));
  const Eigen::VectorXd r = sys.matrix() * x - sys.rhs();
  CHECK(r.norm() / sys.rhs().norm() <= 1e-10);
}

TEST_CASE("solve_sparse complex system") {
  using c = std::complex<double>;
  ComplexSystem sys(2);
  sys.add(0, 0, c(1, 1));
  sys.add(1, 1, c(0, 2));
  sys.add(0, 1, c(0.5, 0));
  sys.add_rhs(0, c(1, 0));
  sys.add_rhs(1, c(0, 4));
  const auto x = solve_sparse(sys);
  CHECK(std::abs(x[1] - c(2, 0)) < 1e-14);
  CHECK(std::abs(x[0] - (c(1, 0) - 0.5 * x[1]) / c(1, 1)) < 1e-14);
}

TEST_CASE("singular systems report a pivot") {
  RealSystem sys(3);
  sys.add(0, 0, 1.0);
  sys.add(2, 2, 1.0);
  sys.add(1, 0, 1.0);
  sys.add_rhs(0, 1.0);
  try {
    solve_sparse(sys);
    FAIL("expected FactorizationError");
  } catch (const FactorizationError& e) {
    CHECK(e.pivot() >= 0);
  }
}

TEST_CASE("system merging is order independent") {
  RealSystem a(3), b(3), ab(3), ba(3);
  a.add(0, 0, 1.0);
  a.add(1, 2, 2.0);
  b.add(1, 2, 3.0);
  b.add(2, 2, 4.0);
  ab.append(a);
  ab.append(b);
  ba.append(b);
  ba.append(a);
  const Eigen::MatrixXd m1 = Eigen::MatrixXd(ab.matrix());
  const Eigen::MatrixXd m2 = Eigen::MatrixXd(ba.matrix());
  CHECK(m1 == m2);
  CHECK(m1(1, 2) == 5.0);
}

TEST_CASE("apply_dirichlet keeps symmetry and fixes values") {
  Eigen::MatrixXd d(3, 3);
  d << 4, -1, 0, -1, 4, -1, 0, -1, 4;
  Eigen::SparseMatrix<double> a = d.sparseView();
  Eigen::VectorXd b(3);
  b << 1, 2, 3;
  apply_dirichlet<double>(a, b, {0}, {2.0});
  const Eigen::MatrixXd m(a);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 0.0);
  CHECK(m(1, 0) == 0.0);
  CHECK(b[0] == 2.0);
  CHECK(b[1] == doctest::Approx(4.0));
  SparseLU<double> lu;
  lu.factorize(a);
  const Eigen::VectorXd x = lu.solve(b);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(4 * x[1] - x[2] - 2.0 == doctest::Approx(2.0));
}

TEST_CASE("newton_solve scalar quadratic") {
  NewtonSettings s;
  auto lin = [](const Eigen::VectorXd& x) {
    Linearization l;
    l.residual = Eigen::VectorXd::Constant(1, x[0] * x[0] - 4.0);
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = 2.0 * x[0];
    l.jacobian = j.sparseView();
    return l;
  };
  auto r = newton_solve(lin, Eigen::VectorXd::Constant(1, 3.0), s);
  CHECK(r.converged);
  CHECK(r.iterations <= 6);
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-6));

  for (double x0 : {0.2, 0.5, 1.0, 5.0, 10.0, 20.0}) {
    auto rr = newton_solve(lin, Eigen::VectorXd::Constant(1, x0), s);
    CHECK(rr.converged);
    CHECK(rr.iterations <= 8);
  }
}

TEST_CASE("newton_solve linear system converges in one iteration") {
  Eigen::MatrixXd a(2, 2);
  a << 3, 1, 1, 2;
  Eigen::VectorXd b(2);
  b << 1, -1;
  auto lin = [&](const Eigen::VectorXd& x) {
    Linearization l;
    l.residual = a * x - b;
    l.jacobian = a.sparseView();
    return l;
  };
  auto r = newton_solve(lin, Eigen::VectorXd::Zero(2), NewtonSettings{});
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK((a * r.x - b).norm() < 1e-12);
}

TEST_CASE("newton_solve reports non-convergence and returns last iterate") {
  NewtonSettings s;
  s.max_iterations = 2;
  s.relative_residual_tol = 1e-14;
  auto lin = [](const Eigen::VectorXd& x) {
    Linearization l;
    l.residual = Eigen::VectorXd::Constant(1, std::atan(x[0]));
    Eigen::MatrixXd j(1, 1);
    j(0, 0) = 1.0 / (1.0 + x[0] * x[0]);
    l.jacobian = j.sparseView();
    return l;
  };
  auto r = newton_solve(lin, Eigen::VectorXd::Constant(1, 3.0), s);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
  CHECK(std::abs(r.x[0]) < 3.0);
  NewtonSettings bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(newton_solve(lin, Eigen::VectorXd::Zero(1), bad), InvalidArgument);
}

TEST_CASE("TimeGrid step size") {
  TimeGrid g{50e-6, 120};
  CHECK(g.dt() == doctest::Approx(50e-6 / 120));
  CHECK(g.time(120) == doctest::Approx(50e-6));
  CHECK_THROWS_AS((TimeGrid{0.0, 10}.validate()), InvalidArgument);
}
