#include <doctest.h>

#include <cmath>
#include <complex>

#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/hyperbasis.hpp"

using namespace thinshell;
using namespace thinshell::hyperbasis;

namespace {

using lcplx = std::complex<long double>;

// Direct sinh ratio in extended precision; fine while |a| d stays moderate.
lcplx psi_ld(long double d, long double delta, bool plus, long double y) {
  const lcplx a(1.0L / delta, 1.0L / delta);
  const long double s = plus ? 1.0L : -1.0L;
  return std::sinh(a * d / 2.0L + s * a * y) / std::sinh(a * d);
}

SheetSpec sheet_with_ratio(double d, double ratio, double f) {
  // Choose sigma so that delta = ratio * d at frequency f.
  const double mu = 1000.0 * mu0;
  const double delta = ratio * d;
  const double sigma = 2.0 / (mu * 2.0 * pi * f * delta * delta);
  return SheetSpec{d, mu, sigma};
}

}  // namespace

TEST_CASE("skin depths of the benchmark shields") {
  CHECK(skin_depth(mu0, 1e6, 50.0) == doctest::Approx(71.2e-3).epsilon(5e-3));
  CHECK(skin_depth(1000 * mu0, 1e7, 50.0) == doctest::Approx(0.712e-3).epsilon(5e-3));
  CHECK(1e-3 / skin_depth(1000 * mu0, 1e6, 5e3) == doctest::Approx(4.44).epsilon(5e-3));
  CHECK_THROWS_AS(skin_depth(0.0, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(skin_depth(1.0, 1.0, -1.0), InvalidArgument);
}

TEST_CASE("psi boundary values and thin limit") {
  const SheetSpec s = sheet_with_ratio(1e-3, 1.0, 50.0);
  CHECK(std::abs(psi(s, 50.0, Side::plus, 0.5e-3) - cplx(1.0, 0.0)) < 1e-15);
  CHECK(std::abs(psi(s, 50.0, Side::plus, -0.5e-3)) < 1e-15);
  CHECK(std::abs(psi(s, 50.0, Side::minus, -0.5e-3) - cplx(1.0, 0.0)) < 1e-15);
  CHECK_THROWS_AS(psi(s, 50.0, Side::plus, 1e-3), InvalidArgument);

  const SheetSpec thin = sheet_with_ratio(1e-3, 100.0, 50.0);
  CHECK(std::abs(psi(thin, 50.0, Side::plus, 0.0) - cplx(0.5, 0.0)) < 1e-3);
}

TEST_CASE("psi and dpsi match extended precision at delta = d") {
  const double d = 1e-3;
  const SheetSpec s = sheet_with_ratio(d, 1.0, 50.0);
  const double delta = skin_depth(s.mu, s.sigma, 50.0);
  for (double y : {-d / 4, -0.37 * d, 0.0, 0.21 * d, 0.5 * d}) {
    for (bool plus : {true, false}) {
      const lcplx ref = psi_ld(d, delta, plus, y);
      const cplx got = psi(s, 50.0, plus ? Side::plus : Side::minus, y);
      CHECK(std::abs(got - cplx(static_cast<double>(ref.real()), static_cast<double>(ref.imag()))) < 1e-12);
      // Derivative oracle: a cosh(.)/sinh(ad) times the side sign.
      const lcplx a(1.0L / delta, 1.0L / delta);
      const long double sg = plus ? 1.0L : -1.0L;
      const lcplx dref =
          sg * a * std::cosh(a * (long double)d / 2.0L + sg * a * (long double)y) / std::sinh(a * (long double)d);
      const cplx dgot = dpsi(s, 50.0, plus ? Side::plus : Side::minus, y);
      CHECK(std::abs(dgot - cplx(static_cast<double>(dref.real()), static_cast<double>(dref.imag()))) <
            1e-12 * std::abs(dref));
    }
  }
}

TEST_CASE("psi does not overflow for very thick sheets") {
  const double d = 1e-3;
  const SheetSpec s = sheet_with_ratio(d, 1e-4, 50.0);  // |a| d ~ 1.4e4
  for (double y : {-0.5 * d, -0.1 * d, 0.0, 0.4999 * d, 0.5 * d}) {
    const cplx p = psi(s, 50.0, Side::plus, y);
    const cplx dp = dpsi(s, 50.0, Side::plus, y);
    CHECK(std::isfinite(p.real()));
    CHECK(std::isfinite(p.imag()));
    CHECK(std::isfinite(dp.real()));
    CHECK(std::isfinite(dp.imag()));
    // Scaled analytic form deep in the sheet: psi+ ~ exp(-a (d/2 - y)).
    const cplx a = wavenumber(s, 50.0);
    CHECK(std::abs(p - std::exp(-a * (0.5 * d - y))) < 1e-12);
  }
}

TEST_CASE("build_basis rank rules") {
  const SheetSpec s{1e-3, 1000 * mu0, 1e6};
  auto odd = build_basis(s, 5e3, 2, RankRule::odd);
  CHECK(odd.frequency(1) == doctest::Approx(3 * 5e3));
  // delta_1 = d at f1; geometric ranks give d/2 and d/4.
  const double f1 = 2.0 / (s.mu * s.sigma * 2.0 * pi * 1e-6);
  auto geo = build_basis(s, f1, 3, RankRule::geometric);
  CHECK(geo.frequency(1) == doctest::Approx(4 * f1));
  CHECK(geo.frequency(2) == doctest::Approx(16 * f1));
  CHECK(geo.skin_depth(0) == doctest::Approx(1e-3));
  CHECK(geo.skin_depth(1) == doctest::Approx(0.5e-3));
  CHECK(geo.skin_depth(2) == doctest::Approx(0.25e-3));
  auto ex = build_basis(s, f1, 2, RankRule::explicit_list, {1, 7});
  CHECK(ex.frequency(1) == doctest::Approx(7 * f1));
  CHECK_THROWS_AS(build_basis(s, f1, 2, RankRule::explicit_list, {3, 3}), InvalidArgument);
  CHECK_THROWS_AS(build_basis(s, f1, 0, RankRule::odd), InvalidArgument);
  CHECK(parse_rank_rule("geometric") == RankRule::geometric);
  CHECK_THROWS_AS(parse_rank_rule("prime"), InvalidArgument);
}

TEST_CASE("basis boundary property and symmetry") {
  for (double ratio : {0.1, 1.0, 10.0}) {
    for (int n : {1, 2, 3, 5}) {
      const SheetSpec s = sheet_with_ratio(1e-3, ratio, 1e3);
      const auto b = build_basis(s, 1e3, n, RankRule::odd);
      const double h = 0.5 * s.d;
      const Eigen::VectorXd top = b.thetas(h);
      const Eigen::VectorXd bot = b.thetas(-h);
      const int ip = b.trace_index(Side::plus), im = b.trace_index(Side::minus);
      int nonzero = 0;
      for (int p = 0; p < b.size(); ++p) {
        CHECK(std::abs(top[p] - (p == ip ? 1.0 : 0.0)) < 1e-12);
        CHECK(std::abs(bot[p] - (p == im ? 1.0 : 0.0)) < 1e-12);
        nonzero += std::abs(top[p]) > 1e-12;
        nonzero += std::abs(bot[p]) > 1e-12;
      }
      CHECK(nonzero == 2);
      for (double y : {-0.4e-3, -0.1e-3, 0.0, 0.333e-3}) {
        const Eigen::VectorXd tp = b.thetas(y), tm = b.thetas(-y);
        for (int k = 0; k < n; ++k) {
          CHECK(std::abs(tp[BasisSet::cos_index(k, Side::minus, n)] - tm[BasisSet::cos_index(k, Side::plus, n)]) <
                1e-13);
          CHECK(std::abs(tp[BasisSet::sin_index(k, Side::minus, n)] - tm[BasisSet::sin_index(k, Side::plus, n)]) <
                1e-13);
        }
      }
    }
  }
}

TEST_CASE("decomposition identity for the first pair") {
  const SheetSpec s = sheet_with_ratio(1e-3, 0.7, 1e3);
  const auto b = build_basis(s, 1e3, 1, RankRule::odd);
  for (double y = -0.5e-3; y <= 0.5e-3; y += 0.05e-3) {
    const cplx pp = psi(s, 1e3, Side::plus, y);
    CHECK(std::abs(pp.real() - b.theta(BasisSet::cos_index(0, Side::plus, 1), y)) < 1e-13);
    CHECK(std::abs(pp.imag() - b.theta(BasisSet::sin_index(0, Side::plus, 1), y)) < 1e-13);
  }
}

TEST_CASE("higher cosines subtract the first cosine") {
  const SheetSpec s = sheet_with_ratio(1e-3, 1.0, 1e3);
  const auto b = build_basis(s, 1e3, 3, RankRule::odd);
  const double y = 0.1e-3;
  const double c1 = psi(s, 1e3, Side::plus, y).real();
  CHECK(b.theta(1, y) == doctest::Approx(psi(s, 3e3, Side::plus, y).real() - c1).epsilon(1e-13));
  CHECK(b.theta(4, y) == doctest::Approx(psi(s, 3e3, Side::plus, y).imag()).epsilon(1e-13));
}

TEST_CASE("thin limit approaches the linear hats monotonically") {
  double prev = 1e300;
  for (double ratio : {10.0, 100.0, 1000.0}) {
    const SheetSpec s = sheet_with_ratio(1e-3, ratio, 50.0);
    const auto b = build_basis(s, 50.0, 1, RankRule::odd);
    double sup = 0.0, sup_sin = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double y = -0.5e-3 + 1e-3 * i / 100.0;
      const Eigen::VectorXd t = b.thetas(y);
      sup = std::max(sup, std::abs(t[0] - (0.5e-3 + y) / 1e-3));
      sup = std::max(sup, std::abs(t[2] - (0.5e-3 - y) / 1e-3));
      sup_sin = std::max({sup_sin, std::abs(t[1]), std::abs(t[3])});
    }
    CHECK(sup < prev);
    prev = sup;
    if (ratio == 1000.0) {
      CHECK(sup < 1e-6);
      CHECK(sup_sin < 1e-6);
    }
  }
}

TEST_CASE("analytic derivative matches central differences") {
  const SheetSpec s = sheet_with_ratio(1e-3, 0.5, 1e3);
  const auto b = build_basis(s, 1e3, 3, RankRule::odd);
  const double h = 1e-8;
  for (int i = 1; i <= 20; ++i) {
    const double y = -0.5e-3 + 1e-3 * i / 21.0;
    const Eigen::VectorXd fd = (b.thetas(y + h) - b.thetas(y - h)) / (2 * h);
    const Eigen::VectorXd an = b.dthetas(y);
    for (int p = 0; p < b.size(); ++p) CHECK(std::abs(fd[p] - an[p]) <= 1e-6 * std::max(1.0, an.cwiseAbs().maxCoeff()));
  }
  CHECK_THROWS_AS(eval_theta(b, 12, 0.0), InvalidArgument);
  CHECK_THROWS_AS(eval_dtheta(b, -1, 0.0), InvalidArgument);
  CHECK(eval_theta(b, 0, 0.5e-3) == doctest::Approx(1.0));
  CHECK(std::abs(eval_theta(b, 4, 0.5e-3)) < 1e-12);
  CHECK(std::abs(eval_theta(b, 4, -0.5e-3)) < 1e-12);
}

TEST_CASE("classical IBC limits and extended precision") {
  const double d = 1e-3, f = 50.0;
  const SheetSpec thin = sheet_with_ratio(d, 1000.0, f);
  const auto c = classical_ibc(thin, f);
  const double omega = 2 * pi * f;
  CHECK(std::abs(c.eta_e - cplx(thin.sigma * d / 2, 0)) <= 1e-4 * thin.sigma * d / 2);
  CHECK(std::abs(c.eta_h - cplx(0, -omega * thin.mu * d / 2)) <= 1e-4 * omega * thin.mu * d / 2);

  const SheetSpec s = sheet_with_ratio(d, 1.0, f);
  const long double delta = skin_depth(s.mu, s.sigma, f);
  const lcplx a(1.0L / delta, 1.0L / delta);
  const lcplx t = std::tanh(a * (long double)d / 2.0L);
  const lcplx eh = -(lcplx(0.0L, (long double)omega * s.mu) / a) * t;
  const lcplx ee = ((long double)s.sigma / a) * t;
  const auto g = classical_ibc(s, f);
  CHECK(std::abs(g.eta_h - cplx((double)eh.real(), (double)eh.imag())) <= 1e-12 * std::abs((double)std::abs(eh)));
  CHECK(std::abs(g.eta_e - cplx((double)ee.real(), (double)ee.imag())) <= 1e-12 * std::abs((double)std::abs(ee)));
  CHECK_THROWS_AS(classical_ibc(s, 0.0), InvalidArgument);
}
