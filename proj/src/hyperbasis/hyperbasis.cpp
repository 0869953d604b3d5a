#include "thinshell/hyperbasis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"

namespace thinshell::hyperbasis {

namespace {

// exp(z) - 1 without cancellation for small |z|.
cplx expm1c(cplx z) {
  const double x = z.real();
  const double y = z.imag();
  const double s = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

// Valid for Re z >= 0.
cplx tanh_stable(cplx z) {
  const cplx e = expm1c(-2.0 * z);
  return -e / (2.0 + e);
}

// With u = a (d/2 + y): psi+ = exp(u - ad) expm1(-2u) / expm1(-2ad).
cplx psi_plus(cplx a, double d, double y) {
  const cplx ad = a * d;
  const cplx u = a * (0.5 * d + y);
  return std::exp(u - ad) * expm1c(-2.0 * u) / expm1c(-2.0 * ad);
}

cplx dpsi_plus(cplx a, double d, double y) {
  const cplx ad = a * d;
  const cplx u = a * (0.5 * d + y);
  return a * std::exp(u - ad) * (2.0 + expm1c(-2.0 * u)) / (-expm1c(-2.0 * ad));
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive and finite");
}

}  // namespace

void SheetSpec::validate() const {
  check_positive(d, "sheet thickness");
  check_positive(mu, "sheet permeability");
  check_positive(sigma, "sheet conductivity");
}

double skin_depth(double mu, double sigma, double f) {
  check_positive(mu, "permeability");
  check_positive(sigma, "conductivity");
  check_positive(f, "frequency");
  return std::sqrt(2.0 / (mu * sigma * 2.0 * pi * f));
}

cplx wavenumber(const SheetSpec& sheet, double f) {
  sheet.validate();
  return cplx(1.0, 1.0) / skin_depth(sheet.mu, sheet.sigma, f);
}

cplx psi(const SheetSpec& sheet, double f, Side side, double y) {
  const cplx a = wavenumber(sheet, f);
  if (std::abs(y) > 0.5 * sheet.d * (1.0 + 1e-12)) throw InvalidArgument("psi: y outside the sheet");
  return psi_plus(a, sheet.d, side == Side::plus ? y : -y);
}

cplx dpsi(const SheetSpec& sheet, double f, Side side, double y) {
  const cplx a = wavenumber(sheet, f);
  if (std::abs(y) > 0.5 * sheet.d * (1.0 + 1e-12)) throw InvalidArgument("dpsi: y outside the sheet");
  return side == Side::plus ? dpsi_plus(a, sheet.d, y) : -dpsi_plus(a, sheet.d, -y);
}

ImpedanceCoefficients classical_ibc(const SheetSpec& sheet, double f) {
  const cplx a = wavenumber(sheet, f);
  const double omega = 2.0 * pi * f;
  const cplx t = tanh_stable(0.5 * a * sheet.d);
  ImpedanceCoefficients c;
  c.eta_h = -(cplx(0.0, omega * sheet.mu) / a) * t;
  c.eta_e = (sheet.sigma / a) * t;
  c.frequency = f;
  return c;
}

BasisSet::BasisSet(const SheetSpec& sheet, double f1, std::vector<int> ranks)
    : sheet_(sheet), f1_(f1), ranks_(std::move(ranks)) {
  sheet_.validate();
  check_positive(f1, "fundamental frequency");
  if (ranks_.empty()) throw InvalidArgument("BasisSet: need at least one rank");
  std::set<int> seen;
  for (int r : ranks_) {
    if (r < 1) throw InvalidArgument("BasisSet: ranks must be >= 1");
    if (!seen.insert(r).second) throw InvalidArgument("BasisSet: duplicate frequency in rank list");
  }
  for (int r : ranks_) a_.push_back(hyperbasis::wavenumber(sheet_, f1_ * r));
}

double BasisSet::skin_depth(int k) const { return hyperbasis::skin_depth(sheet_.mu, sheet_.sigma, frequency(k)); }

void BasisSet::check_y(double y) const {
  if (!(std::abs(y) <= 0.5 * sheet_.d * (1.0 + 1e-12))) throw InvalidArgument("BasisSet: y outside the sheet");
}

void BasisSet::fill(double y, double* value, double* derivative) const {
  const int nn = n();
  const double d = sheet_.d;
  for (int s = 0; s < 2; ++s) {
    const Side side = s == 0 ? Side::plus : Side::minus;
    const double ys = s == 0 ? y : -y;
    const double sign = s == 0 ? 1.0 : -1.0;
    double c1 = 0.0;
    double dc1 = 0.0;
    for (int k = 0; k < nn; ++k) {
      const cplx p = psi_plus(a_[k], d, ys);
      const cplx dp = sign * dpsi_plus(a_[k], d, ys);
      if (k == 0) {
        c1 = p.real();
        dc1 = dp.real();
      }
      const int ic = cos_index(k, side, nn);
      const int is = sin_index(k, side, nn);
      if (value) {
        value[ic] = k == 0 ? c1 : p.real() - c1;
        value[is] = p.imag();
      }
      if (derivative) {
        derivative[ic] = k == 0 ? dc1 : dp.real() - dc1;
        derivative[is] = dp.imag();
      }
    }
  }
}

double BasisSet::theta(int p, double y) const {
  if (p < 0 || p >= size()) throw InvalidArgument("BasisSet::theta: index out of range");
  return thetas(y)[p];
}

double BasisSet::dtheta(int p, double y) const {
  if (p < 0 || p >= size()) throw InvalidArgument("BasisSet::dtheta: index out of range");
  return dthetas(y)[p];
}

Eigen::VectorXd BasisSet::thetas(double y) const {
  check_y(y);
  Eigen::VectorXd v(size());
  fill(y, v.data(), nullptr);
  return v;
}

Eigen::VectorXd BasisSet::dthetas(double y) const {
  check_y(y);
  Eigen::VectorXd v(size());
  fill(y, nullptr, v.data());
  return v;
}

BasisSet build_basis(const SheetSpec& sheet, double f1, int n, RankRule rule, const std::vector<int>& ranks) {
  if (n < 1) throw InvalidArgument("build_basis: n must be >= 1");
  std::vector<int> r;
  switch (rule) {
    case RankRule::odd:
      for (int k = 1; k <= n; ++k) r.push_back(2 * k - 1);
      break;
    case RankRule::geometric:
      for (int k = 0, v = 1; k < n; ++k, v *= 4) r.push_back(v);
      break;
    case RankRule::explicit_list:
      if (static_cast<int>(ranks.size()) != n)
        throw InvalidArgument("build_basis: explicit rank list must have n entries");
      r = ranks;
      break;
  }
  return BasisSet(sheet, f1, std::move(r));
}

double eval_theta(const BasisSet& basis, int p, double y) { return basis.theta(p, y); }
double eval_dtheta(const BasisSet& basis, int p, double y) { return basis.dtheta(p, y); }

std::string to_string(RankRule r) {
  switch (r) {
    case RankRule::odd:
      return "odd";
    case RankRule::geometric:
      return "geometric";
    default:
      return "explicit";
  }
}

RankRule parse_rank_rule(const std::string& text) {
  if (text == "odd") return RankRule::odd;
  if (text == "geometric") return RankRule::geometric;
  if (text == "explicit") return RankRule::explicit_list;
  throw InvalidArgument("unknown rank rule '" + text + "' (expected odd, geometric or explicit)");
}

}  // namespace thinshell::hyperbasis
