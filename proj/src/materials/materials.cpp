#include "thinshell/materials.hpp"

#include <cmath>

#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"

namespace thinshell::materials {

MaterialModel MaterialModel::linear(double mu_r, double sigma) {
  MaterialModel m;
  m.kind = MaterialKind::linear;
  m.mu_r = mu_r;
  m.sigma = sigma;
  m.validate();
  return m;
}

MaterialModel MaterialModel::saturable(double mu_r0, double mu0_m0, double sigma) {
  MaterialModel m;
  m.kind = MaterialKind::saturable;
  m.mu_r0 = mu_r0;
  m.m0 = mu0_m0 / mu0;
  m.sigma = sigma;
  m.validate();
  return m;
}

void MaterialModel::validate() const {
  if (!(sigma >= 0.0)) throw InvalidArgument("material: sigma must be >= 0");
  if (kind == MaterialKind::linear) {
    if (!(mu_r > 0.0)) throw InvalidArgument("material: mu_r must be > 0");
  } else {
    if (!(mu_r0 > 1.0)) throw InvalidArgument("material: mu_r0 must be > 1");
    if (!(m0 > 0.0)) throw InvalidArgument("material: m0 must be > 0");
  }
}

namespace {

inline double offset(const MaterialModel& m) { return 1.0 / (m.mu_r0 - 1.0); }

void check_h(double h) {
  if (!(h >= 0.0)) throw InvalidArgument("field magnitude must be >= 0");
}

}  // namespace

double permeability(const MaterialModel& m, double h) {
  check_h(h);
  if (m.kind == MaterialKind::linear) return mu0 * m.mu_r;
  if (!(m.mu_r0 > 1.0)) throw InvalidArgument("material: mu_r0 must be > 1");
  return mu0 * (1.0 + 1.0 / (offset(m) + h / m.m0));
}

double permeability_slope(const MaterialModel& m, double h) {
  check_h(h);
  if (m.kind == MaterialKind::linear) return 0.0;
  const double s = offset(m) + h / m.m0;
  return -mu0 / (m.m0 * s * s);
}

double flux_from_field(const MaterialModel& m, double h) { return permeability(m, h) * h; }

double differential_scalar(const MaterialModel& m, double h) {
  return permeability(m, h) + h * permeability_slope(m, h);
}

Eigen::Matrix2d differential_permeability(const MaterialModel& m, const Eigen::Vector2d& h) {
  const double hn = h.norm();
  Eigen::Matrix2d t = permeability(m, hn) * Eigen::Matrix2d::Identity();
  if (m.kind == MaterialKind::saturable && hn > 0.0) t += permeability_slope(m, hn) * (h * h.transpose()) / hn;
  return t;
}

double field_from_flux(const MaterialModel& m, double b) {
  if (!(b >= 0.0)) throw InvalidArgument("flux magnitude must be >= 0");
  if (b == 0.0) return 0.0;
  if (m.kind == MaterialKind::linear) return b / (mu0 * m.mu_r);

  // b(h) is increasing with slope between mu0 and mu(0): bracket and polish.
  double lo = b / permeability(m, 0.0);
  double hi = b / mu0;
  double h = lo;
  for (int it = 0; it < 200; ++it) {
    const double r = flux_from_field(m, h) - b;
    if (r > 0.0)
      hi = h;
    else
      lo = h;
    double next = h - r / differential_scalar(m, h);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - h);
    h = next;
    if (step <= 1e-14 * h || hi - lo <= 1e-15 * hi) break;
  }
  return h;
}

Eigen::Matrix2d differential_reluctivity(const MaterialModel& m, const Eigen::Vector2d& b) {
  const double bn = b.norm();
  if (m.kind == MaterialKind::linear) return Eigen::Matrix2d::Identity() / (mu0 * m.mu_r);
  const double hn = field_from_flux(m, bn);
  const Eigen::Vector2d h = bn > 0.0 ? Eigen::Vector2d(b * (hn / bn)) : Eigen::Vector2d::Zero();
  return differential_permeability(m, h).inverse();
}

std::string to_string(MaterialKind k) { return k == MaterialKind::linear ? "linear" : "saturable"; }

MaterialKind parse_material_kind(const std::string& text) {
  if (text == "linear") return MaterialKind::linear;
  if (text == "saturable") return MaterialKind::saturable;
  throw InvalidArgument("unknown material kind '" + text + "' (expected linear or saturable)");
}

}  // namespace thinshell::materials
