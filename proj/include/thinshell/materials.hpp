#pragma once

#include <Eigen/Dense>
#include <string>

namespace thinshell::materials {

enum class MaterialKind { linear, saturable };

/// Linear (mu_r, sigma) or the isotropic saturation law
/// mu(h) = mu0 (1 + (1/(mu_r0 - 1) + |h|/m0)^-1).
struct MaterialModel {
  MaterialKind kind = MaterialKind::linear;
  double sigma = 0.0;  ///< S/m
  double mu_r = 1.0;   ///< linear only
  double mu_r0 = 1.0;  ///< saturable: relative permeability at h = 0
  double m0 = 1.0;     ///< saturable: saturation field, A/m

  static MaterialModel linear(double mu_r, double sigma);
  /// `mu0_m0` is mu0 * m0 in tesla.
  static MaterialModel saturable(double mu_r0, double mu0_m0, double sigma);

  void validate() const;
  bool is_saturable() const { return kind == MaterialKind::saturable; }
};

double permeability(const MaterialModel& m, double h_magnitude);
/// d mu / d|h|.
double permeability_slope(const MaterialModel& m, double h_magnitude);
/// |b| = mu(|h|) |h|.
double flux_from_field(const MaterialModel& m, double h_magnitude);
/// d|b| / d|h| = mu + |h| mu'.
double differential_scalar(const MaterialModel& m, double h_magnitude);

/// db/dh = mu I + mu' (h h^T) / |h|; mu(0) I at the origin.
Eigen::Matrix2d differential_permeability(const MaterialModel& m, const Eigen::Vector2d& h);

/// Unique h >= 0 with mu(h) h = b.
double field_from_flux(const MaterialModel& m, double b_magnitude);

/// dh/db at flux density b, the inverse of the differential permeability.
Eigen::Matrix2d differential_reluctivity(const MaterialModel& m, const Eigen::Vector2d& b);

std::string to_string(MaterialKind k);
MaterialKind parse_material_kind(const std::string& text);

}  // namespace thinshell::materials
