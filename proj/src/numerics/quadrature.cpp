#include <cmath>
#include <numbers>

#include "thinshell/errors.hpp"
#include "thinshell/numerics.hpp"

namespace thinshell::numerics {

QuadratureRule gauss_legendre(int order) {
  if (order < 1) throw InvalidArgument("gauss_legendre: order must be >= 1");

  const int n = order;
  QuadratureRule rule;
  rule.points.assign(n, 0.0);
  rule.weights.assign(n, 0.0);

  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi-type initial guess for the i-th largest root.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) <= 1e-15) break;
    }
    // Re-evaluate the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);

    rule.points[n - 1 - i] = z;
    rule.points[i] = -z;
    rule.weights[n - 1 - i] = w;
    rule.weights[i] = w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.0;
  return rule;
}

QuadratureRule composite_gauss_legendre(double a, double b, int order, int subintervals) {
  if (subintervals < 1) throw InvalidArgument("composite_gauss_legendre: subintervals must be >= 1");
  if (!(b > a)) throw InvalidArgument("composite_gauss_legendre: empty interval");
  const QuadratureRule ref = gauss_legendre(order);
  QuadratureRule out;
  out.points.reserve(ref.size() * subintervals);
  out.weights.reserve(ref.size() * subintervals);
  const double width = (b - a) / subintervals;
  for (int s = 0; s < subintervals; ++s) {
    const double lo = a + s * width;
    const double mid = lo + 0.5 * width;
    for (std::size_t q = 0; q < ref.size(); ++q) {
      out.points.push_back(mid + 0.5 * width * ref.points[q]);
      out.weights.push_back(0.5 * width * ref.weights[q]);
    }
  }
  return out;
}

void TimeGrid::validate() const {
  if (!(t_max > 0.0) || steps < 1) throw InvalidArgument("TimeGrid: need t_max > 0 and steps >= 1");
}

void NewtonSettings::validate() const {
  if (max_iterations < 1) throw InvalidArgument("NewtonSettings: max_iterations must be >= 1");
  if (!(relative_residual_tol > 0.0)) throw InvalidArgument("NewtonSettings: tolerance must be > 0");
  if (max_backtracks < 0) throw InvalidArgument("NewtonSettings: max_backtracks must be >= 0");
}

}  // namespace thinshell::numerics
