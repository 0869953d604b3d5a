#include <algorithm>

#include "thinshell/errors.hpp"
#include "thinshell/numerics.hpp"

namespace thinshell::numerics {

NewtonResult newton_solve(const LinearizeFn& linearize, Eigen::VectorXd x0, const NewtonSettings& settings) {
  settings.validate();
  NewtonResult result;
  result.x = std::move(x0);

  Linearization lin = linearize(result.x);
  double norm = lin.residual.norm();
  const double scale = lin.reference_norm > 0.0 ? lin.reference_norm : norm;
  if (scale == 0.0) {
    result.converged = true;
    return result;
  }
  result.relative_residual = norm / scale;

  while (result.iterations < settings.max_iterations) {
    if (result.relative_residual <= settings.relative_residual_tol) break;
    Eigen::VectorXd dx;
    if (lin.solve) {
      dx = lin.solve(-lin.residual);
    } else {
      SparseLU<double> lu;
      lu.factorize(lin.jacobian);
      dx = lu.solve(-lin.residual);
    }
    ++result.iterations;

    double step = 1.0;
    Eigen::VectorXd trial = result.x + dx;
    Linearization trial_lin = linearize(trial);
    double trial_norm = trial_lin.residual.norm();
    for (int b = 0; b < settings.max_backtracks && !(trial_norm < norm); ++b) {
      step *= 0.5;
      trial = result.x + step * dx;
      trial_lin = linearize(trial);
      trial_norm = trial_lin.residual.norm();
    }
    result.x = std::move(trial);
    lin = std::move(trial_lin);
    norm = trial_norm;
    result.relative_residual = norm / scale;
  }
  result.converged = result.relative_residual <= settings.relative_residual_tol;
  return result;
}

}  // namespace thinshell::numerics
