#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace thinshell::hyperbasis {

using cplx = std::complex<double>;

/// Sheet occupying -d/2 <= y <= d/2 with the parametrization (mu, sigma).
struct SheetSpec {
  double d = 0.0;      ///< thickness, m
  double mu = 0.0;     ///< permeability used to build the basis, H/m
  double sigma = 0.0;  ///< conductivity, S/m

  void validate() const;
};

enum class Side { plus, minus };

/// How harmonic ranks k = 1..n map to frequencies f_k = rank_k * f1.
enum class RankRule {
  odd,        ///< 1, 3, 5, ...
  geometric,  ///< 1, 4, 16, ...
  explicit_list,
};

/// sqrt(2 / (mu sigma omega)).
double skin_depth(double mu, double sigma, double f);

/// Complex wavenumber (1 + j) / delta.
cplx wavenumber(const SheetSpec& sheet, double f);

/// sinh(a d/2 +- a y) / sinh(a d), evaluated with the dominant exponential factored out.
cplx psi(const SheetSpec& sheet, double f, Side side, double y);
/// d psi / dy.
cplx dpsi(const SheetSpec& sheet, double f, Side side, double y);

struct ImpedanceCoefficients {
  cplx eta_h;
  cplx eta_e;
  double frequency = 0.0;
};

/// eta_h = -(j omega mu / a) tanh(a d/2), eta_e = (sigma / a) tanh(a d/2).
ImpedanceCoefficients classical_ibc(const SheetSpec& sheet, double f);

/// The 4n real shape functions across the thickness.
///
/// Zero-based ordering: [c1+ .. cn+, s1+ .. sn+, c1- .. cn-, s1- .. sn-].
/// c1+ is 1 at y = +d/2 and c1- is 1 at y = -d/2; all others vanish at both faces.
class BasisSet {
 public:
  BasisSet(const SheetSpec& sheet, double f1, std::vector<int> ranks);

  int n() const { return static_cast<int>(ranks_.size()); }
  int size() const { return 4 * n(); }
  const SheetSpec& sheet() const { return sheet_; }
  double f1() const { return f1_; }
  const std::vector<int>& ranks() const { return ranks_; }
  double frequency(int k) const { return f1_ * ranks_.at(k); }
  double skin_depth(int k) const;
  cplx wavenumber(int k) const { return a_.at(k); }

  static int cos_index(int k, Side side, int n) { return (side == Side::plus ? 0 : 2 * n) + k; }
  static int sin_index(int k, Side side, int n) { return (side == Side::plus ? 0 : 2 * n) + n + k; }
  int trace_index(Side side) const { return cos_index(0, side, n()); }

  double theta(int p, double y) const;
  double dtheta(int p, double y) const;
  /// All 4n values at y.
  Eigen::VectorXd thetas(double y) const;
  Eigen::VectorXd dthetas(double y) const;

 private:
  void check_y(double y) const;
  void fill(double y, double* value, double* derivative) const;

  SheetSpec sheet_;
  double f1_;
  std::vector<int> ranks_;
  std::vector<cplx> a_;
};

/// Ranks per rule. `ranks` is used only with RankRule::explicit_list.
BasisSet build_basis(const SheetSpec& sheet, double f1, int n, RankRule rule, const std::vector<int>& ranks = {});

double eval_theta(const BasisSet& basis, int p, double y);
double eval_dtheta(const BasisSet& basis, int p, double y);

std::string to_string(RankRule r);
RankRule parse_rank_rule(const std::string& text);

}  // namespace thinshell::hyperbasis
