#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "thinshell/hyperbasis.hpp"
#include "thinshell/materials.hpp"
#include "thinshell/mesh2d.hpp"
#include "thinshell/numerics.hpp"
#include "thinshell/slab1d.hpp"

namespace thinshell::fem2d {

using cplx = std::complex<double>;
using hyperbasis::BasisSet;
using materials::MaterialModel;
using mesh2d::Mesh2D;
using mesh2d::Point;
using numerics::NewtonSettings;
using numerics::TimeGrid;

enum class Mode { harmonic, transient };
enum class ModelKind { ts, reference };
enum class Waveform { sinusoid, pulse };

std::string to_string(Mode m);
std::string to_string(ModelKind m);
Mode parse_mode(const std::string& s);
ModelKind parse_model(const std::string& s);

/// Equal and opposite wire currents: +I(t) in wire_plus, -I(t) in wire_minus.
struct SourceSpec {
  Waveform waveform = Waveform::sinusoid;
  double amplitude = 6e3;    ///< A
  double frequency = 50.0;   ///< Hz, sinusoid only
  double phase = 0.0;        ///< rad, sinusoid only
  double rise_time = 20e-6;  ///< s, pulse only

  static SourceSpec sinusoid(double amplitude, double frequency, double phase = 0.0);
  /// Half-cosine ramp from 0 to `amplitude` over `rise_time`, then flat.
  static SourceSpec pulse(double amplitude, double rise_time);

  void validate() const;
  double current(double t) const;
  /// Complex amplitude with I(t) = Re(phasor e^{j omega t}) = amplitude cos(omega t + phase).
  cplx phasor() const { return std::polar(amplitude, phase); }
};

/// One crack segment of the thin-shell coupling. The sheet field along the
/// segment is h_x(y) = sum_i u_i phi_i(y) in reduced coordinates, with u_0 and
/// u_1 the tangential traces on the + and - sides.
struct TSCouplingBlock {
  std::array<int, 2> plus;   ///< potential nodes at the segment ends, + side
  std::array<int, 2> minus;  ///< potential nodes at the segment ends, - side
  double length = 0.0;
  Point tangent;                                      ///< unit vector from the first to the second end
  std::array<double, 2> tangential_source{0.0, 0.0};  ///< unit-current cut field along the segment, per side
  int internal_offset = 0;                            ///< first internal unknown of this segment
  int internal_count = 0;
  Eigen::MatrixXd S;  ///< length-scaled reduced stiffness, 1 x 1/m x m
  Eigen::MatrixXd M;  ///< length-scaled reduced mass, m x m
};

/// Thin-shell discretisation data shared by solve_ts and probes.
struct TSModel {
  BasisSet basis;
  slab1d::ReducedBasis reduced;
  std::vector<TSCouplingBlock> blocks;
  int num_potential = 0;  ///< one scalar potential per node
  int num_internal = 0;
  int pinned = 0;  ///< potential node fixed to zero
  /// Unit-current source field: line integrals along each triangle edge v[k] -> v[k+1].
  std::vector<std::array<double, 3>> source_edges;

  int size() const { return num_potential + num_internal; }
  /// Unknowns the formulation carries per segment before dependent sheet directions are dropped.
  int nominal_size() const;
};

TSModel build_ts_model(const Mesh2D& mesh, const BasisSet& basis, int quad_order = 20);

/// Unit-current cut field: curl equals the wire current density in the
/// wires, zero elsewhere, circulation +1 around wire_plus.
std::vector<std::array<double, 3>> build_source_field(const Mesh2D& mesh);

/// Harmonic 2 x 2 relation [q+, -q-] = K [h+, h-] per unit length after
/// eliminating the internal unknowns of one segment.
Eigen::Matrix2cd eliminate_internal(const TSCouplingBlock& block, double rho, double mu, double omega);

struct FieldSolution {
  ModelKind model = ModelKind::ts;
  Mode mode = Mode::transient;
  std::shared_ptr<const Mesh2D> mesh;
  std::shared_ptr<const TSModel> ts;  ///< null for the reference model
  MaterialModel material;
  SourceSpec source;
  TimeGrid grid;
  double frequency = 0.0;

  std::vector<Eigen::VectorXd> states;  ///< transient: steps + 1 DoF vectors
  Eigen::VectorXcd phasor;              ///< harmonic DoF phasors
  /// Transient: I(t_k) for k >= 1. Runs start from rest, so entry 0 is 0 and a
  /// nonzero I(0) acts as a step at the first time step.
  std::vector<double> currents;
  std::vector<double> loss;            ///< transient: W/m per step (entry 0 is 0); harmonic: time-average
  std::vector<int> newton_iterations;  ///< per step, nonlinear only
  std::vector<char> converged;         ///< per step, nonlinear only
  int dofs = 0;
  int nominal_dofs = 0;

  int steps() const { return static_cast<int>(states.size()) - 1; }
  int max_newton_iterations() const;
  bool all_converged() const;
  /// 4n sheet coefficients of a segment at a step (TS transient).
  Eigen::VectorXd segment_coefficients(int segment, int step) const;
};

FieldSolution solve_ts(std::shared_ptr<const Mesh2D> mesh, const BasisSet& basis, const MaterialModel& material,
                       const SourceSpec& source, Mode mode, const TimeGrid& grid = {},
                       const NewtonSettings& newton = {});

FieldSolution solve_reference(std::shared_ptr<const Mesh2D> mesh, const MaterialModel& material,
                              const SourceSpec& source, Mode mode, const TimeGrid& grid = {},
                              const NewtonSettings& newton = {});

enum class Component { hx, hy, magnitude };
std::string to_string(Component c);
Component parse_component(const std::string& s);

struct ProbeSeries {
  std::vector<double> coord;  ///< position along a line, depth, or time
  std::vector<cplx> value;    ///< imaginary part is zero for transient results
};

/// Magnetic field at points, interpolated from nodal values recovered by a
/// least-squares linear fit of the element values over the triangles of the
/// same region around each vertex. Points
/// inside the sheet of a TS model use the through-thickness expansion, with
/// the normal component from the normal flux of the adjacent triangles.
class FieldProbe {
 public:
  FieldProbe(const FieldSolution& sol, std::vector<Point> points);

  std::vector<Eigen::Vector2d> h(int step) const;
  std::vector<Eigen::Vector2cd> h_phasor() const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Term {
    int triangle;
    double weight;
  };
  /// Point inside the sheet: segment states interpolated linearly between
  /// segment midpoints, evaluated at `depth` through the thickness.
  struct SheetSample {
    std::vector<std::pair<int, double>> segments;
    double depth = 0.0;
    Eigen::VectorXd phis;
  };
  const FieldSolution* sol_;
  std::vector<Point> points_;
  std::vector<std::vector<Term>> stencils_;
  std::vector<SheetSample> sheet_;
  std::vector<std::array<int, 2>> side_triangles_;  ///< per segment, + and - side neighbours
};

/// Element value of h in one triangle (centroid value for the TS source field).
Eigen::Vector2d element_h(const FieldSolution& sol, int triangle, int step);
Eigen::Vector2cd element_h_phasor(const FieldSolution& sol, int triangle);
/// h at a point from the containing triangle, without recovery.
Eigen::Vector2d point_h_raw(const FieldSolution& sol, const Point& p, int step);

/// Evenly spaced samples from a to b, both included. The coordinate is the
/// varying axis of an axis-aligned line, the arc length otherwise.
ProbeSeries probe_line(const FieldSolution& sol, const Point& a, const Point& b, int samples, Component c,
                       int step = -1);
/// Time series at a point (transient) or a single phasor value (harmonic).
ProbeSeries probe_point(const FieldSolution& sol, const Point& p, Component c);
/// Profile across the sheet at abscissa x.
ProbeSeries probe_depth(const FieldSolution& sol, double x, const std::vector<double>& depths, Component c,
                        int step = -1);

/// Closed-loop line integral of h along a polygon using raw element values.
double circulation(const FieldSolution& sol, const std::vector<Point>& polygon, int step, int samples_per_side = 4000);

/// Per-step loss recomputed from the stored field history with sol.material,
/// laid out like FieldSolution::loss.
std::vector<double> recompute_loss(const FieldSolution& sol);

/// Transient: time integral of the loss, J/m. Harmonic: time-averaged loss, W/m.
double total_loss(const FieldSolution& sol);

/// 100 ||ts - ref|| / ||ref||.
double relative_difference(const std::vector<double>& ts, const std::vector<double>& ref);
double relative_difference(const std::vector<cplx>& ts, const std::vector<cplx>& ref);

}  // namespace thinshell::fem2d
