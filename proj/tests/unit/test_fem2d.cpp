#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "thinshell/constants.hpp"
#include "thinshell/errors.hpp"
#include "thinshell/fem2d.hpp"
#include "thinshell/hyperbasis.hpp"
#include "thinshell/slab1d.hpp"

using namespace thinshell;
using namespace thinshell::fem2d;
using hyperbasis::RankRule;
using mesh2d::GeometrySpec;
using mesh2d::Region;

namespace {

constexpr double d = 1e-3;

std::shared_ptr<const Mesh2D> ts_mesh() {
  static const auto m = [] {
    GeometrySpec g;
    g.resolve_shield_volume = false;
    return std::make_shared<const Mesh2D>(mesh2d::generate_mesh(g, 0.01, 0.08));
  }();
  return m;
}

std::shared_ptr<const Mesh2D> volume_mesh() {
  static const auto m = std::make_shared<const Mesh2D>(mesh2d::generate_mesh(GeometrySpec{}, 0.001, 0.08));
  return m;
}

BasisSet basis_for(const MaterialModel& m, double f1, int n) {
  return hyperbasis::build_basis({d, materials::permeability(m, 0.0), m.sigma}, f1, n, RankRule::odd);
}

const std::vector<Point> loop_plus{{-0.2, -0.15}, {-0.1, -0.15}, {-0.1, -0.05}, {-0.2, -0.05}};
const std::vector<Point> loop_minus{{0.1, -0.15}, {0.2, -0.15}, {0.2, -0.05}, {0.1, -0.05}};
const std::vector<Point> loop_both{{-0.3, -0.15}, {0.3, -0.15}, {0.3, -0.05}, {-0.3, -0.05}};

}  // namespace

TEST_CASE("n = 1 segment elimination reproduces the classical IBC") {
  const double f = 50.0, mu_r = 1000.0;
  const double omega = 2.0 * pi * f;
  for (double ratio : {0.1, 1.0, 10.0, 1000.0}) {
    const double delta = ratio * d;
    const auto mat = MaterialModel::linear(mu_r, 2.0 / (mu_r * mu0 * omega * delta * delta));
    const auto basis = basis_for(mat, f, 1);
    const TSModel model = build_ts_model(*ts_mesh(), basis);
    REQUIRE(!model.blocks.empty());
    const auto ibc = hyperbasis::classical_ibc(basis.sheet(), f);
    for (std::size_t s : {std::size_t{0}, model.blocks.size() / 2, model.blocks.size() - 1}) {
      const auto& b = model.blocks[s];
      const Eigen::Matrix2cd k = eliminate_internal(b, 1.0 / mat.sigma, basis.sheet().mu, omega);
      const cplx eta_h = -(k(0, 0) + k(0, 1));
      const cplx eta_e = 1.0 / (k(0, 0) - k(0, 1));
      CHECK(std::abs(eta_h - ibc.eta_h) <= 1e-8 * std::abs(ibc.eta_h));
      CHECK(std::abs(eta_e - ibc.eta_e) <= 1e-8 * std::abs(ibc.eta_e));
    }
  }
}

TEST_CASE("coupling blocks are symmetric and cover the crack") {
  const auto mat = MaterialModel::linear(1000.0, 1e7);
  const auto basis = basis_for(mat, 50.0, 3);
  const TSModel model = build_ts_model(*ts_mesh(), basis);
  const int m = model.reduced.size();
  CHECK(static_cast<int>(model.blocks.size()) == static_cast<int>(ts_mesh()->crack_pairs.size()) + 1);
  CHECK(model.num_internal == static_cast<int>(model.blocks.size()) * (m - 2));
  CHECK(model.nominal_size() == ts_mesh()->num_nodes() + static_cast<int>(model.blocks.size()) * (4 * 3 - 2));
  double total = 0.0;
  for (const auto& b : model.blocks) {
    CHECK((b.S - b.S.transpose()).norm() <= 1e-12 * b.S.norm());
    CHECK((b.M - b.M.transpose()).norm() <= 1e-12 * b.M.norm());
    CHECK(b.internal_count == m - 2);
    total += b.length;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(build_ts_model(*volume_mesh(), basis), TopologyError);
}

TEST_CASE("source field carries the wire currents") {
  const Mesh2D& mesh = *ts_mesh();
  const auto e = build_source_field(mesh);
  const GeometrySpec g;
  std::map<std::pair<int, int>, double> edge;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& v = mesh.triangles[t].v;
    const double curl = e[t][0] + e[t][1] + e[t][2];
    const Region r = mesh.triangles[t].region;
    const double want = r == Region::wire_plus    ? mesh.signed_area(t) / g.wire_area()
                        : r == Region::wire_minus ? -mesh.signed_area(t) / g.wire_area()
                                                  : 0.0;
    CHECK(curl == doctest::Approx(want).epsilon(1e-9).scale(1e-6));
    for (int k = 0; k < 3; ++k) {
      const auto rev = edge.find({v[(k + 1) % 3], v[k]});
      if (rev != edge.end()) CHECK(rev->second == doctest::Approx(-e[t][k]).scale(1.0));
      edge[{v[k], v[(k + 1) % 3]}] = e[t][k];
    }
  }
  CHECK_THROWS_AS(build_source_field(Mesh2D{}), TopologyError);
}

TEST_CASE("Ampere loops give the wire currents") {
  const auto mat = MaterialModel::linear(1000.0, 1e7);
  const auto src = SourceSpec::sinusoid(6e3, 50.0);
  const auto ts = solve_ts(ts_mesh(), basis_for(mat, 50.0, 1), mat, src, Mode::harmonic);
  const auto ref = solve_reference(volume_mesh(), mat, src, Mode::harmonic);
  for (const FieldSolution* s : {&ts, &ref}) {
    CHECK(std::abs(circulation(*s, loop_plus, 0) / 6e3 - 1.0) < 5e-3);
    CHECK(std::abs(circulation(*s, loop_minus, 0) / 6e3 + 1.0) < 5e-3);
    CHECK(std::abs(circulation(*s, loop_both, 0) / 6e3) < 5e-3);
  }

  const TimeGrid grid{5e-3, 10};
  const auto tr = solve_ts(ts_mesh(), basis_for(mat, 50.0, 1), mat, src, Mode::transient, grid);
  for (int k : {3, 7}) CHECK(std::abs(circulation(tr, loop_plus, k) / src.current(grid.time(k)) - 1.0) < 5e-3);
}

TEST_CASE("shield-free runs agree between the two formulations") {
  GeometrySpec g;
  g.has_shield = false;
  const auto mesh = std::make_shared<const Mesh2D>(mesh2d::generate_mesh(g, 0.01, 0.02));
  const auto mat = MaterialModel::linear(1000.0, 1e7);
  const auto src = SourceSpec::sinusoid(6e3, 50.0);
  const auto ts = solve_ts(mesh, basis_for(mat, 50.0, 1), mat, src, Mode::harmonic);
  const auto ref = solve_reference(mesh, mat, src, Mode::harmonic);
  CHECK(ts.ts->blocks.empty());
  const auto a = probe_line(ts, {-1.0, 0.1}, {1.0, 0.1}, 201, Component::magnitude);
  const auto b = probe_line(ref, {-1.0, 0.1}, {1.0, 0.1}, 201, Component::magnitude);
  CHECK(relative_difference(a.value, b.value) < 0.5);
  CHECK(total_loss(ts) == 0.0);
  CHECK(total_loss(ref) == 0.0);
}

TEST_CASE("zero source gives zero field and loss") {
  const auto mat = MaterialModel::linear(1000.0, 1e7);
  const auto src = SourceSpec::sinusoid(0.0, 50.0);
  const auto ts = solve_ts(ts_mesh(), basis_for(mat, 50.0, 2), mat, src, Mode::harmonic);
  const auto ref = solve_reference(volume_mesh(), mat, SourceSpec::pulse(0.0, 20e-6), Mode::transient, {50e-6, 5});
  CHECK(ts.phasor.norm() == 0.0);
  for (const auto& x : ref.states) CHECK(x.norm() == 0.0);
  CHECK(total_loss(ts) == 0.0);
  CHECK(total_loss(ref) == 0.0);
  for (const auto& v : probe_line(ts, {0.0, -0.2}, {0.0, 0.2}, 21, Component::magnitude).value)
    CHECK(std::abs(v) == 0.0);
}

TEST_CASE("doubling the current doubles the field") {
  const auto mat = MaterialModel::linear(1000.0, 1e7);
  const auto basis = basis_for(mat, 50.0, 2);
  const std::vector<Point> pts{{0.0, 0.1}, {0.25, 0.0}, {0.49, 2e-4}, {-0.3, -0.3}};
  const auto one = solve_ts(ts_mesh(), basis, mat, SourceSpec::sinusoid(3e3, 50.0), Mode::harmonic);
  const auto two = solve_ts(ts_mesh(), basis, mat, SourceSpec::sinusoid(6e3, 50.0), Mode::harmonic);
  const auto h1 = FieldProbe(one, pts).h_phasor(), h2 = FieldProbe(two, pts).h_phasor();
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((h2[i] - 2.0 * h1[i]).norm() <= 1e-9 * h2[i].norm());
  CHECK(total_loss(two) == doctest::Approx(4.0 * total_loss(one)).epsilon(1e-9));

  const TimeGrid grid{50e-6, 8};
  const auto r1 = solve_reference(volume_mesh(), mat, SourceSpec::pulse(3e3, 20e-6), Mode::transient, grid);
  const auto r2 = solve_reference(volume_mesh(), mat, SourceSpec::pulse(6e3, 20e-6), Mode::transient, grid);
  for (int k = 1; k <= grid.steps; ++k) {
    const auto a = FieldProbe(r1, pts).h(k), b = FieldProbe(r2, pts).h(k);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK((b[i] - 2.0 * a[i]).norm() <= 1e-9 * b[i].norm());
  }
}

TEST_CASE("doubling sigma at a fixed field history doubles the loss") {
  const auto mat = MaterialModel::linear(1.0, 1e6);
  const auto src = SourceSpec::pulse(6e3, 20e-6);
  FieldSolution ref = solve_reference(volume_mesh(), mat, src, Mode::transient, {50e-6, 6});
  const auto same = recompute_loss(ref);
  REQUIRE(same.size() == ref.loss.size());
  for (std::size_t k = 0; k < same.size(); ++k) CHECK(same[k] == doctest::Approx(ref.loss[k]).epsilon(1e-12));
  ref.material.sigma *= 2.0;
  const auto doubled = recompute_loss(ref);
  for (std::size_t k = 1; k < same.size(); ++k) {
    CHECK(same[k] > 0.0);
    CHECK(doubled[k] == doctest::Approx(2.0 * same[k]).epsilon(1e-12));
  }
}

TEST_CASE("probes: continuity at a node, sheet traces, and domain checks") {
  const auto mat = MaterialModel::linear(1000.0, 1e7);
  const auto basis = basis_for(mat, 50.0, 3);
  const auto sol = solve_ts(ts_mesh(), basis, mat, SourceSpec::sinusoid(6e3, 50.0), Mode::transient, {5e-3, 10});

  // A probe on an air node equals its neighbours in the limit.
  const Mesh2D& mesh = *ts_mesh();
  int node = -1;
  for (int i = 0; i < mesh.num_nodes() && node < 0; ++i)
    if ((mesh.nodes[i] - Point(0.0, 0.05)).norm() < 0.02 && std::abs(mesh.nodes[i].x()) > 1e-9) node = i;
  REQUIRE(node >= 0);
  const Point p = mesh.nodes[node];
  const double eps = 1e-9;
  const auto h = FieldProbe(sol, {p, p + Point(eps, 0), p + Point(-eps, eps), p + Point(0, -eps)}).h(10);
  for (int i = 1; i < 4; ++i) CHECK((h[i] - h[0]).norm() <= 1e-6 * h[0].norm());

  // Depth probe at the + face of a segment midpoint equals the + side trace.
  for (std::size_t s : {std::size_t{10}, sol.ts->blocks.size() / 2}) {
    const auto& b = sol.ts->blocks[s];
    const Point mid = 0.5 * (mesh.nodes[b.plus[0]] + mesh.nodes[b.plus[1]]);
    const Eigen::VectorXd c = sol.segment_coefficients(static_cast<int>(s), 10);
    const double trace = slab1d::field_at(basis, c, 0.5 * d);
    const double trace_minus = slab1d::field_at(basis, c, -0.5 * d);
    const auto hx = probe_depth(sol, mid.x(), {0.5 * d, -0.5 * d}, Component::hx, 10);
    CHECK(hx.value[0].real() == doctest::Approx(trace * b.tangent.x()).epsilon(1e-9));
    CHECK(hx.value[1].real() == doctest::Approx(trace_minus * b.tangent.x()).epsilon(1e-9));
    // With the unit-trace property the face value is the c1 coefficient.
    CHECK(trace == doctest::Approx(c[hyperbasis::BasisSet::cos_index(0, hyperbasis::Side::plus, 3)]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(probe_point(sol, {5.0, 0.0}, Component::hx), InvalidArgument);
  CHECK_THROWS_AS(probe_line(sol, {0.0, 0.0}, {0.0, 0.1}, 1, Component::hx), InvalidArgument);
  CHECK(probe_point(sol, {0.0, 0.1}, Component::hy).value.size() == 11);
}

TEST_CASE("relative difference metric") {
  const std::vector<double> ref{1.0, -2.0, 3.0};
  CHECK(relative_difference(ref, ref) == 0.0);
  CHECK(relative_difference(std::vector<double>{1.5, -3.0, 4.5}, ref) == doctest::Approx(50.0));
  CHECK(relative_difference(std::vector<double>{2.0, -2.0, 3.0}, ref) == doctest::Approx(100.0 / std::sqrt(14.0)));
  CHECK_THROWS_AS(relative_difference(ref, std::vector<double>{0.0, 0.0, 0.0}), UndefinedMetric);
  CHECK_THROWS_AS(relative_difference(ref, std::vector<double>{1.0}), InvalidArgument);
  const std::vector<cplx> zr{{1.0, 1.0}, {0.0, -2.0}};
  const std::vector<cplx> zt{{1.0, 2.0}, {0.0, -2.0}};
  CHECK(relative_difference(zt, zr) == doctest::Approx(100.0 / std::sqrt(6.0)));
}

TEST_CASE("reference solver self-convergence") {
  GeometrySpec g;
  g.box_w = g.box_h = 1.2;
  const auto mat = MaterialModel::linear(1.0, 1e6);
  const auto src = SourceSpec::sinusoid(6e3, 50.0);
  std::vector<std::array<std::vector<cplx>, 2>> lines;
  for (double h : {0.02, 0.01, 0.005}) {
    const auto mesh = std::make_shared<const Mesh2D>(mesh2d::generate_mesh(g, h / 4, h));
    const auto sol = solve_reference(mesh, mat, src, Mode::harmonic);
    lines.push_back({probe_line(sol, {-0.5, 0.1}, {0.5, 0.1}, 201, Component::magnitude).value,
                     probe_line(sol, {0.0, -0.2}, {0.0, 0.2}, 201, Component::magnitude).value});
  }
  for (int l = 0; l < 2; ++l) {
    const double coarse = relative_difference(lines[0][l], lines[2][l]);
    const double fine = relative_difference(lines[1][l], lines[2][l]);
    CHECK(fine <= 0.5 * coarse);
  }
}

TEST_CASE("nonlinear transient converges on both models") {
  const auto mat = MaterialModel::saturable(12500.0, 1.31, 1e7);
  const auto src = SourceSpec::sinusoid(6e3, 50.0);
  const TimeGrid grid{5e-3, 5};
  const auto ts =
      solve_ts(ts_mesh(), basis_for(MaterialModel::linear(1000.0, 1e7), 50.0, 1), mat, src, Mode::transient, grid);
  CHECK(ts.all_converged());
  CHECK(ts.max_newton_iterations() >= 1);
  CHECK(total_loss(ts) > 0.0);
  CHECK(std::abs(circulation(ts, loop_plus, 3) / src.current(grid.time(3)) - 1.0) < 5e-3);
  CHECK_THROWS_AS(solve_ts(ts_mesh(), basis_for(mat, 50.0, 1), mat, src, Mode::harmonic), InvalidArgument);
}
