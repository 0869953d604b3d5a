#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace thinshell::mesh2d {

using Point = Eigen::Vector2d;

enum class Region : int { air = 0, shield = 1, wire_plus = 2, wire_minus = 3 };
enum class EdgeTag : int { outer = 0, crack_plus = 1, crack_minus = 2 };
enum class MeshKind : int { plain = 0, ts = 1, volume = 2 };

std::string to_string(Region r);
std::string to_string(EdgeTag t);
std::string to_string(MeshKind k);

/// Planar shield over a pair of wires. The origin is the shield centre, the
/// wires sit below it, wire_plus on the x < 0 side.
struct GeometrySpec {
  double l = 1.0;   ///< shield width, m
  double d = 1e-3;  ///< shield thickness, m
  double wire_w = 0.02;
  double wire_h = 0.02;
  double l1 = 0.30;  ///< wire centre separation, m
  double l2 = 0.10;  ///< gap from the shield mid-plane to the wire tops, m
  double box_w = 4.0;
  double box_h = 4.0;
  bool resolve_shield_volume = true;
  bool has_shield = true;

  void validate() const;
  /// Lower-left and upper-right corners of a wire cross-section.
  std::array<Point, 2> wire_box(Region wire) const;
  double wire_area() const { return wire_w * wire_h; }
  /// Same geometry with the air box shrunk by `factor` (clamped to keep the shield inside).
  GeometrySpec scaled(double factor) const;
};

struct Triangle {
  std::array<int, 3> v;
  Region region = Region::air;
};

struct BoundaryEdge {
  std::array<int, 2> v;
  EdgeTag tag = EdgeTag::outer;
};

struct CrackPair {
  int plus = -1;
  int minus = -1;
};

struct Mesh2D {
  MeshKind kind = MeshKind::plain;
  std::vector<Point> nodes;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> edges;
  std::vector<CrackPair> crack_pairs;          ///< in polyline order from crack_endpoints[0]
  std::array<int, 2> crack_endpoints{-1, -1};  ///< shared tip nodes
  std::vector<std::vector<int>> cut_paths;     ///< node chains; [0] for wire_plus, [1] for wire_minus

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  bool has_crack() const { return crack_endpoints[0] >= 0; }
  /// Full chain of one crack side including the shared endpoints.
  std::vector<int> crack_chain(bool plus_side) const;
  double signed_area(int t) const;
};

/// Balanced quadtree triangulation of the air box with the shield and wires
/// as embedded features. With resolve_shield_volume the shield rectangle is
/// filled with `through_thickness_layers` structured layers, otherwise the
/// shield mid-line becomes a crack.
Mesh2D generate_mesh(const GeometrySpec& geom, double shield_surface_h, double outer_h,
                     int through_thickness_layers = 12);

/// Duplicates the interior nodes of an edge-aligned polyline. Triangles on
/// the left of the travel direction keep the original node (the + side).
Mesh2D insert_crack(const Mesh2D& mesh, const std::vector<int>& polyline);

/// Shortest edge chains from the bottom midpoint of each wire to the outer
/// boundary that avoid the crack, the wires and each other.
std::vector<std::vector<int>> build_cut_paths(const Mesh2D& mesh, const GeometrySpec& geom);

struct QualityReport {
  std::vector<double> q;  ///< 2 r / R per triangle, 0 for degenerate ones
  double minimum = 0.0;
  double mean = 0.0;
};

double triangle_quality(const Point& a, const Point& b, const Point& c);
QualityReport mesh_quality(const Mesh2D& mesh);

/// V - E + F over the triangulated region.
int euler_characteristic(const Mesh2D& mesh);

/// Throws TopologyError on orientation, crack, or cut-path violations.
void validate_mesh(const Mesh2D& mesh);

/// Boundary edges recomputed from the triangles: box sides are outer, the rest crack sides.
std::vector<BoundaryEdge> boundary_edges(const Mesh2D& mesh);

void write_mesh(std::ostream& out, const Mesh2D& mesh);
Mesh2D read_mesh(std::istream& in);
void write_mesh(const std::string& path, const Mesh2D& mesh);
Mesh2D read_mesh(const std::string& path);

/// Bucket grid for point location.
class PointLocator {
 public:
  explicit PointLocator(const Mesh2D& mesh);
  /// Triangle containing p (ties resolved to the lowest index, or to `prefer`
  /// when one of the candidates carries that region); -1 when outside.
  int locate(const Point& p, int prefer = -1) const;
  /// Barycentric coordinates of p in triangle t.
  Eigen::Vector3d barycentric(int t, const Point& p) const;

 private:
  const Mesh2D* mesh_;
  Point lo_, hi_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace thinshell::mesh2d
