#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "core/sparse_cholesky.hpp"

namespace pmspde::geometry {

// Planar coordinates in km.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Triangle = std::array<int, 3>;

struct TriangularMesh {
  std::vector<Point> vertices;
  std::vector<Triangle> triangles;  // counter-clockwise
  std::vector<Point> inner_boundary;  // empty when the mesh was imported
  double outer_extension_width = 0.0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double triangle_area(int t) const;
  double total_area() const;
};

struct MeshOptions {
  double inner_max_edge = 0.0;
  double outer_max_edge = 0.0;
  double cutoff = 0.0;
  double extension = 0.0;
  int max_vertices = 2'000'000;
};

// Delaunay refinement seeded by the (cutoff-merged) points. The inner region
// is the convex hull of the seeds; the outer band is its offset by
// `extension`.
TriangularMesh build_mesh(std::span<const Point> points, const MeshOptions& options);

// Structured mesh over [x0, x0 + nx*h] x [y0, y0 + ny*h], each square split
// along its rising diagonal. The longest edge is h*sqrt(2).
TriangularMesh regular_mesh(Point origin, double h, int nx, int ny);

// Checks positive orientation, vertex usage and index bounds; throws on the
// first violation.
void validate_mesh(const TriangularMesh& mesh);

struct FemMatrices {
  SparseMatrix C;  // lumped mass, diagonal
  SparseMatrix G;  // stiffness
};

FemMatrices fem_matrices(const TriangularMesh& mesh);

struct ProjectorMatrix {
  SparseMatrix A;               // rows: locations, cols: vertices
  std::vector<bool> outside;    // true where the row is all zero
};

// Bucketed triangle lookup for repeated point location.
class PointLocator {
 public:
  explicit PointLocator(const TriangularMesh& mesh);
  // Index of a triangle containing p and its barycentric weights, or -1.
  int locate(Point p, std::array<double, 3>& weights) const;

 private:
  const TriangularMesh& mesh_;
  double x0_ = 0, y0_ = 0, cell_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<int> start_;
  std::vector<int> items_;
};

ProjectorMatrix projector(const TriangularMesh& mesh, std::span<const Point> locations);

void save_mesh(const TriangularMesh& mesh, const std::filesystem::path& vertices_csv,
               const std::filesystem::path& triangles_csv);
TriangularMesh load_mesh(const std::filesystem::path& vertices_csv,
                         const std::filesystem::path& triangles_csv);

// Convex hull, counter-clockwise, without collinear points.
std::vector<Point> convex_hull(std::vector<Point> points);
bool point_in_convex_polygon(std::span<const Point> polygon, Point p);

}  // namespace pmspde::geometry
