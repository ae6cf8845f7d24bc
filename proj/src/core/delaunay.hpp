#pragma once

#include <array>
#include <vector>

#include "core/geometry.hpp"

namespace pmspde::geometry {

// Adaptive-precision predicates: a floating-point filter with an exact
// rational fallback when the filter cannot certify the sign.
int orient2d(Point a, Point b, Point c);                 // +1 ccw, 0, -1 cw
int incircle(Point a, Point b, Point c, Point d);        // +1 if d inside ccw (a,b,c)

// Incremental Bowyer-Watson triangulation inside a large enclosing triangle.
// The first three vertices are the enclosing triangle's corners.
class Delaunay {
 public:
  struct Face {
    std::array<int, 3> v{};
    std::array<int, 3> n{-1, -1, -1};  // n[i] is across the edge opposite v[i]
    bool alive = false;
  };

  Delaunay(Point lower, Point upper);

  // Returns the vertex index; an exact duplicate returns the existing index.
  int insert(Point p);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  bool is_super_vertex(int v) const { return v < 3; }
  bool touches_super(const Face& f) const {
    return is_super_vertex(f.v[0]) || is_super_vertex(f.v[1]) || is_super_vertex(f.v[2]);
  }
  // Face containing p (walk from the last inserted face).
  int locate(Point p) const;

 private:
  int new_face();

  std::vector<Point> vertices_;
  std::vector<Face> faces_;
  std::vector<int> free_;
  mutable int last_ = 0;
};

}  // namespace pmspde::geometry
