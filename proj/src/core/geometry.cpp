#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "core/csv.hpp"
#include "core/delaunay.hpp"
#include "core/error.hpp"

namespace pmspde::geometry {

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

Point circumcenter(Point a, Point b, Point c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  return {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
}

// Greedy merge: a point closer than `cutoff` to an already kept point is
// dropped. Grid buckets of side `cutoff` keep this linear.
std::vector<Point> merge_points(std::span<const Point> points, double cutoff) {
  std::vector<Point> kept;
  if (cutoff <= 0.0) {
    // Exact duplicates are still removed.
    for (const Point& p : points) {
      bool dup = false;
      for (const Point& q : kept) dup = dup || (q.x == p.x && q.y == p.y);
      if (!dup) kept.push_back(p);
    }
    return kept;
  }
  struct KeyHash {
    size_t operator()(const std::pair<long long, long long>& k) const {
      return std::hash<long long>()(k.first * 1000003LL ^ k.second);
    }
  };
  std::unordered_map<std::pair<long long, long long>, std::vector<int>, KeyHash> buckets;
  for (const Point& p : points) {
    const long long ix = static_cast<long long>(std::floor(p.x / cutoff));
    const long long iy = static_cast<long long>(std::floor(p.y / cutoff));
    bool close = false;
    for (long long dx = -1; dx <= 1 && !close; ++dx) {
      for (long long dy = -1; dy <= 1 && !close; ++dy) {
        auto it = buckets.find({ix + dx, iy + dy});
        if (it == buckets.end()) continue;
        for (int k : it->second) {
          if (dist(kept[k], p) < cutoff) {
            close = true;
            break;
          }
        }
      }
    }
    if (!close) {
      buckets[{ix, iy}].push_back(static_cast<int>(kept.size()));
      kept.push_back(p);
    }
  }
  return kept;
}

// Appends points of segment (a, b) excluding b, split into pieces no longer
// than `max_len`. Interior points are pushed outward by a parabola of height
// `bulge` so that the boundary stays strictly convex.
void append_bulged_segment(std::vector<Point>& out, Point a, Point b, double max_len, double bulge) {
  const double len = dist(a, b);
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / max_len)));
  // Outward normal of a counter-clockwise boundary is to the right.
  const double nx = (b.y - a.y) / len;
  const double ny = -(b.x - a.x) / len;
  out.push_back(a);
  for (int k = 1; k < pieces; ++k) {
    const double s = static_cast<double>(k) / pieces;
    const double push = bulge * 4.0 * s * (1.0 - s);
    out.push_back({a.x + s * (b.x - a.x) + push * nx, a.y + s * (b.y - a.y) + push * ny});
  }
}

// Exterior angle at each vertex of a counter-clockwise convex polygon.
std::vector<double> turn_angles(const std::vector<Point>& poly) {
  const size_t n = poly.size();
  std::vector<double> turn(n);
  for (size_t i = 0; i < n; ++i) {
    const Point prev = poly[(i + n - 1) % n], cur = poly[i], next = poly[(i + 1) % n];
    const double a0 = std::atan2(cur.y - prev.y, cur.x - prev.x);
    double t = std::atan2(next.y - cur.y, next.x - cur.x) - a0;
    while (t < 0.0) t += 2.0 * std::numbers::pi;
    while (t >= 2.0 * std::numbers::pi) t -= 2.0 * std::numbers::pi;
    turn[i] = t;
  }
  return turn;
}

std::vector<Point> outer_boundary(const std::vector<Point>& hull, double extension,
                                  double max_len) {
  const size_t n = hull.size();
  std::vector<Point> corners;
  if (extension <= 0.0) {
    corners = hull;
  } else {
    for (size_t i = 0; i < n; ++i) {
      const Point prev = hull[(i + n - 1) % n];
      const Point cur = hull[i];
      const Point next = hull[(i + 1) % n];
      const double a0 = std::atan2(-(cur.x - prev.x), cur.y - prev.y);
      double a1 = std::atan2(-(next.x - cur.x), next.y - cur.y);
      while (a1 < a0) a1 += 2.0 * std::numbers::pi;
      const double turn = a1 - a0;
      // Circumscribed arc: every edge is tangent to the circle of radius
      // `extension`, so consecutive arcs join along the offset hull edges.
      const int m = std::max(1, static_cast<int>(std::ceil(turn / (std::numbers::pi / 8.0))));
      const double step = turn / m;
      const double r = extension / std::cos(0.5 * step);
      for (int k = 0; k < m; ++k) {
        const double ang = a0 + (k + 0.5) * step;
        corners.push_back({cur.x + r * std::cos(ang), cur.y + r * std::sin(ang)});
      }
    }
  }
  // The end slope of a bulge of height h over length L is 4h/L; keeping it
  // below a quarter of the corner turn on both sides preserves convexity.
  const std::vector<double> turn = turn_angles(corners);
  std::vector<Point> boundary;
  const size_t m = corners.size();
  for (size_t i = 0; i < m; ++i) {
    const Point a = corners[i], b = corners[(i + 1) % m];
    const double limit = std::min(turn[i], turn[(i + 1) % m]) / 16.0;
    append_bulged_segment(boundary, a, b, max_len, dist(a, b) * std::min(0.0025, limit));
  }
  return boundary;
}

}  // namespace

double TriangularMesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  return 0.5 * cross(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

double TriangularMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < num_triangles(); ++t) a += triangle_area(t);
  return a;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Point a, Point b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && orient2d(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && orient2d(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool point_in_convex_polygon(std::span<const Point> polygon, Point p) {
  const size_t n = polygon.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    if (orient2d(polygon[i], polygon[(i + 1) % n], p) < 0) return false;
  }
  return true;
}

TriangularMesh build_mesh(std::span<const Point> points, const MeshOptions& opt) {
  if (points.empty()) throw invalid_argument("build_mesh: no points");
  if (!(opt.inner_max_edge > 0.0) || !(opt.outer_max_edge >= opt.inner_max_edge)) {
    throw invalid_argument("build_mesh: require 0 < inner_max_edge <= outer_max_edge");
  }
  if (opt.cutoff < 0.0 || opt.extension < 0.0) {
    throw invalid_argument("build_mesh: cutoff and extension must be non-negative");
  }
  for (const Point& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw invalid_argument("build_mesh: non-finite coordinate");
    }
  }

  const std::vector<Point> seeds = merge_points(points, opt.cutoff);
  const std::vector<Point> hull = convex_hull(seeds);
  if (hull.size() < 3) {
    throw invalid_argument("build_mesh: degenerate input, points are collinear");
  }
  const double boundary_edge = opt.extension > 0.0 ? opt.outer_max_edge : opt.inner_max_edge;
  const std::vector<Point> boundary = outer_boundary(hull, opt.extension, boundary_edge);

  Point lo{boundary[0].x, boundary[0].y}, hi = lo;
  for (const Point& p : boundary) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const double scale = std::max(hi.x - lo.x, hi.y - lo.y);
  Delaunay dt(lo, hi);
  for (const Point& p : boundary) dt.insert(p);
  for (const Point& p : seeds) dt.insert(p);

  const double min_spacing = 1e-9 * scale;
  auto bad_point = [&](const Delaunay::Face& f, Point& where) -> bool {
    const Point a = dt.vertices()[f.v[0]];
    const Point b = dt.vertices()[f.v[1]];
    const Point c = dt.vertices()[f.v[2]];
    const Point centroid{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
    const double limit =
        point_in_convex_polygon(hull, centroid) ? opt.inner_max_edge : opt.outer_max_edge;
    const double e[3] = {dist(b, c), dist(c, a), dist(a, b)};
    const int longest = static_cast<int>(std::max_element(e, e + 3) - e);
    if (e[longest] <= limit) return false;
    const Point cc = circumcenter(a, b, c);
    if (std::isfinite(cc.x) && std::isfinite(cc.y) && point_in_convex_polygon(boundary, cc)) {
      where = cc;
      return true;
    }
    // Longest edge on the outer boundary: nothing to split without leaving
    // the domain.
    const int nb = f.n[longest];
    if (nb < 0 || dt.touches_super(dt.faces()[nb])) return false;
    const Point p = dt.vertices()[f.v[(longest + 1) % 3]];
    const Point q = dt.vertices()[f.v[(longest + 2) % 3]];
    where = {0.5 * (p.x + q.x), 0.5 * (p.y + q.y)};
    return true;
  };

  bool inserted = true;
  while (inserted) {
    inserted = false;
    struct Candidate {
      Point where;
      std::array<int, 3> origin;
      Point centroid;
    };
    std::vector<Candidate> pending;
    for (const auto& f : dt.faces()) {
      if (!f.alive || dt.touches_super(f)) continue;
      Point where;
      if (!bad_point(f, where)) continue;
      std::array<int, 3> origin = f.v;
      std::sort(origin.begin(), origin.end());
      const Point a = dt.vertices()[f.v[0]], b = dt.vertices()[f.v[1]], c = dt.vertices()[f.v[2]];
      pending.push_back({where, origin, {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0}});
    }
    for (const Candidate& cand : pending) {
      // Skip candidates whose triangle an earlier insertion in this pass
      // already replaced.
      std::array<int, 3> now = dt.faces()[dt.locate(cand.centroid)].v;
      std::sort(now.begin(), now.end());
      if (now != cand.origin) continue;
      const Point p = cand.where;
      const auto& f = dt.faces()[dt.locate(p)];
      bool near = false;
      for (int v : f.v) near = near || dist(dt.vertices()[v], p) < min_spacing;
      if (near) continue;
      const size_t before = dt.vertices().size();
      dt.insert(p);
      if (dt.vertices().size() > before) inserted = true;
      if (static_cast<int>(dt.vertices().size()) > opt.max_vertices) {
        throw invalid_argument("build_mesh: vertex limit exceeded; increase max edge lengths");
      }
    }
  }

  TriangularMesh mesh;
  std::vector<int> remap(dt.vertices().size(), -1);
  for (const auto& f : dt.faces()) {
    if (!f.alive || dt.touches_super(f)) continue;
    Triangle tri;
    for (int k = 0; k < 3; ++k) {
      int& r = remap[f.v[k]];
      if (r < 0) {
        r = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(dt.vertices()[f.v[k]]);
      }
      tri[k] = r;
    }
    mesh.triangles.push_back(tri);
  }
  mesh.inner_boundary = hull;
  mesh.outer_extension_width = opt.extension;

  // The triangulation must tile the convex outer boundary.
  double boundary_area = 0.0;
  for (size_t i = 0; i < boundary.size(); ++i) {
    const Point a = boundary[i], b = boundary[(i + 1) % boundary.size()];
    boundary_area += 0.5 * (a.x * b.y - b.x * a.y);
  }
  if (std::abs(mesh.total_area() - boundary_area) > 1e-9 * boundary_area) {
    throw Error(ErrorKind::internal, "build_mesh: triangulation does not cover the domain (area " +
                                         std::to_string(mesh.total_area()) + " of " +
                                         std::to_string(boundary_area) + ")");
  }
  validate_mesh(mesh);
  return mesh;
}

TriangularMesh regular_mesh(Point origin, double h, int nx, int ny) {
  if (!(h > 0.0) || nx < 1 || ny < 1) throw invalid_argument("regular_mesh: bad dimensions");
  TriangularMesh mesh;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) mesh.vertices.push_back({origin.x + i * h, origin.y + j * h});
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      mesh.triangles.push_back({a, b, c});
      mesh.triangles.push_back({a, c, d});
    }
  }
  mesh.inner_boundary = {mesh.vertices[id(0, 0)], mesh.vertices[id(nx, 0)],
                         mesh.vertices[id(nx, ny)], mesh.vertices[id(0, ny)]};
  return mesh;
}

void validate_mesh(const TriangularMesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<char> used(n, 0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles[t]) {
      if (v < 0 || v >= n) {
        throw invalid_argument("mesh: triangle " + std::to_string(t) + " has an invalid vertex index");
      }
      used[v] = 1;
    }
    if (!(mesh.triangle_area(t) > 0.0)) {
      throw invalid_argument("mesh: triangle " + std::to_string(t) +
                             " has non-positive area");
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!used[v]) throw invalid_argument("mesh: vertex " + std::to_string(v) + " is unused");
  }
}

FemMatrices fem_matrices(const TriangularMesh& mesh) {
  const int n = mesh.num_vertices();
  std::vector<Triplet> c_trip, g_trip;
  c_trip.reserve(3 * mesh.triangles.size());
  g_trip.reserve(9 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point p[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
    const double area = 0.5 * cross(p[0], p[1], p[2]);
    const double e2 = std::max({dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])});
    if (!(area > 1e-14 * e2 * e2)) {
      throw numerical_error("fem_matrices: triangle " + std::to_string(t) + " has zero area");
    }
    // Edge opposite vertex k.
    double ex[3], ey[3];
    for (int k = 0; k < 3; ++k) {
      const Point a = p[(k + 1) % 3], b = p[(k + 2) % 3];
      ex[k] = b.x - a.x;
      ey[k] = b.y - a.y;
    }
    for (int i = 0; i < 3; ++i) {
      c_trip.emplace_back(tri[i], tri[i], area / 3.0);
      for (int j = 0; j < 3; ++j) {
        g_trip.emplace_back(tri[i], tri[j], (ex[i] * ex[j] + ey[i] * ey[j]) / (4.0 * area));
      }
    }
  }
  FemMatrices fem;
  fem.C.resize(n, n);
  fem.G.resize(n, n);
  fem.C.setFromTriplets(c_trip.begin(), c_trip.end());
  fem.G.setFromTriplets(g_trip.begin(), g_trip.end());
  fem.C.makeCompressed();
  fem.G.makeCompressed();
  return fem;
}

PointLocator::PointLocator(const TriangularMesh& mesh) : mesh_(mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty()) {
    start_.assign(2, 0);
    return;
  }
  double x1 = mesh.vertices[0].x, y1 = mesh.vertices[0].y;
  x0_ = x1;
  y0_ = y1;
  for (const Point& p : mesh.vertices) {
    x0_ = std::min(x0_, p.x);
    y0_ = std::min(y0_, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  const double w = std::max(x1 - x0_, 1e-12), h = std::max(y1 - y0_, 1e-12);
  cell_ = std::sqrt(w * h / std::max<size_t>(1, mesh.triangles.size())) * 1.5;
  nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
  std::vector<std::vector<int>> cells(static_cast<size_t>(nx_) * ny_);
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double tx0 = 1e300, ty0 = 1e300, tx1 = -1e300, ty1 = -1e300;
    for (int v : mesh.triangles[t]) {
      tx0 = std::min(tx0, mesh.vertices[v].x);
      ty0 = std::min(ty0, mesh.vertices[v].y);
      tx1 = std::max(tx1, mesh.vertices[v].x);
      ty1 = std::max(ty1, mesh.vertices[v].y);
    }
    const int i0 = clampi(static_cast<int>(std::floor((tx0 - x0_) / cell_)), nx_);
    const int i1 = clampi(static_cast<int>(std::floor((tx1 - x0_) / cell_)), nx_);
    const int j0 = clampi(static_cast<int>(std::floor((ty0 - y0_) / cell_)), ny_);
    const int j1 = clampi(static_cast<int>(std::floor((ty1 - y0_) / cell_)), ny_);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) cells[static_cast<size_t>(j) * nx_ + i].push_back(t);
    }
  }
  start_.assign(cells.size() + 1, 0);
  for (size_t k = 0; k < cells.size(); ++k) start_[k + 1] = start_[k] + static_cast<int>(cells[k].size());
  items_.reserve(start_.back());
  for (const auto& c : cells) items_.insert(items_.end(), c.begin(), c.end());
}

int PointLocator::locate(Point p, std::array<double, 3>& weights) const {
  if (items_.empty()) return -1;
  const double fi = std::floor((p.x - x0_) / cell_);
  const double fj = std::floor((p.y - y0_) / cell_);
  // Points on the far bounding-box edge belong to the last cell.
  const int i = (fi == nx_ && p.x - x0_ <= nx_ * cell_) ? nx_ - 1 : static_cast<int>(fi);
  const int j = (fj == ny_ && p.y - y0_ <= ny_ * cell_) ? ny_ - 1 : static_cast<int>(fj);
  if (!(fi >= 0) || !(fj >= 0) || i >= nx_ || j >= ny_) return -1;
  const size_t cell = static_cast<size_t>(j) * nx_ + i;
  constexpr double tol = 1e-12;
  for (int k = start_[cell]; k < start_[cell + 1]; ++k) {
    const int t = items_[k];
    const auto& tri = mesh_.triangles[t];
    const Point a = mesh_.vertices[tri[0]], b = mesh_.vertices[tri[1]], c = mesh_.vertices[tri[2]];
    const double total = cross(a, b, c);
    double w[3] = {cross(p, b, c) / total, cross(p, c, a) / total, cross(p, a, b) / total};
    if (w[0] < -tol || w[1] < -tol || w[2] < -tol) continue;
    double sum = 0.0;
    for (double& x : w) {
      x = std::max(x, 0.0);
      sum += x;
    }
    for (int m = 0; m < 3; ++m) weights[m] = (sum == 1.0) ? w[m] : w[m] / sum;
    return t;
  }
  return -1;
}

ProjectorMatrix projector(const TriangularMesh& mesh, std::span<const Point> locations) {
  PointLocator locator(mesh);
  std::vector<Triplet> trip;
  trip.reserve(3 * locations.size());
  ProjectorMatrix out;
  out.outside.assign(locations.size(), false);
  for (size_t r = 0; r < locations.size(); ++r) {
    std::array<double, 3> w{};
    const int t = locator.locate(locations[r], w);
    if (t < 0) {
      out.outside[r] = true;
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      if (w[k] != 0.0) trip.emplace_back(static_cast<int>(r), mesh.triangles[t][k], w[k]);
    }
  }
  out.A.resize(static_cast<int>(locations.size()), mesh.num_vertices());
  out.A.setFromTriplets(trip.begin(), trip.end());
  out.A.makeCompressed();
  return out;
}

void save_mesh(const TriangularMesh& mesh, const std::filesystem::path& vertices_csv,
               const std::filesystem::path& triangles_csv) {
  csv::Writer v(vertices_csv);
  v.header({"id", "x", "y"});
  for (int i = 0; i < mesh.num_vertices(); ++i) v.row(i, mesh.vertices[i].x, mesh.vertices[i].y);
  v.close();
  csv::Writer t(triangles_csv);
  t.header({"v1", "v2", "v3"});
  for (const auto& tri : mesh.triangles) t.row(tri[0], tri[1], tri[2]);
  t.close();
}

TriangularMesh load_mesh(const std::filesystem::path& vertices_csv,
                         const std::filesystem::path& triangles_csv) {
  const auto vt = csv::Table::read(vertices_csv);
  const auto tt = csv::Table::read(triangles_csv);
  const int cid = vt.require("id"), cx = vt.require("x"), cy = vt.require("y");
  TriangularMesh mesh;
  mesh.vertices.resize(vt.num_rows());
  std::vector<char> seen(vt.num_rows(), 0);
  for (size_t r = 0; r < vt.num_rows(); ++r) {
    const long long id = vt.integer(r, cid);
    if (id < 0 || id >= static_cast<long long>(vt.num_rows()) || seen[id]) {
      throw schema_error(vt.source() + ": line " + std::to_string(vt.line_of(r)) +
                         ": vertex ids must be a permutation of 0..n-1");
    }
    seen[id] = 1;
    mesh.vertices[id] = {vt.number(r, cx), vt.number(r, cy)};
  }
  const int c1 = tt.require("v1"), c2 = tt.require("v2"), c3 = tt.require("v3");
  for (size_t r = 0; r < tt.num_rows(); ++r) {
    Triangle tri{static_cast<int>(tt.integer(r, c1)), static_cast<int>(tt.integer(r, c2)),
                 static_cast<int>(tt.integer(r, c3))};
    for (int v : tri) {
      if (v < 0 || v >= mesh.num_vertices()) {
        throw schema_error(tt.source() + ": line " + std::to_string(tt.line_of(r)) +
                           ": vertex index out of range");
      }
    }
    mesh.triangles.push_back(tri);
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace pmspde::geometry
