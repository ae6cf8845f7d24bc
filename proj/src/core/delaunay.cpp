#include "core/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <boost/multiprecision/cpp_int.hpp>

#include "core/error.hpp"

namespace pmspde::geometry {

namespace {

using Rational = boost::multiprecision::cpp_rational;

int sign_of(const Rational& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

int orient_exact(Point a, Point b, Point c) {
  const Rational acx = Rational(a.x) - Rational(c.x);
  const Rational bcx = Rational(b.x) - Rational(c.x);
  const Rational acy = Rational(a.y) - Rational(c.y);
  const Rational bcy = Rational(b.y) - Rational(c.y);
  return sign_of(acx * bcy - acy * bcx);
}

int incircle_exact(Point a, Point b, Point c, Point d) {
  const Rational adx = Rational(a.x) - Rational(d.x), ady = Rational(a.y) - Rational(d.y);
  const Rational bdx = Rational(b.x) - Rational(d.x), bdy = Rational(b.y) - Rational(d.y);
  const Rational cdx = Rational(c.x) - Rational(d.x), cdy = Rational(c.y) - Rational(d.y);
  const Rational alift = adx * adx + ady * ady;
  const Rational blift = bdx * bdx + bdy * bdy;
  const Rational clift = cdx * cdx + cdy * cdy;
  const Rational det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                       clift * (adx * bdy - bdx * ady);
  return sign_of(det);
}

}  // namespace

int orient2d(Point a, Point b, Point c) {
  const double detleft = (a.x - c.x) * (b.y - c.y);
  const double detright = (a.y - c.y) * (b.x - c.x);
  const double det = detleft - detright;
  const double bound = 3.3306690738754716e-16 * (std::abs(detleft) + std::abs(detright));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient_exact(a, b, c);
}

int incircle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det =
      alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = 1.1102230246251577e-15 * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return incircle_exact(a, b, c, d);
}

Delaunay::Delaunay(Point lower, Point upper) {
  const double cx = 0.5 * (lower.x + upper.x);
  const double cy = 0.5 * (lower.y + upper.y);
  const double span = std::max({upper.x - lower.x, upper.y - lower.y, 1.0});
  const double r = 1.0e4 * span;
  vertices_.push_back({cx - 2.0 * r, cy - r});
  vertices_.push_back({cx + 2.0 * r, cy - r});
  vertices_.push_back({cx, cy + 2.0 * r});
  const int f = new_face();
  faces_[f].v = {0, 1, 2};
}

int Delaunay::new_face() {
  int f;
  if (!free_.empty()) {
    f = free_.back();
    free_.pop_back();
    faces_[f] = Face{};
  } else {
    f = static_cast<int>(faces_.size());
    faces_.emplace_back();
  }
  faces_[f].alive = true;
  return f;
}

int Delaunay::locate(Point p) const {
  int t = last_;
  if (t < 0 || t >= static_cast<int>(faces_.size()) || !faces_[t].alive) {
    t = 0;
    while (!faces_[t].alive) ++t;
  }
  const size_t max_steps = 4 * faces_.size() + 16;
  for (size_t step = 0; step < max_steps; ++step) {
    const Face& f = faces_[t];
    int next = -1;
    for (int i = 0; i < 3; ++i) {
      const Point a = vertices_[f.v[(i + 1) % 3]];
      const Point b = vertices_[f.v[(i + 2) % 3]];
      if (orient2d(a, b, p) < 0) {
        next = f.n[i];
        break;
      }
    }
    if (next < 0) {
      last_ = t;
      return t;
    }
    t = next;
  }
  // Walk did not settle; fall back to a scan.
  for (int s = 0; s < static_cast<int>(faces_.size()); ++s) {
    const Face& f = faces_[s];
    if (!f.alive) continue;
    bool inside = true;
    for (int i = 0; i < 3 && inside; ++i) {
      inside = orient2d(vertices_[f.v[(i + 1) % 3]], vertices_[f.v[(i + 2) % 3]], p) >= 0;
    }
    if (inside) {
      last_ = s;
      return s;
    }
  }
  throw Error(ErrorKind::internal, "delaunay: point location failed");
}

int Delaunay::insert(Point p) {
  const int start = locate(p);
  for (int v : faces_[start].v) {
    if (vertices_[v].x == p.x && vertices_[v].y == p.y) return v;
  }
  const int pv = static_cast<int>(vertices_.size());
  vertices_.push_back(p);

  std::vector<int> cavity{start};
  std::vector<char> in_cavity(faces_.size(), 0);
  in_cavity[start] = 1;
  for (size_t k = 0; k < cavity.size(); ++k) {
    const Face f = faces_[cavity[k]];
    for (int nb : f.n) {
      if (nb < 0 || in_cavity[nb]) continue;
      const Face& g = faces_[nb];
      if (incircle(vertices_[g.v[0]], vertices_[g.v[1]], vertices_[g.v[2]], p) > 0) {
        in_cavity[nb] = 1;
        cavity.push_back(nb);
      }
    }
  }

  struct BoundaryEdge {
    int a, b, outside;
  };
  std::vector<BoundaryEdge> boundary;
  for (int t : cavity) {
    const Face& f = faces_[t];
    for (int i = 0; i < 3; ++i) {
      const int nb = f.n[i];
      if (nb >= 0 && in_cavity[nb]) continue;
      boundary.push_back({f.v[(i + 1) % 3], f.v[(i + 2) % 3], nb});
    }
  }
  for (int t : cavity) {
    faces_[t].alive = false;
    free_.push_back(t);
  }

  std::unordered_map<int, int> by_first;   // a -> face (a, b, p)
  std::unordered_map<int, int> by_second;  // b -> face (a, b, p)
  std::vector<int> created;
  created.reserve(boundary.size());
  for (const auto& e : boundary) {
    if (orient2d(vertices_[e.a], vertices_[e.b], p) <= 0) {
      throw Error(ErrorKind::internal, "delaunay: cavity is not star-shaped");
    }
    const int f = new_face();
    faces_[f].v = {e.a, e.b, pv};
    faces_[f].n[2] = e.outside;
    if (e.outside >= 0) {
      Face& g = faces_[e.outside];
      for (int k = 0; k < 3; ++k) {
        if (g.v[k] != e.a && g.v[k] != e.b) {
          g.n[k] = f;
          break;
        }
      }
    }
    by_first[e.a] = f;
    by_second[e.b] = f;
    created.push_back(f);
  }
  for (int f : created) {
    Face& face = faces_[f];
    face.n[0] = by_first.at(face.v[1]);   // edge (b, p)
    face.n[1] = by_second.at(face.v[0]);  // edge (p, a)
  }
  last_ = created.front();
  return pv;
}

}  // namespace pmspde::geometry
