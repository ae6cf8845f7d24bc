#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <Eigen/Dense>

#include "core/error.hpp"
#include "core/geometry.hpp"

using namespace pmspde;
using namespace pmspde::geometry;

namespace {

TriangularMesh unit_triangle() {
  TriangularMesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  return m;
}

Eigen::MatrixXd dense(const SparseMatrix& s) { return Eigen::MatrixXd(s); }

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("unit right triangle has lumped mass area/3") {
    const auto fem = fem_matrices(unit_triangle());
    const Eigen::MatrixXd C = dense(fem.C);
    for (int i = 0; i < 3; ++i) {
      CHECK(C(i, i) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
      for (int j = 0; j < 3; ++j) {
        if (i != j) CHECK(C(i, j) == 0.0);
      }
    }
  }

  TEST_CASE("unit right triangle stiffness") {
    const Eigen::MatrixXd G = dense(fem_matrices(unit_triangle()).G);
    Eigen::Matrix3d expected;
    expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
    CHECK((G - expected).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("zero area triangle is reported by index") {
    TriangularMesh m;
    m.vertices = {{0, 0}, {1, 0}, {2, 0}, {0, 1}};
    m.triangles = {{0, 1, 3}, {0, 1, 2}};
    try {
      fem_matrices(m);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::numerical);
      CHECK(std::string(e.what()).find("triangle 1") != std::string::npos);
    }
  }

  TEST_CASE("FEM invariants on a built mesh") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<Point> pts;
    for (int i = 0; i < 60; ++i) pts.push_back({u(rng), u(rng)});
    const auto mesh = build_mesh(pts, {10.0, 25.0, 1.0, 30.0});
    validate_mesh(mesh);
    const auto fem = fem_matrices(mesh);
    const Eigen::MatrixXd C = dense(fem.C);
    const Eigen::MatrixXd G = dense(fem.G);
    CHECK(C.diagonal().minCoeff() > 0.0);
    CHECK(C.diagonal().sum() == doctest::Approx(mesh.total_area()).epsilon(1e-12));
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(G.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    CHECK(eig.eigenvalues().minCoeff() > -1e-10);
  }

  TEST_CASE("three points give a triangulation containing them") {
    std::vector<Point> pts = {{0, 0}, {10, 0}, {0, 10}};
    const auto mesh = build_mesh(pts, {100.0, 100.0, 0.0, 5.0});
    validate_mesh(mesh);
    for (const auto& p : pts) {
      bool found = false;
      for (const auto& v : mesh.vertices) found = found || (v.x == p.x && v.y == p.y);
      CHECK(found);
    }
    CHECK(mesh.num_vertices() > 3);
  }

  TEST_CASE("points closer than the cutoff are merged") {
    std::vector<Point> pts = {{0, 0}, {0.5, 0}, {20, 0}, {0, 20}};
    const auto mesh = build_mesh(pts, {100.0, 100.0, 1.0, 5.0});
    int near_origin = 0;
    for (const auto& v : mesh.vertices) near_origin += std::hypot(v.x, v.y) < 0.9;
    CHECK(near_origin == 1);
  }

  TEST_CASE("collinear points are rejected") {
    std::vector<Point> pts = {{0, 0}, {1, 1}, {2, 2}, {5, 5}};
    CHECK_THROWS_AS(build_mesh(pts, {1.0, 2.0, 0.0, 1.0}), Error);
  }

  TEST_CASE("edge lengths respect the limits") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 200);
    std::vector<Point> pts;
    for (int i = 0; i < 80; ++i) pts.push_back({u(rng), u(rng)});
    const MeshOptions opt{12.0, 40.0, 2.0, 50.0};
    const auto mesh = build_mesh(pts, opt);
    validate_mesh(mesh);
    const auto hull = convex_hull(pts);
    double inner_max = 0, outer_max = 0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tr = mesh.triangles[t];
      const Point a = mesh.vertices[tr[0]], b = mesh.vertices[tr[1]], c = mesh.vertices[tr[2]];
      const Point centroid{(a.x + b.x + c.x) / 3, (a.y + b.y + c.y) / 3};
      const double e = std::max({std::hypot(a.x - b.x, a.y - b.y), std::hypot(b.x - c.x, b.y - c.y),
                                 std::hypot(c.x - a.x, c.y - a.y)});
      if (point_in_convex_polygon(hull, centroid)) {
        inner_max = std::max(inner_max, e);
      } else {
        outer_max = std::max(outer_max, e);
      }
    }
    CHECK(inner_max <= opt.inner_max_edge * (1 + 1e-9));
    CHECK(outer_max <= opt.outer_max_edge * (1 + 1e-9));
    // Every boundary-band point at distance `extension` from the hull is meshed.
    std::array<double, 3> w;
    PointLocator loc(mesh);
    for (const auto& h : hull) {
      const Point far{h.x + (h.x - 100) / std::hypot(h.x - 100, h.y - 100) * 49.0,
                      h.y + (h.y - 100) / std::hypot(h.x - 100, h.y - 100) * 49.0};
      CHECK(loc.locate(far, w) >= 0);
    }
  }

  TEST_CASE("projector at a vertex, a centroid and outside") {
    const auto mesh = regular_mesh({0, 0}, 1.0, 4, 4);
    std::vector<Point> q = {mesh.vertices[7], {0, 0}, {10, 10}};
    const auto& t = mesh.triangles[5];
    const Point a = mesh.vertices[t[0]], b = mesh.vertices[t[1]], c = mesh.vertices[t[2]];
    q[1] = {(a.x + b.x + c.x) / 3, (a.y + b.y + c.y) / 3};
    const auto proj = projector(mesh, q);
    const Eigen::MatrixXd A = dense(proj.A);
    CHECK(A(0, 7) == doctest::Approx(1.0));
    CHECK(A.row(0).sum() == doctest::Approx(1.0));
    CHECK((A.row(0).array() != 0).count() == 1);
    for (int k = 0; k < 3; ++k) CHECK(A(1, t[k]) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(A.row(2).cwiseAbs().sum() == 0.0);
    CHECK(proj.outside[2]);
    CHECK_FALSE(proj.outside[0]);
  }

  TEST_CASE("projector rows sum to one and reproduce linear functions") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 50);
    std::vector<Point> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({u(rng), u(rng)});
    const auto mesh = build_mesh(pts, {6.0, 15.0, 0.5, 10.0});
    std::vector<Point> q;
    // Convex combinations of the seed points stay inside the mesh.
    std::uniform_int_distribution<int> pick(0, static_cast<int>(pts.size()) - 1);
    std::uniform_real_distribution<double> w(0, 1);
    for (int i = 0; i < 500; ++i) {
      const Point a = pts[pick(rng)], b = pts[pick(rng)], c = pts[pick(rng)];
      double wa = w(rng), wb = w(rng), wc = w(rng);
      const double sum = wa + wb + wc;
      wa /= sum, wb /= sum, wc /= sum;
      q.push_back({wa * a.x + wb * b.x + wc * c.x, wa * a.y + wb * b.y + wc * c.y});
    }
    const auto proj = projector(mesh, q);
    Eigen::VectorXd f(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) f[v] = 2.5 * mesh.vertices[v].x - 1.25 * mesh.vertices[v].y + 7.0;
    const Eigen::VectorXd interp = proj.A * f;
    const Eigen::VectorXd ones = proj.A * Eigen::VectorXd::Ones(mesh.num_vertices());
    for (size_t i = 0; i < q.size(); ++i) {
      REQUIRE_FALSE(proj.outside[i]);
      CHECK(std::abs(ones[i] - 1.0) < 1e-12);
      CHECK(std::abs(interp[i] - (2.5 * q[i].x - 1.25 * q[i].y + 7.0)) < 1e-10);
    }
    for (int k = 0; k < proj.A.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(proj.A, k); it; ++it) {
        CHECK(it.value() >= 0.0);
        CHECK(it.value() <= 1.0);
      }
    }
  }

  TEST_CASE("mesh CSV round trip is exact") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 30);
    std::vector<Point> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({u(rng), u(rng)});
    const auto mesh = build_mesh(pts, {5.0, 10.0, 0.1, 5.0});
    const auto dir = std::filesystem::temp_directory_path() / "pmspde_mesh_rt";
    save_mesh(mesh, dir / "v.csv", dir / "t.csv");
    const auto back = load_mesh(dir / "v.csv", dir / "t.csv");
    REQUIRE(back.num_vertices() == mesh.num_vertices());
    REQUIRE(back.num_triangles() == mesh.num_triangles());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      CHECK(back.vertices[v].x == mesh.vertices[v].x);
      CHECK(back.vertices[v].y == mesh.vertices[v].y);
    }
    for (int t = 0; t < mesh.num_triangles(); ++t) CHECK(back.triangles[t] == mesh.triangles[t]);
    std::filesystem::remove_all(dir);
  }
}
