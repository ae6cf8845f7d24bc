#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "core/geometry.hpp"
#include "core/sparse_cholesky.hpp"
#include "core/spde.hpp"

using namespace pmspde;
using namespace pmspde::spde;

TEST_SUITE("spde") {
  TEST_CASE("kappa from range") {
    const auto c = matern_to_spde({150.0, 1.0});
    CHECK(c.kappa == doctest::Approx(std::sqrt(8.0) / 150.0).epsilon(1e-15));
    CHECK(c.kappa == doctest::Approx(0.0188562).epsilon(1e-6));
  }

  TEST_CASE("kappa one gives tau 1/sqrt(4 pi)") {
    const auto c = matern_to_spde({std::sqrt(8.0), 1.0});
    CHECK(c.kappa == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.tau == doctest::Approx(0.2820948).epsilon(1e-7));
    // sigma^2 = 1 / (4 pi kappa^2 tau^2)
    CHECK(1.0 / (4 * std::numbers::pi * c.kappa * c.kappa * c.tau * c.tau) == doctest::Approx(1.0));
  }

  TEST_CASE("parameter round trip") {
    for (double rho : {0.3, 12.0, 106.23, 5000.0}) {
      for (double sigma : {0.01, 0.434, 3.0}) {
        const auto back = spde_to_matern(matern_to_spde({rho, sigma}));
        CHECK(std::abs(back.rho - rho) <= 1e-12 * rho);
        CHECK(std::abs(back.sigma - sigma) <= 1e-12 * sigma);
      }
    }
  }

  TEST_CASE("matern correlation values") {
    const MaternParams p{100.0, 1.0};
    CHECK(matern_correlation(0.0, p) == 1.0);
    // sqrt(8) K_1(sqrt(8)), reference value from scipy.special.k1.
    CHECK(matern_correlation(100.0, p) == doctest::Approx(0.1396674740152931).epsilon(1e-12));
    CHECK(matern_correlation(1000.0, p) < 1e-6);
    double prev = 1.0;
    for (double h = 1.0; h < 400.0; h += 7.0) {
      const double c = matern_correlation(h, p);
      CHECK(c < prev);
      prev = c;
    }
  }

  TEST_CASE("doubling tau multiplies the precision by four exactly") {
    const auto mesh = geometry::regular_mesh({0, 0}, 1.0, 6, 5);
    const auto fem = geometry::fem_matrices(mesh);
    const Eigen::MatrixXd q1 = Eigen::MatrixXd(spde_precision(fem, 0.7, 1.3));
    const Eigen::MatrixXd q2 = Eigen::MatrixXd(spde_precision(fem, 0.7, 2.6));
    CHECK((q2 - 4.0 * q1).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("precision matches the dense formula and its pattern") {
    const auto mesh = geometry::regular_mesh({0, 0}, 2.0, 5, 4);
    const auto fem = geometry::fem_matrices(mesh);
    const Eigen::MatrixXd C = Eigen::MatrixXd(fem.C), G = Eigen::MatrixXd(fem.G);
    const double k = 0.4, t = 2.0;
    const Eigen::MatrixXd expected =
        t * t * (std::pow(k, 4) * C + 2 * k * k * G + G * C.inverse() * G);
    const SparseMatrix qs = spde_precision(fem, k, t);
    const Eigen::MatrixXd q = Eigen::MatrixXd(qs);
    CHECK((q - expected).cwiseAbs().maxCoeff() < 1e-12 * expected.cwiseAbs().maxCoeff());
    CHECK((q - q.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    CHECK(llt.info() == Eigen::Success);
    // Structural pattern: vertices sharing a triangle, then one more hop.
    Eigen::MatrixXd adj = Eigen::MatrixXd::Identity(mesh.num_vertices(), mesh.num_vertices());
    for (const auto& tri : mesh.triangles) {
      for (int i : tri) {
        for (int j : tri) adj(i, j) = 1.0;
      }
    }
    const Eigen::MatrixXd reach = adj * adj;
    for (int k2 = 0; k2 < qs.outerSize(); ++k2) {
      for (SparseMatrix::InnerIterator it(qs, k2); it; ++it) CHECK(reach(it.row(), it.col()) > 0.0);
    }
  }

  TEST_CASE("template evaluation equals direct assembly") {
    const auto mesh = geometry::regular_mesh({0, 0}, 1.5, 7, 6);
    const auto fem = geometry::fem_matrices(mesh);
    PrecisionTemplate tpl(fem);
    for (double k : {0.05, 0.9, 3.0}) {
      const Eigen::MatrixXd a = Eigen::MatrixXd(tpl.evaluate(k, 0.8));
      const Eigen::MatrixXd b = Eigen::MatrixXd(spde_precision(fem, k, 0.8));
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-13 * b.cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("GMRF correlation approximates the Matern field away from the boundary") {
    // 6 rho square, longest (diagonal) edge just under rho/5.
    const double rho = 10.0;
    const int n = 43;
    const double h = 6.0 * rho / n;
    REQUIRE(h * std::sqrt(2.0) <= rho / 5.0);
    const auto mesh = geometry::regular_mesh({0, 0}, h, n, n);
    const auto fem = geometry::fem_matrices(mesh);
    const auto c = matern_to_spde({rho, 1.0});
    SparseCholesky chol;
    REQUIRE(chol.factorize(lower_triangle(spde_precision(fem, c.kappa, c.tau))));
    const Eigen::VectorXd var = chol.inverse_diagonal();
    const int mid = (n / 2) * (n + 1) + n / 2;
    const Eigen::VectorXd col = chol.solve(Eigen::VectorXd::Unit(mesh.num_vertices(), mid));
    CHECK(col[mid] == doctest::Approx(var[mid]).epsilon(1e-9));
    const auto centre = mesh.vertices[mid];
    double worst = 0.0, worst_var = 0.0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const auto p = mesh.vertices[v];
      if (p.x < 2 * rho || p.x > 4 * rho || p.y < 2 * rho || p.y > 4 * rho) continue;
      const double d = std::hypot(p.x - centre.x, p.y - centre.y);
      const double emp = col[v] / std::sqrt(var[mid] * var[v]);
      worst = std::max(worst, std::abs(emp - matern_correlation(d, {rho, 1.0})));
      worst_var = std::max(worst_var, std::abs(var[v] - 1.0));
    }
    CHECK(worst < 0.05);
    CHECK(worst_var < 0.1);
  }

  TEST_CASE("halving the inner edge never increases the correlation error") {
    const double rho = 10.0;
    const std::vector<geometry::Point> corners{{0, 0}, {6 * rho, 0}, {0, 6 * rho}, {6 * rho, 6 * rho}};
    const auto c = matern_to_spde({rho, 1.0});
    double previous = 1.0;
    for (double edge : {rho / 2, rho / 4, rho / 8}) {
      geometry::MeshOptions opt;
      opt.inner_max_edge = edge;
      opt.outer_max_edge = 2 * edge;
      opt.cutoff = edge / 5;
      opt.extension = 2 * rho;
      const auto mesh = geometry::build_mesh(corners, opt);
      SparseCholesky chol;
      REQUIRE(chol.factorize(lower_triangle(spde_precision(geometry::fem_matrices(mesh), c.kappa, c.tau))));
      const Eigen::VectorXd var = chol.inverse_diagonal();
      int mid = 0;
      double best = 1e300;
      for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double d = std::hypot(mesh.vertices[v].x - 3 * rho, mesh.vertices[v].y - 3 * rho);
        if (d < best) best = d, mid = v;
      }
      const Eigen::VectorXd col = chol.solve(Eigen::VectorXd::Unit(mesh.num_vertices(), mid));
      double worst = 0.0;
      for (int v = 0; v < mesh.num_vertices(); ++v) {
        const auto p = mesh.vertices[v];
        if (p.x < 2 * rho || p.x > 4 * rho || p.y < 2 * rho || p.y > 4 * rho) continue;
        const double d = std::hypot(p.x - mesh.vertices[mid].x, p.y - mesh.vertices[mid].y);
        worst = std::max(worst, std::abs(col[v] / std::sqrt(var[mid] * var[v]) - matern_correlation(d, {rho, 1.0})));
      }
      MESSAGE("inner edge " << edge << ": " << mesh.num_vertices() << " vertices, error " << worst);
      CHECK(worst <= previous);
      previous = worst;
    }
  }
}
