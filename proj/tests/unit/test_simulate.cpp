#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "core/simulate.hpp"
#include "core/spde.hpp"

using namespace pmspde;
using namespace pmspde::simulate;

namespace {

geometry::TriangularMesh mesh_for(const std::vector<Station>& st) {
  std::vector<geometry::Point> pts;
  for (const auto& s : st) pts.push_back(s.location);
  return geometry::build_mesh(pts, {80.0, 200.0, 1.0, 100.0});
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
  return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("same spec gives the same dataset") {
    SimulationSpec spec;
    spec.n_stations = 15;
    spec.T = 4;
    spec.beta = {0.2};
    spec.missing_fraction = 0.2;
    const auto mesh = mesh_for(simulate_stations(spec));
    const auto a = simulate_dataset(spec, mesh);
    const auto b = simulate_dataset(spec, mesh);
    CHECK(a.log_value == b.log_value);
    REQUIRE(a.data.rows.size() == b.data.rows.size());
    CHECK(a.data.rows.size() < 60);
    for (size_t i = 0; i < a.data.rows.size(); ++i) {
      CHECK(a.data.rows[i].value == b.data.rows[i].value);
      CHECK(std::log(a.data.rows[i].value) == doctest::Approx(a.log_value[i]).epsilon(1e-14));
    }
    spec.seed = 2;
    CHECK(simulate_dataset(spec, mesh).log_value != a.log_value);
  }

  TEST_CASE("noise-free limit returns the intercept") {
    SimulationSpec spec;
    spec.theta = {0.5, 100.0, 1e-8, 1e-8, 1e-8};
    spec.mu = 3.3;
    spec.beta = {0.0, 0.0};
    spec.n_stations = 10;
    spec.T = 3;
    const auto mesh = mesh_for(simulate_stations(spec));
    const auto r = simulate_dataset(spec, mesh);
    CHECK((r.log_value.array() - 3.3).abs().maxCoeff() < 1e-6);
  }

  TEST_CASE("noise variance matches sigma_epsilon") {
    SimulationSpec spec;
    spec.theta.sigma_epsilon = 0.3;
    spec.n_stations = 400;
    spec.T = 25;
    spec.beta = {0.4};
    const auto mesh = mesh_for(simulate_stations(spec));
    const auto r = simulate_dataset(spec, mesh);
    const Eigen::ArrayXd e = (r.log_value - r.eta).array();
    const double n = static_cast<double>(e.size());
    REQUIRE(n == 10000);
    const double var = (e - e.mean()).square().sum() / (n - 1);
    const double s2 = 0.09;
    CHECK(std::abs(var - s2) < 3.0 * s2 * std::sqrt(2.0 / (n - 1)));
  }

  TEST_CASE("a = 0 gives uncorrelated days") {
    const auto mesh = geometry::regular_mesh({0, 0}, 25.0, 8, 8);
    const inference::HyperParameters th{0.0, 60.0, 1.0, 0.1, 0.1};
    const int T = 2, n = mesh.num_vertices(), draws = 4000;
    const auto u = sparse_latent_draws(th, mesh, T, draws, 5);
    const int v = n / 2;
    const double r = correlation(u.col(v), u.col(n + v));
    CHECK(std::abs(r) < 3.0 / std::sqrt(double(draws)));
  }

  TEST_CASE("sparse and dense sampling paths agree with the analytic covariance") {
    const auto mesh = geometry::regular_mesh({0, 0}, 30.0, 4, 3);
    const inference::HyperParameters th{0.6, 70.0, 0.8, 0.1, 0.1};
    const int T = 3, n = mesh.num_vertices(), draws = 20000;
    const auto s = sparse_latent_draws(th, mesh, T, draws, 7);
    const auto d = dense_latent_draws(th, mesh, T, draws, 7);
    // Analytic covariance of a few entries.
    const auto c = spde::matern_to_spde({th.rho, th.sigma_omega});
    const auto fem = geometry::fem_matrices(mesh);
    const Eigen::MatrixXd cs = Eigen::MatrixXd(spde::spde_precision(fem, c.kappa, c.tau)).inverse();
    const double infl = 1.0 / (1.0 - th.a * th.a);
    struct Pair {
      int t1, i, t2, j;
    };
    for (const Pair p : {Pair{0, 0, 0, 0}, Pair{1, 5, 1, 6}, Pair{0, 5, 2, 5}, Pair{2, 3, 1, 10}}) {
      const double expected = std::pow(th.a, std::abs(p.t1 - p.t2)) * infl * cs(p.i, p.j);
      const double var_i = infl * cs(p.i, p.i), var_j = infl * cs(p.j, p.j);
      const double se = std::sqrt((var_i * var_j + expected * expected) / draws);
      for (const auto* m : {&s, &d}) {
        const Eigen::VectorXd x = m->col(p.t1 * n + p.i), y = m->col(p.t2 * n + p.j);
        const double cov = (x.array() * y.array()).mean();
        CHECK(std::abs(cov - expected) < 4.0 * se);
      }
    }
  }

  TEST_CASE("simulated field follows the Matern correlation") {
    // 6 rho square, longest edge rho/5.
    const double rho = 60.0;
    const int nx = 43;
    const auto mesh = geometry::regular_mesh({0, 0}, 6.0 * rho / nx, nx, nx);
    const inference::HyperParameters th{0.5, rho, 1.0, 0.1, 0.1};
    const int draws = 2000;
    const auto u = sparse_latent_draws(th, mesh, 1, draws, 9);
    const int mid = (nx / 2) * (nx + 1) + nx / 2;
    for (int step : {2, 5, 9, 15}) {
      const int other = mid + step;
      const double h = step * 6.0 * rho / nx;
      const double expected = spde::matern_correlation(h, {rho, 1.0});
      const double se = (1 - expected * expected) / std::sqrt(double(draws));
      CHECK(std::abs(correlation(u.col(mid), u.col(other)) - expected) < 0.05 + 3 * se);
    }
    // Stationary variance sigma^2 / (1 - a^2).
    const double var = u.col(mid).squaredNorm() / draws;
    CHECK(std::abs(var * (1 - 0.25) - 1.0) < 0.1 + 3 * std::sqrt(2.0 / draws));
  }
}
