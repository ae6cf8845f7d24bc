#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "core/geometry.hpp"
#include "core/inference.hpp"
#include "core/model.hpp"

namespace fixtures {

using namespace pmspde;

// Small model built directly (no CSV): random stations inside a regular mesh,
// a random subset of station-days observed, random covariates.
struct Tiny {
  geometry::TriangularMesh mesh;
  geometry::FemMatrices fem;
  ModelAssembly m;
};

inline Tiny make_tiny(unsigned seed, int max_obs = 50) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_nx(2, 4), pick_T(1, 4), pick_s(1, 5), pick_p(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  Tiny t;
  const int nx = pick_nx(rng), ny = 3;
  const double h = 20.0;
  t.mesh = geometry::regular_mesh({0, 0}, h, nx, ny);
  t.fem = geometry::fem_matrices(t.mesh);
  auto& m = t.m;
  m.T = pick_T(rng);
  m.n_mesh = t.mesh.num_vertices();
  m.n_station = pick_s(rng);
  std::vector<geometry::Point> locs;
  for (int s = 0; s < m.n_station; ++s) {
    locs.push_back({nx * h * unit(rng), ny * h * unit(rng)});
    m.stations.push_back({"s" + std::to_string(s), locs.back(), Stratum::urban});
  }
  m.station_projector = geometry::projector(t.mesh, locs).A;
  const int p = pick_p(rng);
  std::vector<double> ys;
  std::vector<std::vector<double>> xs;
  for (int s = 0; s < m.n_station; ++s) {
    for (int d = 0; d < m.T; ++d) {
      if (unit(rng) < 0.25 || static_cast<int>(ys.size()) >= max_obs) continue;
      m.station_of.push_back(s);
      m.day_of.push_back(d);
      ys.push_back(3.0 + normal(rng));
      std::vector<double> x{1.0};
      for (int k = 1; k < p; ++k) x.push_back(normal(rng));
      xs.push_back(x);
    }
  }
  const int n = static_cast<int>(ys.size());
  m.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  m.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < p; ++k) m.X(i, k) = xs[i][k];
  }
  for (int k = 0; k < p; ++k) m.coefficient_names.push_back(k == 0 ? "intercept" : "x" + std::to_string(k));
  m.A_st = spacetime_projector(m.station_projector, m.station_of, m.day_of, m.T);
  return t;
}

inline inference::HyperParameters random_theta(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-0.9, 0.9), rho(10.0, 80.0), s(0.1, 1.0);
  return {a(rng), rho(rng), s(rng), s(rng), s(rng)};
}

// Dense prior precision built from the analytic formulas only.
inline Eigen::MatrixXd dense_prior_precision(const Tiny& t, const inference::HyperParameters& th,
                                             double fixed_precision) {
  const auto& m = t.m;
  const double kappa = std::sqrt(8.0) / th.rho;
  const double tau = 1.0 / (std::sqrt(4.0 * M_PI) * kappa * th.sigma_omega);
  const Eigen::MatrixXd C = Eigen::MatrixXd(t.fem.C), G = Eigen::MatrixXd(t.fem.G);
  const Eigen::MatrixXd qs =
      tau * tau * (std::pow(kappa, 4) * C + 2 * kappa * kappa * G + G * C.inverse() * G);
  Eigen::MatrixXd ar_cov(m.T, m.T);
  for (int i = 0; i < m.T; ++i) {
    for (int j = 0; j < m.T; ++j) ar_cov(i, j) = std::pow(th.a, std::abs(i - j)) / (1 - th.a * th.a);
  }
  const Eigen::MatrixXd ar = ar_cov.inverse();
  const int N = m.latent_dim();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(N, N);
  const int n = m.n_mesh;
  for (int i = 0; i < m.T; ++i) {
    for (int j = 0; j < m.T; ++j) q.block(i * n, j * n, n, n) = ar(i, j) * qs;
  }
  for (int s = 0; s < m.n_station; ++s) q(m.z_offset() + s, m.z_offset() + s) = 1.0 / (th.sigma_z * th.sigma_z);
  for (int k = 0; k < m.p(); ++k) q(m.beta_offset() + k, m.beta_offset() + k) = fixed_precision;
  return q;
}

inline Eigen::MatrixXd dense_design(const Tiny& t) {
  const auto& m = t.m;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m.n_obs(), m.latent_dim());
  B.leftCols(m.T * m.n_mesh) = Eigen::MatrixXd(m.A_st);
  for (int i = 0; i < m.n_obs(); ++i) {
    B(i, m.z_offset() + m.station_of[i]) = 1.0;
    for (int k = 0; k < m.p(); ++k) B(i, m.beta_offset() + k) = m.X(i, k);
  }
  return B;
}

struct DenseOracle {
  double lml = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// log N(y; 0, B Q^-1 B' + s2 I) and the conditional moments by dense algebra.
inline DenseOracle dense_oracle(const Tiny& t, const inference::HyperParameters& th, double fixed_precision) {
  const Eigen::MatrixXd Q = dense_prior_precision(t, th, fixed_precision);
  const Eigen::MatrixXd B = dense_design(t);
  const double s2 = th.sigma_epsilon * th.sigma_epsilon;
  const int n = t.m.n_obs();
  DenseOracle o;
  const Eigen::MatrixXd cov_x = Q.inverse();
  if (n > 0) {
    const Eigen::MatrixXd S = B * cov_x * B.transpose() + s2 * Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::VectorXd alpha = llt.solve(t.m.y);
    const double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    o.lml = -0.5 * n * std::log(2 * M_PI) - 0.5 * logdet - 0.5 * t.m.y.dot(alpha);
  }
  const Eigen::MatrixXd P = Q + B.transpose() * B / s2;
  const Eigen::MatrixXd Pinv = P.inverse();
  o.mean = Pinv * (B.transpose() * t.m.y / s2);
  o.variance = Pinv.diagonal();
  return o;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  }
  return worst;
}

}  // namespace fixtures
