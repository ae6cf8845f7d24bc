#include "core/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/spacetime.hpp"
#include "core/sparse_cholesky.hpp"
#include "core/spde.hpp"

namespace pmspde::simulate {

namespace {

// Sub-stream counters within the simulation stream.
enum : std::uint64_t { kLayout = 1, kLatent = 2, kStation = 3, kCovariate = 4, kNoise = 5, kMissing = 6 };

SparseMatrix spacetime_at(const inference::HyperParameters& theta, const geometry::FemMatrices& fem,
                          int T) {
  const auto c = spde::matern_to_spde({theta.rho, theta.sigma_omega});
  return spacetime::spacetime_precision(spacetime::ar1_precision({theta.a, T}),
                                        spde::spde_precision(fem, c.kappa, c.tau));
}

Eigen::VectorXd draw_latent(const SparseCholesky& chol, int dim, StreamRng& rng) {
  Eigen::VectorXd e(dim);
  for (int i = 0; i < dim; ++i) e[i] = rng.normal();
  return chol.sample_transform(e);
}

}  // namespace

std::vector<Station> simulate_stations(const SimulationSpec& spec) {
  StreamRng rng(spec.seed, streams::simulation, kLayout);
  const bool explicit_layout = !spec.coordinates.empty();
  const int n = explicit_layout ? static_cast<int>(spec.coordinates.size()) : spec.n_stations;
  if (n < 1) throw invalid_argument("simulate: need at least one station");
  const double total = spec.strata[0] + spec.strata[1] + spec.strata[2];
  if (!(total > 0.0)) throw invalid_argument("simulate: stratum proportions must be positive");
  std::vector<Station> out;
  for (int i = 0; i < n; ++i) {
    Station s;
    char id[16];
    std::snprintf(id, sizeof id, "S%04d", i + 1);
    s.id = id;
    if (explicit_layout) {
      s.location = spec.coordinates[i];
    } else {
      s.location.x = spec.domain_km * rng.uniform();
      s.location.y = spec.domain_km * rng.uniform();
    }
    const double u = rng.uniform() * total;
    s.stratum = u < spec.strata[0]                     ? Stratum::urban
                : u < spec.strata[0] + spec.strata[1] ? Stratum::suburban
                                                      : Stratum::rural;
    out.push_back(s);
  }
  return out;
}

SimulationResult simulate_dataset(const SimulationSpec& spec, const geometry::TriangularMesh& mesh) {
  const auto& th = spec.theta;
  // Any positive scale is allowed here; the inference floor on sigma_epsilon
  // does not apply to data generation.
  if (!(std::abs(th.a) < 1.0 && th.rho > 0.0 && th.sigma_omega > 0.0 && th.sigma_z > 0.0 &&
        th.sigma_epsilon > 0.0 && std::isfinite(th.rho + th.sigma_omega + th.sigma_z + th.sigma_epsilon))) {
    throw invalid_argument("simulate: invalid hyperparameters " + inference::describe(spec.theta));
  }
  if (spec.missing_fraction < 0.0 || spec.missing_fraction >= 1.0) {
    throw invalid_argument("simulate: missing_fraction must be in [0, 1)");
  }
  SimulationResult res;
  Dataset& data = res.data;
  data.year = spec.year;
  data.month = spec.month;
  data.num_days = spec.T > 0 ? spec.T : days_in_month(spec.year, spec.month);
  if (data.num_days > days_in_month(spec.year, spec.month)) {
    throw invalid_argument("simulate: more days than the month has");
  }
  data.stations = simulate_stations(spec);
  const int T = data.num_days;
  const int n_mesh = mesh.num_vertices();
  const int S = static_cast<int>(data.stations.size());
  const int p = static_cast<int>(spec.beta.size());
  for (int k = 0; k < p; ++k) data.covariate_names.push_back("x" + std::to_string(k + 1));

  std::vector<geometry::Point> locs;
  for (const auto& s : data.stations) locs.push_back(s.location);
  const auto proj = geometry::projector(mesh, locs);
  for (int s = 0; s < S; ++s) {
    if (proj.outside[s]) throw invalid_argument("simulate: station '" + data.stations[s].id + "' lies outside the mesh");
  }

  const auto fem = geometry::fem_matrices(mesh);
  SparseCholesky chol;
  if (!chol.factorize(lower_triangle(spacetime_at(spec.theta, fem, T)))) {
    throw numerical_error("simulate: space-time precision is not positive definite");
  }
  StreamRng latent_rng(spec.seed, streams::simulation, kLatent);
  res.u = draw_latent(chol, T * n_mesh, latent_rng);

  StreamRng station_rng(spec.seed, streams::simulation, kStation);
  res.z.resize(S);
  for (int s = 0; s < S; ++s) res.z[s] = spec.theta.sigma_z * station_rng.normal();

  const SparseMatrix At = proj.A.transpose();
  StreamRng cov_rng(spec.seed, streams::simulation, kCovariate);
  StreamRng noise_rng(spec.seed, streams::simulation, kNoise);
  StreamRng miss_rng(spec.seed, streams::simulation, kMissing);
  std::vector<double> y, eta;
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < T; ++t) {
      // Every draw is consumed whether or not the row is kept, so the
      // missing fraction does not shift the other values.
      ObservationRow row{s, t, 0.0, std::vector<double>(p)};
      double e = spec.mu;
      for (int k = 0; k < p; ++k) {
        row.covariates[k] = cov_rng.normal();
        e += spec.beta[k] * row.covariates[k];
      }
      for (SparseMatrix::InnerIterator it(At, s); it; ++it) e += it.value() * res.u[t * n_mesh + it.row()];
      e += res.z[s];
      const double v = e + spec.theta.sigma_epsilon * noise_rng.normal();
      const bool missing = miss_rng.uniform() < spec.missing_fraction;
      if (missing) continue;
      row.value = std::exp(v);
      data.rows.push_back(std::move(row));
      y.push_back(v);
      eta.push_back(e);
    }
  }
  res.log_value = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  res.eta = Eigen::Map<Eigen::VectorXd>(eta.data(), static_cast<Eigen::Index>(eta.size()));
  return res;
}

Eigen::MatrixXd sparse_latent_draws(const inference::HyperParameters& theta,
                                    const geometry::TriangularMesh& mesh, int T, int n_draws,
                                    std::uint64_t seed) {
  const auto fem = geometry::fem_matrices(mesh);
  SparseCholesky chol;
  if (!chol.factorize(lower_triangle(spacetime_at(theta, fem, T)))) {
    throw numerical_error("simulate: space-time precision is not positive definite");
  }
  const int dim = T * mesh.num_vertices();
  Eigen::MatrixXd out(n_draws, dim);
  for (int k = 0; k < n_draws; ++k) {
    StreamRng rng(seed, streams::simulation, 1000 + static_cast<std::uint64_t>(k));
    out.row(k) = draw_latent(chol, dim, rng).transpose();
  }
  return out;
}

Eigen::MatrixXd dense_latent_draws(const inference::HyperParameters& theta,
                                   const geometry::TriangularMesh& mesh, int T, int n_draws,
                                   std::uint64_t seed) {
  const int n = mesh.num_vertices();
  if (static_cast<long long>(T) * n > 4000) throw invalid_argument("dense_latent_draws: mesh too large");
  const auto fem = geometry::fem_matrices(mesh);
  const auto c = spde::matern_to_spde({theta.rho, theta.sigma_omega});
  const Eigen::MatrixXd C = Eigen::MatrixXd(fem.C), G = Eigen::MatrixXd(fem.G);
  const Eigen::MatrixXd qs =
      c.tau * c.tau * (std::pow(c.kappa, 4) * C + 2 * c.kappa * c.kappa * G + G * C.inverse() * G);
  const Eigen::MatrixXd cs = qs.inverse();
  Eigen::MatrixXd cov(T * n, T * n);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < T; ++s) {
      cov.block(t * n, s * n, n, n) = std::pow(theta.a, std::abs(t - s)) / (1.0 - theta.a * theta.a) * cs;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw numerical_error("dense_latent_draws: covariance not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd out(n_draws, T * n);
  Eigen::VectorXd e(T * n);
  for (int k = 0; k < n_draws; ++k) {
    StreamRng rng(seed, streams::simulation, 1000 + static_cast<std::uint64_t>(k));
    for (int i = 0; i < T * n; ++i) e[i] = rng.normal();
    out.row(k) = (L * e).transpose();
  }
  return out;
}

}  // namespace pmspde::simulate
