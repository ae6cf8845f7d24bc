#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "core/dataset.hpp"
#include "core/geometry.hpp"
#include "core/inference.hpp"

namespace pmspde::simulate {

struct SimulationSpec {
  inference::HyperParameters theta;
  double mu = 3.0;
  std::vector<double> beta;  // one per covariate
  // Explicit coordinates win over the random layout.
  std::vector<geometry::Point> coordinates;
  int n_stations = 100;
  double domain_km = 600.0;  // random layout: uniform over [0, domain_km]^2
  // Stratum proportions (urban, suburban, rural) for the random labels.
  std::array<double, 3> strata = {244.0 / 410.0, 104.0 / 410.0, 62.0 / 410.0};
  int year = 2015;
  int month = 1;
  int T = 0;  // 0: the length of the month
  double missing_fraction = 0.0;
  std::uint64_t seed = 1;
};

// Stations with ids "S0001"... and random strata, reproducible from the seed.
std::vector<Station> simulate_stations(const SimulationSpec& spec);

struct SimulationResult {
  Dataset data;              // raw concentrations exp(y)
  Eigen::VectorXd log_value;  // y, aligned with data.rows
  Eigen::VectorXd u;          // T * n_mesh, time-major
  Eigen::VectorXd z;          // per station
  Eigen::VectorXd eta;        // noise-free linear predictor per row
};

// Draws from the generative model on `mesh`: u ~ N(0, Q_st^-1) via a sparse
// Cholesky of the same space-time precision used for inference, z and the
// noise iid Gaussian, covariates iid N(0, 1) named x1, x2, ...
SimulationResult simulate_dataset(const SimulationSpec& spec, const geometry::TriangularMesh& mesh);

// Independent check path for tiny meshes: u from a dense Cholesky of the
// analytic covariance a^|t-t'| / (1 - a^2) (x) Q_s^-1.
Eigen::MatrixXd dense_latent_draws(const inference::HyperParameters& theta,
                                   const geometry::TriangularMesh& mesh, int T, int n_draws,
                                   std::uint64_t seed);

// Sparse path returning only u draws, for comparison with the dense path.
Eigen::MatrixXd sparse_latent_draws(const inference::HyperParameters& theta,
                                    const geometry::TriangularMesh& mesh, int T, int n_draws,
                                    std::uint64_t seed);

}  // namespace pmspde::simulate
