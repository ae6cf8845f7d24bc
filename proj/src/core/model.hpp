#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core/dataset.hpp"
#include "core/geometry.hpp"

namespace pmspde {

// Per-column centring and scaling of the predictors. Columns that are not
// scaled (the dust indicator) keep mean 0 and sd 1 here.
struct Standardization {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> scaled;

  // Maps raw predictor values to the design row, intercept first.
  void apply(const double* raw, double* design_row) const;
  int num_predictors() const { return static_cast<int>(names.size()); }
};

// Column names that are never standardized.
bool is_indicator_column(const std::string& name);

struct AssemblyOptions {
  int min_obs = 10;
  double zero_floor = 0.5;  // µg/m³, applied before the log
  // Reuse existing statistics (prediction) instead of computing them.
  std::optional<Standardization> standardization;
};

// Observation model of one month. The latent vector is ordered as
// (u time-major [T * n_mesh], z [n_station], coefficients [p]) where the
// first coefficient is the intercept.
struct ModelAssembly {
  Eigen::VectorXd y;             // log concentrations
  Eigen::MatrixXd X;             // n_obs x p, column 0 = 1
  SparseMatrix A_st;             // n_obs x (T * n_mesh)
  std::vector<int> station_of;   // per observation, index into `stations`
  std::vector<int> day_of;       // per observation, 0-based
  int T = 1;
  int n_mesh = 0;
  int n_station = 0;

  std::vector<Station> stations;        // stations kept in the fit
  SparseMatrix station_projector;       // n_station x n_mesh
  std::vector<std::string> coefficient_names;  // "intercept", predictors...
  Standardization standardization;
  int num_floored = 0;
  int num_dropped_stations = 0;

  int n_obs() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }
  int latent_dim() const { return T * n_mesh + n_station + p(); }
  int u_offset() const { return 0; }
  int z_offset() const { return T * n_mesh; }
  int beta_offset() const { return T * n_mesh + n_station; }
};

Standardization compute_standardization(const Dataset& data, const std::vector<int>& rows);

ModelAssembly assemble(const Dataset& data, const geometry::TriangularMesh& mesh,
                       const AssemblyOptions& options = {});

// Stacks day blocks: row i of the result is `station_rows` row station[i]
// shifted to the column block of day[i].
SparseMatrix spacetime_projector(const SparseMatrix& station_rows, const std::vector<int>& station,
                                 const std::vector<int>& day, int T);

}  // namespace pmspde
