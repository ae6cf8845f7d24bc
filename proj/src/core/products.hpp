#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core/geometry.hpp"
#include "core/inference.hpp"
#include "core/model.hpp"

namespace pmspde::products {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double nodata = -9999.0;

// Regular grid; cell id = row * ncols + col with row 0 the northern row, the
// order of an ESRI ASCII grid.
struct GridSpec {
  double xll = 0.0;  // lower-left corner, km
  double yll = 0.0;
  double cell_size = 1.0;
  int ncols = 0;
  int nrows = 0;
  std::vector<bool> land;  // empty: every cell is land

  int num_cells() const { return ncols * nrows; }
  geometry::Point center(int cell) const;
  bool is_land(int cell) const { return land.empty() || land[cell]; }
};

// Marks cells listed with land = 0 in a (cell_id, land) CSV as sea.
void load_mask(GridSpec& grid, const std::filesystem::path& path);

// Raw predictor values per cell for the days of one month.
struct GridCovariates {
  std::vector<std::string> names;
  // day (0-based) -> cell -> raw values in `names` order
  std::map<int, std::map<int, std::vector<double>>> values;
};

// Reads (cell_id, date, predictors...) rows of the given month. A blank
// value becomes NaN, so the cell is reported missing.
GridCovariates load_grid_covariates(const std::filesystem::path& path, int year, int month,
                                    const GridSpec& grid);

enum class CellStatus : unsigned char { predicted, masked, outside_mesh, missing_covariates };

// Cells that can be predicted for a day and the reason for every other cell.
struct GridTargets {
  std::vector<CellStatus> status;  // per grid cell
  std::vector<int> cells;          // predicted cells in id order
  SparseMatrix A;                  // cells x n_mesh
  Eigen::MatrixXd X;               // cells x p (standardized, intercept first)
};

GridTargets grid_targets(const GridSpec& grid, const geometry::TriangularMesh& mesh,
                         const Standardization& standardization, const GridCovariates& covariates, int day);

// Calls `visit` with consecutive batches of predicted cells and their draws
// of exp(linear predictor), samples x cells. The grid maps describe the
// spatio-temporal field plus fixed effects: no station effect, no noise.
void predict_grid(const inference::SampleSet& samples, const GridTargets& targets, int day, int batch_size,
                  const std::function<void(std::span<const int> cells, const RowMatrix& draws)>& visit);

// (Q3 - Q1) / Q2 with nearest-rank quartiles.
double rwpir(std::span<const double> samples);
// Fraction of samples strictly above the threshold.
double exceedance_probability(std::span<const double> samples, double threshold = 50.0);

struct CellSummary {
  double mean = NAN;
  double sd = NAN;
  double q1 = NAN;
  double median = NAN;
  double q3 = NAN;
  double rwpir = NAN;
};
CellSummary summarize_cell(std::span<const double> samples);

struct Statistic {
  enum Kind { mean, percentile } kind = mean;
  double p = 0.0;  // percentile in (0, 100]

  static Statistic parse(const std::string& text);  // "mean", "p90.4", ...
  std::string name() const;
};

// Per sample, the statistic over days of each cell value. All matrices are
// samples x cells with identical shapes.
RowMatrix aggregate_days(const std::vector<RowMatrix>& daily, const Statistic& statistic);

struct ZoneCell {
  int cell = 0;
  std::string zone;
  double population = 0.0;
};
std::vector<ZoneCell> load_zones(const std::filesystem::path& path);

// sum p_i c_i / sum p_i per zone; NaN when the zone has no population or a
// populated cell lacks a concentration. `concentration` is indexed by cell.
std::map<std::string, double> population_exposure(std::span<const double> concentration,
                                                  const std::vector<ZoneCell>& zones);

// ESRI ASCII grid, NaN written as NODATA.
void write_asc(const GridSpec& grid, std::span<const double> values, const std::filesystem::path& path);
// cell_id,value for every land cell; a missing value is left blank.
void write_cell_csv(const GridSpec& grid, std::span<const double> values, const std::filesystem::path& path);

}  // namespace pmspde::products
