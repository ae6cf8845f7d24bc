#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "core/dataset.hpp"

namespace pmspde::validation {

struct SplitOptions {
  double fraction = 0.1;
  // Per-stratum overrides (urban, suburban, rural) of the validation count.
  std::array<std::optional<int>, 3> counts;
};

struct SplitPlan {
  int trial = 0;
  std::array<std::vector<int>, 3> validation;  // station indices per stratum
  std::vector<int> training;                   // sorted
  std::vector<std::string> warnings;

  std::vector<int> validation_all() const;  // sorted
};

// round(fraction * size), halves rounded up.
int stratum_count(int size, double fraction);

// Uniform sampling without replacement inside each stratum, reproducible
// from (seed, trial).
SplitPlan stratified_split(const std::vector<Station>& stations, const SplitOptions& options,
                           std::uint64_t seed, int trial);

struct PredictiveSummary {
  Eigen::VectorXd mean;   // original scale
  Eigen::VectorXd lower;  // 2.5% quantile
  Eigen::VectorXd upper;  // 97.5% quantile
};

// Columns of `log_draws` are targets, rows are draws.
PredictiveSummary backtransform(const Eigen::Ref<const Eigen::MatrixXd>& log_draws);

struct Metrics {
  int n = 0;
  double rmse = NAN;
  double bias = NAN;
  double correlation = NAN;  // NaN with fewer than two pairs
  double coverage = NAN;     // percent
};

Metrics compute_metrics(const Eigen::VectorXd& observed, const PredictiveSummary& predicted);

struct VariogramBin {
  double h_lower = 0.0;
  double h_upper = 0.0;
  int lag = 0;
  double gamma = NAN;  // NaN for an empty bin
  long long pairs = 0;

  double h_mid() const { return 0.5 * (h_lower + h_upper); }
};

struct Residual {
  int station = 0;
  int day = 0;
  double value = 0.0;
};

// gamma(h, l) = mean of (r_i - r_j)^2 / 2 over distinct records whose
// station distance falls in [k w, (k+1) w) and whose days differ by l.
std::vector<VariogramBin> st_variogram(const std::vector<Residual>& residuals,
                                       const std::vector<geometry::Point>& station_locations,
                                       double bin_width = 25.0, double max_distance = 400.0,
                                       int max_lag = 7);

void write_variogram(const std::vector<VariogramBin>& bins, const std::filesystem::path& path);

}  // namespace pmspde::validation
