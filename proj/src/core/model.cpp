#include "core/model.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace pmspde {

bool is_indicator_column(const std::string& name) { return name == "dust"; }

void Standardization::apply(const double* raw, double* design_row) const {
  design_row[0] = 1.0;
  for (size_t k = 0; k < names.size(); ++k) {
    design_row[k + 1] = scaled[k] ? (raw[k] - mean[k]) / sd[k] : raw[k];
  }
}

Standardization compute_standardization(const Dataset& data, const std::vector<int>& rows) {
  Standardization s;
  s.names = data.covariate_names;
  const size_t p = s.names.size();
  s.mean.assign(p, 0.0);
  s.sd.assign(p, 1.0);
  s.scaled.assign(p, true);
  for (size_t k = 0; k < p; ++k) {
    double sum = 0.0, lo = INFINITY, hi = -INFINITY;
    for (int r : rows) {
      const double v = data.rows[r].covariates[k];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (rows.empty() || !(hi > lo)) {
      throw invalid_argument("covariate '" + s.names[k] +
                             "' is constant over the month and cannot be separated from the intercept");
    }
    if (is_indicator_column(s.names[k])) {
      s.scaled[k] = false;
      continue;
    }
    const double mean = sum / static_cast<double>(rows.size());
    double ss = 0.0;
    for (int r : rows) {
      const double d = data.rows[r].covariates[k] - mean;
      ss += d * d;
    }
    s.mean[k] = mean;
    s.sd[k] = std::sqrt(ss / std::max<double>(1.0, static_cast<double>(rows.size()) - 1.0));
  }
  return s;
}

SparseMatrix spacetime_projector(const SparseMatrix& station_rows, const std::vector<int>& station,
                                 const std::vector<int>& day, int T) {
  const int n_mesh = static_cast<int>(station_rows.cols());
  const SparseMatrix rows_major = station_rows.transpose();  // column s = weights of row s
  std::vector<Triplet> trip;
  trip.reserve(station.size() * 3);
  for (size_t i = 0; i < station.size(); ++i) {
    if (day[i] < 0 || day[i] >= T) throw invalid_argument("spacetime_projector: day out of range");
    for (SparseMatrix::InnerIterator it(rows_major, station[i]); it; ++it) {
      trip.emplace_back(static_cast<int>(i), day[i] * n_mesh + it.row(), it.value());
    }
  }
  SparseMatrix out(static_cast<int>(station.size()), T * n_mesh);
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

ModelAssembly assemble(const Dataset& data, const geometry::TriangularMesh& mesh,
                       const AssemblyOptions& options) {
  if (!(options.zero_floor > 0.0)) throw invalid_argument("zero_floor must be positive");
  ModelAssembly m;
  m.T = data.num_days;
  m.n_mesh = mesh.num_vertices();

  std::vector<int> count(data.stations.size(), 0);
  for (const auto& r : data.rows) ++count[r.station];
  std::vector<int> keep_index(data.stations.size(), -1);
  for (size_t s = 0; s < data.stations.size(); ++s) {
    if (count[s] == 0) continue;
    if (count[s] < options.min_obs) {
      ++m.num_dropped_stations;
      continue;
    }
    keep_index[s] = static_cast<int>(m.stations.size());
    m.stations.push_back(data.stations[s]);
  }
  m.n_station = static_cast<int>(m.stations.size());

  std::vector<geometry::Point> locs;
  for (const auto& s : m.stations) locs.push_back(s.location);
  const auto proj = geometry::projector(mesh, locs);
  for (int s = 0; s < m.n_station; ++s) {
    if (proj.outside[s]) {
      throw invalid_argument("station '" + m.stations[s].id + "' lies outside the mesh");
    }
  }
  m.station_projector = proj.A;

  std::vector<int> rows;
  for (size_t r = 0; r < data.rows.size(); ++r) {
    if (keep_index[data.rows[r].station] < 0) continue;
    const auto& row = data.rows[r];
    if (row.covariates.size() != data.covariate_names.size()) {
      throw schema_error("covariates missing for station '" + data.stations[row.station].id + "' on " +
                         format_date({data.year, data.month, row.day + 1}));
    }
    for (size_t k = 0; k < row.covariates.size(); ++k) {
      if (std::isnan(row.covariates[k])) {
        throw schema_error("covariate '" + data.covariate_names[k] + "' missing for station '" +
                           data.stations[row.station].id + "' on " +
                           format_date({data.year, data.month, row.day + 1}));
      }
    }
    rows.push_back(static_cast<int>(r));
  }

  if (rows.empty()) {
    throw invalid_argument("no observations left: every station has fewer than " + std::to_string(options.min_obs) +
                           " observations in the month");
  }
  if (options.standardization) {
    m.standardization = *options.standardization;
    if (m.standardization.names != data.covariate_names) {
      throw schema_error("covariate columns differ from the ones used when fitting");
    }
  } else {
    m.standardization = compute_standardization(data, rows);
  }
  const int p = m.standardization.num_predictors() + 1;
  m.coefficient_names.push_back("intercept");
  for (const auto& n : m.standardization.names) m.coefficient_names.push_back(n);

  const int n = static_cast<int>(rows.size());
  m.y.resize(n);
  m.X.resize(n, p);
  std::vector<double> design(p);
  for (int i = 0; i < n; ++i) {
    const auto& row = data.rows[rows[i]];
    double v = row.value;
    if (v < options.zero_floor) {
      v = options.zero_floor;
      ++m.num_floored;
    }
    m.y[i] = std::log(v);
    m.standardization.apply(row.covariates.data(), design.data());
    for (int k = 0; k < p; ++k) m.X(i, k) = design[k];
    m.station_of.push_back(keep_index[row.station]);
    m.day_of.push_back(row.day);
  }
  m.A_st = spacetime_projector(m.station_projector, m.station_of, m.day_of, m.T);
  return m;
}

}  // namespace pmspde
