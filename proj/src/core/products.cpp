#include "core/products.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "core/csv.hpp"
#include "core/dataset.hpp"
#include "core/error.hpp"
#include "core/stats.hpp"

namespace pmspde::products {

geometry::Point GridSpec::center(int cell) const {
  const int r = cell / ncols, c = cell % ncols;
  return {xll + (c + 0.5) * cell_size, yll + (nrows - r - 0.5) * cell_size};
}

namespace {

int cell_at(const csv::Table& t, size_t r, int col, const GridSpec& grid) {
  const long long id = t.integer(r, col);
  if (id < 0 || id >= grid.num_cells()) {
    throw schema_error(t.source() + ": line " + std::to_string(t.line_of(r)) + ": cell_id " +
                       std::to_string(id) + " outside the grid");
  }
  return static_cast<int>(id);
}

}  // namespace

void load_mask(GridSpec& grid, const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const int cid = t.require("cell_id"), land = t.require("land");
  grid.land.assign(grid.num_cells(), true);
  for (size_t r = 0; r < t.num_rows(); ++r) grid.land[cell_at(t, r, cid, grid)] = t.number(r, land) != 0.0;
}

GridCovariates load_grid_covariates(const std::filesystem::path& path, int year, int month,
                                    const GridSpec& grid) {
  const auto t = csv::Table::read(path);
  const int cid = t.require("cell_id"), cdate = t.require("date");
  GridCovariates out;
  std::vector<int> cols;
  for (size_t c = 0; c < t.header().size(); ++c) {
    if (static_cast<int>(c) == cid || static_cast<int>(c) == cdate) continue;
    cols.push_back(static_cast<int>(c));
    out.names.push_back(t.header()[c]);
  }
  for (size_t r = 0; r < t.num_rows(); ++r) {
    const auto d = parse_date(t.cell(r, cdate));
    if (!d) {
      throw schema_error(t.source() + ": line " + std::to_string(t.line_of(r)) + ": invalid date '" +
                         t.cell(r, cdate) + "'");
    }
    if (d->year != year || d->month != month) continue;
    std::vector<double> v(cols.size());
    for (size_t k = 0; k < cols.size(); ++k) v[k] = t.blank(r, cols[k]) ? NAN : t.number(r, cols[k]);
    out.values[d->day - 1][cell_at(t, r, cid, grid)] = std::move(v);
  }
  return out;
}

GridTargets grid_targets(const GridSpec& grid, const geometry::TriangularMesh& mesh,
                         const Standardization& standardization, const GridCovariates& covariates, int day) {
  if (grid.ncols < 1 || grid.nrows < 1 || !(grid.cell_size > 0.0)) {
    throw invalid_argument("grid: need positive dimensions and cell size");
  }
  if (covariates.names != standardization.names) {
    throw schema_error("grid covariate columns differ from the ones used when fitting");
  }
  GridTargets out;
  out.status.assign(grid.num_cells(), CellStatus::masked);
  const auto it = covariates.values.find(day);
  static const std::map<int, std::vector<double>> none;
  const auto& today = it == covariates.values.end() ? none : it->second;
  const geometry::PointLocator locator(mesh);
  const int p = standardization.num_predictors() + 1;
  std::vector<Triplet> trip;
  std::vector<double> design(p);
  std::vector<double> rows;
  for (int c = 0; c < grid.num_cells(); ++c) {
    if (!grid.is_land(c)) continue;
    std::array<double, 3> w;
    const int tri = locator.locate(grid.center(c), w);
    if (tri < 0) {
      out.status[c] = CellStatus::outside_mesh;
      continue;
    }
    const auto cv = today.find(c);
    if (cv == today.end() ||
        std::any_of(cv->second.begin(), cv->second.end(), [](double v) { return std::isnan(v); })) {
      out.status[c] = CellStatus::missing_covariates;
      continue;
    }
    out.status[c] = CellStatus::predicted;
    const int row = static_cast<int>(out.cells.size());
    out.cells.push_back(c);
    for (int k = 0; k < 3; ++k) {
      if (w[k] != 0.0) trip.emplace_back(row, mesh.triangles[tri][k], w[k]);
    }
    standardization.apply(cv->second.data(), design.data());
    rows.insert(rows.end(), design.begin(), design.end());
  }
  const int m = static_cast<int>(out.cells.size());
  out.A.resize(m, mesh.num_vertices());
  out.A.setFromTriplets(trip.begin(), trip.end());
  out.A.makeCompressed();
  out.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(rows.data(), m, p);
  return out;
}

void predict_grid(const inference::SampleSet& samples, const GridTargets& targets, int day, int batch_size,
                  const std::function<void(std::span<const int>, const RowMatrix&)>& visit) {
  if (batch_size < 1) throw invalid_argument("predict_grid: batch size must be positive");
  if (day < 0 || day >= samples.T) throw invalid_argument("predict_grid: day outside the fitted month");
  if (targets.A.cols() != samples.n_mesh || targets.X.cols() != samples.n_fixed) {
    throw invalid_argument("predict_grid: grid does not match the fitted model");
  }
  const int m = static_cast<int>(targets.cells.size());
  const int S = samples.n_samples();
  const SparseMatrix At = targets.A.transpose();
  const int u0 = day * samples.n_mesh;
  const int b0 = samples.beta_offset();
  RowMatrix draws;
  for (int start = 0; start < m; start += batch_size) {
    const int len = std::min(batch_size, m - start);
    draws.resize(S, len);
    for (int k = 0; k < S; ++k) {
      const double* x = samples.latent.row(k).data();
      for (int j = 0; j < len; ++j) {
        const int i = start + j;
        double eta = 0.0;
        for (int q = 0; q < samples.n_fixed; ++q) eta += targets.X(i, q) * x[b0 + q];
        for (SparseMatrix::InnerIterator it(At, i); it; ++it) eta += it.value() * x[u0 + it.row()];
        draws(k, j) = std::exp(eta);
      }
    }
    visit(std::span<const int>(targets.cells.data() + start, len), draws);
  }
}

double rwpir(std::span<const double> samples) {
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double q2 = stats::quantile_sorted(v, 0.5);
  return (stats::quantile_sorted(v, 0.75) - stats::quantile_sorted(v, 0.25)) / q2;
}

double exceedance_probability(std::span<const double> samples, double threshold) {
  if (samples.empty()) return NAN;
  const auto n = std::count_if(samples.begin(), samples.end(), [threshold](double v) { return v > threshold; });
  return static_cast<double>(n) / static_cast<double>(samples.size());
}

CellSummary summarize_cell(std::span<const double> samples) {
  CellSummary s;
  const size_t n = samples.size();
  if (n == 0) return s;
  std::vector<double> v(samples.begin(), samples.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  s.q1 = stats::quantile_sorted(v, 0.25);
  s.median = stats::quantile_sorted(v, 0.5);
  s.q3 = stats::quantile_sorted(v, 0.75);
  s.rwpir = (s.q3 - s.q1) / s.median;
  return s;
}

Statistic Statistic::parse(const std::string& text) {
  if (text == "mean") return {};
  if (text.size() > 1 && text[0] == 'p') {
    try {
      size_t used = 0;
      const double p = std::stod(text.substr(1), &used);
      if (used == text.size() - 1 && p > 0.0 && p <= 100.0) return {percentile, p};
    } catch (const std::exception&) {
    }
  }
  throw invalid_argument("unknown statistic '" + text + "' (use mean or pNN.N, e.g. p90.4)");
}

std::string Statistic::name() const {
  if (kind == mean) return "mean";
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%g", p);
  return buf;
}

RowMatrix aggregate_days(const std::vector<RowMatrix>& daily, const Statistic& st) {
  if (daily.empty()) throw invalid_argument("aggregate_days: no days");
  const auto S = daily[0].rows(), m = daily[0].cols();
  for (const auto& d : daily) {
    if (d.rows() != S || d.cols() != m) {
      throw invalid_argument("aggregate_days: days have different sample counts or cells");
    }
  }
  RowMatrix out(S, m);
  if (st.kind == Statistic::mean) {
    out.setZero();
    for (const auto& d : daily) out += d;
    out /= static_cast<double>(daily.size());
    return out;
  }
  std::vector<double> v(daily.size());
  for (Eigen::Index k = 0; k < S; ++k) {
    for (Eigen::Index j = 0; j < m; ++j) {
      for (size_t t = 0; t < daily.size(); ++t) v[t] = daily[t](k, j);
      std::sort(v.begin(), v.end());
      out(k, j) = stats::quantile_sorted(v, st.p / 100.0);
    }
  }
  return out;
}

std::vector<ZoneCell> load_zones(const std::filesystem::path& path) {
  const auto t = csv::Table::read(path);
  const int cid = t.require("cell_id"), zid = t.require("zone_id"), pop = t.require("population");
  std::vector<ZoneCell> out;
  std::set<long long> seen;
  for (size_t r = 0; r < t.num_rows(); ++r) {
    ZoneCell z{static_cast<int>(t.integer(r, cid)), t.cell(r, zid), t.number(r, pop)};
    const std::string where = t.source() + ": line " + std::to_string(t.line_of(r));
    if (z.cell < 0) throw schema_error(where + ": negative cell_id");
    if (z.population < 0.0) throw schema_error(where + ": negative population");
    if (!seen.insert(z.cell).second) throw schema_error(where + ": cell assigned to more than one zone");
    out.push_back(std::move(z));
  }
  return out;
}

std::map<std::string, double> population_exposure(std::span<const double> c, const std::vector<ZoneCell>& zones) {
  std::map<std::string, std::pair<double, double>> acc;  // (sum p c, sum p)
  std::set<std::string> broken;
  for (const auto& z : zones) {
    auto& a = acc[z.zone];
    if (z.population == 0.0) continue;
    if (z.cell >= static_cast<int>(c.size()) || std::isnan(c[z.cell])) {
      broken.insert(z.zone);
      continue;
    }
    a.first += z.population * c[z.cell];
    a.second += z.population;
  }
  std::map<std::string, double> out;
  for (const auto& [zone, a] : acc) {
    out[zone] = broken.count(zone) || !(a.second > 0.0) ? NAN : a.first / a.second;
  }
  return out;
}

void write_asc(const GridSpec& grid, std::span<const double> values, const std::filesystem::path& path) {
  if (static_cast<int>(values.size()) != grid.num_cells()) throw invalid_argument("write_asc: wrong value count");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "ncols " << grid.ncols << "\nnrows " << grid.nrows << "\nxllcorner " << csv::format_double(grid.xll)
      << "\nyllcorner " << csv::format_double(grid.yll) << "\ncellsize " << csv::format_double(grid.cell_size)
      << "\nNODATA_value " << nodata << "\n";
  for (int r = 0; r < grid.nrows; ++r) {
    for (int c = 0; c < grid.ncols; ++c) {
      const double v = values[static_cast<size_t>(r) * grid.ncols + c];
      if (c) out << ' ';
      if (std::isnan(v)) {
        out << nodata;
      } else {
        out << csv::format_double(v);
      }
    }
    out << '\n';
  }
  out.close();
  if (!out) throw io_error("error writing " + path.string());
}

void write_cell_csv(const GridSpec& grid, std::span<const double> values, const std::filesystem::path& path) {
  if (static_cast<int>(values.size()) != grid.num_cells()) throw invalid_argument("write_cell_csv: wrong value count");
  csv::Writer w(path);
  w.header({"cell_id", "value"});
  for (int c = 0; c < grid.num_cells(); ++c) {
    if (!grid.is_land(c)) continue;
    w.cells({std::to_string(c), std::isnan(values[c]) ? std::string() : csv::format_double(values[c])});
  }
  w.close();
}

}  // namespace pmspde::products
