#include "core/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/products.hpp"
#include "core/rng.hpp"
#include "core/simulate.hpp"
#include "core/stats.hpp"

namespace pmspde::pipeline {

namespace fs = std::filesystem;
using products::RowMatrix;

namespace {

LogSink& sink() {
  static LogSink s;
  return s;
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw invalid_argument(what + ": no path configured");
  if (!fs::is_regular_file(path)) throw io_error("missing " + what + ": " + path.string());
}

fs::path output_dir(const config::Config& cfg) {
  const fs::path dir = cfg.path("paths.output");
  if (dir.empty()) throw invalid_argument("paths.output is empty");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void echo_config(const config::Config& cfg, const fs::path& dir) { cfg.save(dir / "config.resolved.toml"); }

struct HullStats {
  double area = 0.0;
  double diameter = 0.0;
};

HullStats hull_stats(std::span<const geometry::Point> points) {
  const auto hull = geometry::convex_hull(std::vector<geometry::Point>(points.begin(), points.end()));
  HullStats h;
  for (size_t i = 0; i < hull.size(); ++i) {
    const auto& p = hull[i];
    const auto& q = hull[(i + 1) % hull.size()];
    h.area += 0.5 * (p.x * q.y - q.x * p.y);
    for (size_t j = i + 1; j < hull.size(); ++j) {
      h.diameter = std::max(h.diameter, std::hypot(hull[j].x - p.x, hull[j].y - p.y));
    }
  }
  return h;
}

int checked_int(const config::Config& cfg, const std::string& key, long long lo, long long hi) {
  const long long v = cfg.integer(key);
  if (v < lo || v > hi) {
    throw invalid_argument("config key '" + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "], got " + std::to_string(v));
  }
  return static_cast<int>(v);
}

double positive(const config::Config& cfg, const std::string& key) {
  const double v = cfg.num(key);
  if (!(v > 0.0) || !std::isfinite(v)) throw invalid_argument("config key '" + key + "' must be positive");
  return v;
}

std::string date_label(int year, int month, int day) { return format_date({year, month, day + 1}); }

std::string month_label(int year, int month) {
  std::ostringstream s;
  s << year << '-' << (month < 10 ? "0" : "") << month;
  return s.str();
}

Dataset load_month(const config::Config& cfg) {
  DatasetPaths paths;
  paths.stations = cfg.path("paths.stations");
  paths.observations = cfg.path("paths.observations");
  require_file(paths.stations, "stations file");
  require_file(paths.observations, "observations file");
  if (cfg.has("paths.covariates")) {
    paths.covariates = cfg.path("paths.covariates");
    require_file(paths.covariates, "covariates file");
  }
  const int month = checked_int(cfg, "data.month", 1, 12);
  std::optional<int> year;
  if (cfg.has("data.year")) year = checked_int(cfg, "data.year", 1, 9999);
  Dataset data = load_dataset(paths, month, year);
  log("loaded " + std::to_string(data.rows.size()) + " observations of " + std::to_string(data.stations.size()) +
      " stations for " + month_label(data.year, data.month));
  return data;
}

geometry::TriangularMesh month_mesh(const config::Config& cfg, const Dataset& data) {
  if (cfg.has("paths.mesh_vertices") || cfg.has("paths.mesh_triangles")) {
    const fs::path v = cfg.path("paths.mesh_vertices");
    const fs::path t = cfg.path("paths.mesh_triangles");
    require_file(v, "mesh vertex file");
    require_file(t, "mesh triangle file");
    auto mesh = geometry::load_mesh(v, t);
    log("loaded mesh with " + std::to_string(mesh.num_vertices()) + " vertices");
    return mesh;
  }
  const auto locs = observed_locations(data);
  auto mesh = station_mesh(cfg, locs);
  log("built mesh with " + std::to_string(mesh.num_vertices()) + " vertices and " +
      std::to_string(mesh.num_triangles()) + " triangles");
  return mesh;
}

void save_standardization(const Standardization& s, const fs::path& path) {
  csv::Writer w(path);
  w.header({"name", "mean", "sd", "scaled"});
  for (size_t k = 0; k < s.names.size(); ++k) w.row(s.names[k], s.mean[k], s.sd[k], s.scaled[k] ? 1 : 0);
  w.close();
}

Standardization load_standardization(const fs::path& path) {
  const auto t = csv::Table::read(path);
  const int name = t.require("name"), mean = t.require("mean"), sd = t.require("sd"), scaled = t.require("scaled");
  Standardization s;
  for (size_t r = 0; r < t.num_rows(); ++r) {
    s.names.push_back(t.cell(r, name));
    s.mean.push_back(t.number(r, mean));
    s.sd.push_back(t.number(r, sd));
    s.scaled.push_back(t.integer(r, scaled) != 0);
  }
  return s;
}

// Column-wise summaries of a draws matrix.
struct DrawSummary {
  double mean, sd, lower, upper;
};

DrawSummary summarize_draws(const Eigen::Ref<const Eigen::VectorXd>& column) {
  std::vector<double> v(column.data(), column.data() + column.size());
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std::sort(v.begin(), v.end());
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd, stats::quantile_sorted(v, 0.025), stats::quantile_sorted(v, 0.975)};
}

void write_fit_outputs(const config::Config& cfg, MonthFit& fit, const Dataset& data, const fs::path& dir) {
  const auto& m = *fit.assembly;
  const auto& s = fit.samples;

  {
    csv::Writer w(dir / "hyperparameters.csv");
    w.header({"parameter", "mode", "mean", "sd"});
    for (const auto& p : fit.summaries) w.row(p.name, p.mode, p.mean, p.sd);
    w.close();
  }
  {
    csv::Writer w(dir / "hyper_points.csv");
    w.header({"point", "a", "rho", "sigma_omega", "sigma_z", "sigma_epsilon", "log_posterior", "weight"});
    for (size_t i = 0; i < fit.points.size(); ++i) {
      const auto& p = fit.points[i];
      w.row(static_cast<int>(i), p.theta.a, p.theta.rho, p.theta.sigma_omega, p.theta.sigma_z, p.theta.sigma_epsilon,
            p.log_posterior, p.weight);
    }
    w.close();
  }
  {
    csv::Writer w(dir / "fixed_effects.csv");
    w.header({"name", "mean", "sd", "q025", "q975"});
    for (int j = 0; j < m.p(); ++j) {
      const auto d = summarize_draws(s.latent.col(s.beta_offset() + j));
      w.row(m.coefficient_names[j], d.mean, d.sd, d.lower, d.upper);
    }
    w.close();
  }
  {
    csv::Writer w(dir / "latent_summary.csv");
    w.header({"index", "block", "day", "id", "mean", "sd"});
    for (int i = 0; i < s.latent_dim(); ++i) {
      const auto d = summarize_draws(s.latent.col(i));
      if (i < s.z_offset()) {
        w.row(i, "u", date_label(data.year, data.month, i / s.n_mesh), std::to_string(i % s.n_mesh), d.mean, d.sd);
      } else if (i < s.beta_offset()) {
        w.row(i, "z", "", m.stations[i - s.z_offset()].id, d.mean, d.sd);
      } else {
        w.row(i, "beta", "", m.coefficient_names[i - s.beta_offset()], d.mean, d.sd);
      }
    }
    w.close();
  }
  save_standardization(m.standardization, dir / "standardization.csv");
  geometry::save_mesh(fit.mesh, dir / "mesh_vertices.csv", dir / "mesh_triangles.csv");
  inference::save_samples(s, dir / "samples.bin");
  {
    csv::Writer w(dir / "fit_summary.csv");
    w.header({"key", "value"});
    w.row("year", data.year);
    w.row("month", data.month);
    w.row("days", m.T);
    w.row("mesh_vertices", m.n_mesh);
    w.row("stations", m.n_station);
    w.row("observations", m.n_obs());
    w.row("floored_values", m.num_floored);
    w.row("dropped_stations", m.num_dropped_stations);
    w.row("latent_dim", m.latent_dim());
    w.row("iterations", fit.opt.iterations);
    w.row("evaluations", fit.opt.evaluations);
    w.row("converged", fit.opt.converged ? 1 : 0);
    w.row("curvature_positive_definite", fit.opt.curvature_pd ? 1 : 0);
    w.row("log_posterior", fit.opt.objective);
    w.row("integration", cfg.str("inference.integration"));
    w.row("hyper_points", static_cast<int>(fit.points.size()));
    w.row("samples", s.n_samples());
    w.close();
  }

  // Empirical variograms of the observed log values and of the residuals.
  std::vector<geometry::Point> locs;
  for (const auto& st : m.stations) locs.push_back(st.location);
  std::vector<validation::Residual> observed;
  for (int i = 0; i < m.n_obs(); ++i) observed.push_back({m.station_of[i], m.day_of[i], m.y[i]});
  const double width = positive(cfg, "variogram.bin_width");
  const double max_h = positive(cfg, "variogram.max_distance");
  const int max_lag = checked_int(cfg, "variogram.max_lag", 0, 366);
  validation::write_variogram(validation::st_variogram(observed, locs, width, max_h, max_lag),
                              dir / "variogram_observed.csv");
  validation::write_variogram(validation::st_variogram(fit_residuals(fit), locs, width, max_h, max_lag),
                              dir / "variogram_residuals.csv");
}

// Everything grid prediction needs from a previous fit.
struct FitArchive {
  geometry::TriangularMesh mesh;
  Standardization standardization;
  inference::SampleSet samples;
  int year = 0;
  int month = 0;
};

FitArchive load_archive(const fs::path& dir) {
  const fs::path samples = dir / "samples.bin";
  require_file(samples, "sample archive (run fit first)");
  for (const char* f : {"mesh_vertices.csv", "mesh_triangles.csv", "standardization.csv", "fit_summary.csv"}) {
    require_file(dir / f, "fit output");
  }
  FitArchive a;
  a.mesh = geometry::load_mesh(dir / "mesh_vertices.csv", dir / "mesh_triangles.csv");
  a.standardization = load_standardization(dir / "standardization.csv");
  a.samples = inference::load_samples(samples);
  const auto t = csv::Table::read(dir / "fit_summary.csv");
  const int key = t.require("key"), value = t.require("value");
  for (size_t r = 0; r < t.num_rows(); ++r) {
    if (t.cell(r, key) == "year") a.year = static_cast<int>(t.integer(r, value));
    if (t.cell(r, key) == "month") a.month = static_cast<int>(t.integer(r, value));
  }
  if (a.month < 1 || a.month > 12 || a.year < 1) throw schema_error(dir.string() + "/fit_summary.csv: no year/month");
  if (a.samples.n_mesh != a.mesh.num_vertices() ||
      a.samples.n_fixed != a.standardization.num_predictors() + 1) {
    throw schema_error("sample archive does not match the mesh or standardization in " + dir.string());
  }
  log("loaded " + std::to_string(a.samples.n_samples()) + " posterior samples");
  return a;
}

products::GridSpec grid_spec(const config::Config& cfg) {
  products::GridSpec g;
  g.xll = cfg.num("grid.xll");
  g.yll = cfg.num("grid.yll");
  g.cell_size = positive(cfg, "grid.cell_size");
  g.ncols = checked_int(cfg, "grid.ncols", 1, 1'000'000);
  g.nrows = checked_int(cfg, "grid.nrows", 1, 1'000'000);
  if (static_cast<long long>(g.ncols) * g.nrows > 200'000'000LL) throw invalid_argument("grid has too many cells");
  if (cfg.has("paths.grid_mask")) {
    const fs::path mask = cfg.path("paths.grid_mask");
    require_file(mask, "grid mask");
    products::load_mask(g, mask);
  }
  return g;
}

products::GridCovariates grid_covariates(const config::Config& cfg, const products::GridSpec& grid,
                                         const FitArchive& a) {
  if (cfg.has("paths.grid_covariates")) {
    const fs::path p = cfg.path("paths.grid_covariates");
    require_file(p, "grid covariates file");
    return products::load_grid_covariates(p, a.year, a.month, grid);
  }
  if (a.standardization.num_predictors() > 0) {
    throw invalid_argument("paths.grid_covariates is required: the model has predictors");
  }
  // Intercept-only model: every land cell is predictable.
  products::GridCovariates cov;
  for (int d = 0; d < a.samples.T; ++d) {
    auto& day = cov.values[d];
    for (int c = 0; c < grid.num_cells(); ++c) {
      if (grid.is_land(c)) day[c] = {};
    }
  }
  return cov;
}

// grid.days, or by default every day with grid covariates.
std::vector<int> selected_days(const config::Config& cfg, int T, const products::GridCovariates& cov) {
  std::vector<int> days;
  for (double d : cfg.numbers("grid.days")) {
    if (d != std::floor(d) || d < 1 || d > T) {
      throw invalid_argument("grid.days: day " + csv::format_double(d) + " is outside 1.." + std::to_string(T));
    }
    days.push_back(static_cast<int>(d) - 1);
  }
  if (days.empty()) {
    for (int d = 0; d < T; ++d) {
      const auto it = cov.values.find(d);
      if (it != cov.values.end() && !it->second.empty()) days.push_back(d);
    }
    if (days.empty()) throw invalid_argument("no grid covariates for any day of the month");
    if (static_cast<int>(days.size()) < T) {
      log("mapping the " + std::to_string(days.size()) + " of " + std::to_string(T) + " days with grid covariates");
    }
  }
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  return days;
}

// Walks the grid in chunks of cells. For each chunk, `visit` receives one
// samples x chunk matrix per selected day holding exp(linear predictor), with
// NaN columns where the cell is not predicted that day.
void grid_chunks(const inference::SampleSet& samples, const std::vector<products::GridTargets>& targets,
                 const std::vector<int>& days, int batch_size,
                 const std::function<void(const std::vector<int>&, const std::vector<RowMatrix>&)>& visit) {
  std::vector<int> cells;
  for (const auto& t : targets) cells.insert(cells.end(), t.cells.begin(), t.cells.end());
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> rows_major;
  for (const auto& t : targets) rows_major.emplace_back(t.A);

  const int chunk = std::max(1, batch_size / std::max<int>(1, static_cast<int>(days.size())));
  const int S = samples.n_samples();
  for (size_t start = 0; start < cells.size(); start += chunk) {
    const size_t n = std::min<size_t>(chunk, cells.size() - start);
    const std::vector<int> block(cells.begin() + start, cells.begin() + start + n);
    std::vector<RowMatrix> per_day;
    for (size_t di = 0; di < days.size(); ++di) {
      const auto& t = targets[di];
      RowMatrix draws = RowMatrix::Constant(S, static_cast<int>(n), NAN);
      products::GridTargets sub;
      std::vector<int> column;
      std::vector<Triplet> trip;
      std::vector<int> source_rows;
      for (size_t j = 0; j < n; ++j) {
        const auto it = std::lower_bound(t.cells.begin(), t.cells.end(), block[j]);
        if (it == t.cells.end() || *it != block[j]) continue;
        const int r = static_cast<int>(it - t.cells.begin());
        const int row = static_cast<int>(sub.cells.size());
        sub.cells.push_back(block[j]);
        column.push_back(static_cast<int>(j));
        source_rows.push_back(r);
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator e(rows_major[di], r); e; ++e) {
          trip.emplace_back(row, static_cast<int>(e.col()), e.value());
        }
      }
      if (!sub.cells.empty()) {
        sub.A.resize(static_cast<int>(sub.cells.size()), t.A.cols());
        sub.A.setFromTriplets(trip.begin(), trip.end());
        sub.X.resize(static_cast<int>(sub.cells.size()), t.X.cols());
        for (size_t k = 0; k < source_rows.size(); ++k) sub.X.row(static_cast<int>(k)) = t.X.row(source_rows[k]);
        int offset = 0;
        products::predict_grid(samples, sub, days[di], static_cast<int>(sub.cells.size()),
                               [&](std::span<const int> batch, const RowMatrix& d) {
                                 for (size_t k = 0; k < batch.size(); ++k) {
                                   draws.col(column[offset + k]) = d.col(static_cast<int>(k));
                                 }
                                 offset += static_cast<int>(batch.size());
                               });
      }
      per_day.push_back(std::move(draws));
    }
    visit(block, per_day);
  }
}

std::vector<products::GridTargets> day_targets(const products::GridSpec& grid, const FitArchive& a,
                                               const products::GridCovariates& cov, const std::vector<int>& days) {
  std::vector<products::GridTargets> out;
  for (int d : days) {
    out.push_back(products::grid_targets(grid, a.mesh, a.standardization, cov, d));
    const auto& st = out.back().status;
    const auto count = [&](products::CellStatus s) { return std::count(st.begin(), st.end(), s); };
    log(date_label(a.year, a.month, d) + ": " + std::to_string(out.back().cells.size()) + " cells predicted, " +
        std::to_string(count(products::CellStatus::outside_mesh)) + " outside the mesh, " +
        std::to_string(count(products::CellStatus::missing_covariates)) + " missing covariates");
  }
  return out;
}

// Columns of `per_day` without a NaN on any day, gathered into per-day
// matrices for aggregation.
std::vector<int> complete_columns(const std::vector<RowMatrix>& per_day) {
  std::vector<int> out;
  if (per_day.empty()) return out;
  for (int j = 0; j < per_day[0].cols(); ++j) {
    bool ok = true;
    for (const auto& m : per_day) ok = ok && !std::isnan(m(0, j));
    if (ok) out.push_back(j);
  }
  return out;
}

RowMatrix gather_columns(const RowMatrix& m, const std::vector<int>& cols) {
  RowMatrix out(m.rows(), static_cast<int>(cols.size()));
  for (size_t k = 0; k < cols.size(); ++k) out.col(static_cast<int>(k)) = m.col(cols[k]);
  return out;
}

void write_map(const products::GridSpec& grid, const std::vector<double>& values, const fs::path& stem) {
  products::write_asc(grid, values, stem.string() + ".asc");
  products::write_cell_csv(grid, values, stem.string() + ".csv");
}

struct MapSet {
  std::vector<double> mean, sd, rwpir;
  explicit MapSet(int cells) : mean(cells, NAN), sd(cells, NAN), rwpir(cells, NAN) {}
  void set(int cell, const products::CellSummary& s) {
    mean[cell] = s.mean;
    sd[cell] = s.sd;
    rwpir[cell] = s.rwpir;
  }
  void write(const products::GridSpec& grid, const fs::path& dir, const std::string& prefix) const {
    write_map(grid, mean, dir / (prefix + "_mean"));
    write_map(grid, sd, dir / (prefix + "_sd"));
    write_map(grid, rwpir, dir / (prefix + "_rwpir"));
  }
};

std::vector<double> column_vector(const RowMatrix& m, int j) {
  std::vector<double> v(m.rows());
  for (int k = 0; k < m.rows(); ++k) v[k] = m(k, j);
  return v;
}

}  // namespace

void set_log_sink(LogSink s) { sink() = std::move(s); }

void log(const std::string& message) {
  if (sink()) sink()(message);
}

geometry::MeshOptions mesh_options(const config::Config& cfg, std::span<const geometry::Point> stations,
                                   double auto_inner_edge) {
  const HullStats hull = hull_stats(stations);
  if (!(hull.area > 0.0)) throw invalid_argument("mesh: the stations are collinear or fewer than three");
  geometry::MeshOptions o;
  o.inner_max_edge = cfg.num("mesh.inner_max_edge");
  if (o.inner_max_edge <= 0.0) {
    o.inner_max_edge = auto_inner_edge > 0.0 ? auto_inner_edge : std::sqrt(hull.area / checked_int(cfg, "mesh.target_nodes", 10, 10'000'000));
  }
  o.outer_max_edge = cfg.num("mesh.outer_max_edge");
  if (o.outer_max_edge <= 0.0) o.outer_max_edge = 2.5 * o.inner_max_edge;
  o.cutoff = cfg.num("mesh.cutoff");
  if (o.cutoff < 0.0) o.cutoff = o.inner_max_edge / 5.0;
  o.extension = cfg.num("mesh.extension");
  if (o.extension < 0.0) o.extension = 0.2 * hull.diameter;
  return o;
}

geometry::TriangularMesh station_mesh(const config::Config& cfg, std::span<const geometry::Point> stations) {
  auto opts = mesh_options(cfg, stations);
  auto mesh = geometry::build_mesh(stations, opts);
  if (cfg.num("mesh.inner_max_edge") > 0.0) return mesh;
  // Rescale the automatic edge length until the vertex count is near the target.
  const double target = static_cast<double>(cfg.integer("mesh.target_nodes"));
  for (int round = 0; round < 6; ++round) {
    const double ratio = mesh.num_vertices() / target;
    if (std::abs(ratio - 1.0) < 0.05) break;
    opts = mesh_options(cfg, stations, opts.inner_max_edge * std::sqrt(ratio));
    mesh = geometry::build_mesh(stations, opts);
  }
  return mesh;
}

FitSettings fit_settings(const config::Config& cfg, std::span<const geometry::Point> stations) {
  FitSettings s;
  s.assembly.min_obs = checked_int(cfg, "data.min_obs", 1, 100000);
  s.assembly.zero_floor = positive(cfg, "data.zero_floor");

  auto& p = s.priors;
  p.sigma_epsilon = {positive(cfg, "priors.sigma_epsilon_u"), positive(cfg, "priors.sigma_epsilon_alpha")};
  p.sigma_z = {positive(cfg, "priors.sigma_z_u"), positive(cfg, "priors.sigma_z_alpha")};
  p.matern = {positive(cfg, "priors.rho_u"), positive(cfg, "priors.rho_alpha"), positive(cfg, "priors.sigma_omega_u"),
              positive(cfg, "priors.sigma_omega_alpha")};
  p.ar1 = {cfg.num("priors.a_u"), positive(cfg, "priors.a_alpha")};
  p.fixed_effect_precision = positive(cfg, "priors.fixed_effect_precision");
  for (double alpha : {p.sigma_epsilon.alpha_sigma, p.sigma_z.alpha_sigma, p.matern.alpha_rho,
                       p.matern.alpha_sigma, p.ar1.alpha_a}) {
    if (alpha >= 1.0) throw invalid_argument("prior tail probabilities must lie in (0, 1)");
  }

  s.optimizer.gtol = positive(cfg, "inference.gtol");
  s.optimizer.max_iter = checked_int(cfg, "inference.max_iter", 1, 100000);
  s.optimizer.fd_step = positive(cfg, "inference.fd_step");
  s.optimizer.hessian_step = positive(cfg, "inference.hessian_step");

  s.init.a = cfg.num("inference.init_a");
  s.init.rho = cfg.num("inference.init_rho");
  if (s.init.rho <= 0.0) s.init.rho = 0.2 * hull_stats(stations).diameter;
  s.init.sigma_omega = cfg.num("inference.init_sigma_omega");
  s.init.sigma_z = cfg.num("inference.init_sigma_z");
  s.init.sigma_epsilon = cfg.num("inference.init_sigma_epsilon");
  if (!inference::is_valid(s.init)) {
    throw invalid_argument("optimizer start is not a valid parameter point: " + inference::describe(s.init));
  }

  const std::string integ = cfg.str("inference.integration");
  if (integ == "empirical_bayes") {
    s.integration = inference::Integration::empirical_bayes;
  } else if (integ == "ccd") {
    s.integration = inference::Integration::ccd;
  } else {
    throw invalid_argument("inference.integration must be empirical_bayes or ccd, got '" + integ + "'");
  }
  s.ccd_f0 = positive(cfg, "inference.ccd_f0");
  s.n_samples = checked_int(cfg, "inference.n_samples", 1, 10'000'000);
  s.warm_start_days = checked_int(cfg, "inference.warm_start_days", 0, 366);
  s.max_latent = cfg.integer("inference.max_latent");
  const long long seed = cfg.integer("run.seed");
  if (seed < 0) throw invalid_argument("run.seed must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  s.threads = checked_int(cfg, "run.threads", 1, 1024);
  return s;
}

std::vector<geometry::Point> observed_locations(const Dataset& data) {
  std::vector<bool> seen(data.stations.size(), false);
  for (const auto& r : data.rows) seen[r.station] = true;
  std::vector<geometry::Point> out;
  for (size_t s = 0; s < data.stations.size(); ++s) {
    if (seen[s]) out.push_back(data.stations[s].location);
  }
  return out;
}

namespace {

// Mode of a fit to the first days of the month, with its inverse Hessian
// rescaled to the full fit: information about sigma_z grows with the number
// of stations, about the other parameters with the number of observations.
std::optional<std::pair<inference::HyperParameters, inference::Matrix5>> warm_start(
    const Dataset& data, const geometry::TriangularMesh& mesh, const geometry::FemMatrices& fem,
    const FitSettings& settings, const ModelAssembly& full) {
  Dataset head = data;
  head.num_days = settings.warm_start_days;
  std::erase_if(head.rows, [&](const ObservationRow& r) { return r.day >= head.num_days; });
  auto options = settings.assembly;
  options.min_obs = 1;
  ModelAssembly m;
  try {
    m = assemble(head, mesh, options);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (m.n_obs() == 0) return std::nullopt;
  inference::LatentModel model(m, fem, settings.priors, settings.max_latent);
  auto optimizer = settings.optimizer;
  optimizer.compute_curvature = false;
  optimizer.on_iteration = nullptr;
  const auto opt = inference::optimize_hyperparameters(model, settings.init, optimizer);
  log("warm start from the first " + std::to_string(head.num_days) + " days (" +
      std::to_string(opt.evaluations) + " evaluations): " + inference::describe(opt.mode));
  inference::Vector5 scale = inference::Vector5::Constant(std::sqrt(static_cast<double>(m.n_obs()) / full.n_obs()));
  scale[3] = std::sqrt(static_cast<double>(m.n_station) / full.n_station);
  return std::make_pair(opt.mode, inference::Matrix5(scale.asDiagonal() * opt.inverse_hessian * scale.asDiagonal()));
}

}  // namespace

MonthFit fit_month(const Dataset& data, geometry::TriangularMesh mesh, const FitSettings& settings) {
  MonthFit f;
  f.mesh = std::move(mesh);
  f.fem = std::make_unique<geometry::FemMatrices>(geometry::fem_matrices(f.mesh));
  f.assembly = std::make_unique<ModelAssembly>(assemble(data, f.mesh, settings.assembly));
  const auto& m = *f.assembly;
  if (m.n_obs() == 0) throw invalid_argument("no observations left in the month after dropping stations");
  log("model: " + std::to_string(m.n_obs()) + " observations, " + std::to_string(m.n_station) + " stations, " +
      std::to_string(m.T) + " days, latent dimension " + std::to_string(m.latent_dim()));
  f.model = std::make_unique<inference::LatentModel>(m, *f.fem, settings.priors, settings.max_latent);
  auto optimizer = settings.optimizer;
  if (!optimizer.on_iteration) {
    optimizer.on_iteration = [&f](int iter, double value, const inference::HyperParameters& theta) {
      log("iteration " + std::to_string(iter) + ": log posterior " + csv::format_double(value) + " at " +
          inference::describe(theta) + " (" + std::to_string(f.model->evaluations()) + " evaluations)");
    };
  }
  auto init = settings.init;
  if (settings.warm_start_days > 0 && data.num_days >= 2 * settings.warm_start_days) {
    if (auto ws = warm_start(data, f.mesh, *f.fem, settings, m)) {
      init = ws->first;
      optimizer.initial_inverse_hessian = ws->second;
    }
  }
  f.opt = inference::optimize_hyperparameters(*f.model, init, optimizer);
  log("mode after " + std::to_string(f.opt.iterations) + " iterations (" + std::to_string(f.opt.evaluations) +
      " evaluations): " + inference::describe(f.opt.mode) + (f.opt.converged ? "" : " [not converged]"));
  f.points = inference::explore_hyperparameters(*f.model, f.opt, settings.integration, settings.ccd_f0);
  f.summaries = inference::summarize_hyperparameters(f.opt, f.points);
  if (settings.n_samples > 0) {
    f.samples = inference::sample_posterior(*f.model, f.points, settings.n_samples, settings.seed, settings.threads);
    log("drew " + std::to_string(settings.n_samples) + " posterior samples");
  }
  return f;
}

std::vector<validation::Residual> fit_residuals(MonthFit& fit) {
  const Eigen::VectorXd mean = inference::mixture_mean(*fit.model, fit.points);
  const Eigen::VectorXd eta = fit.model->design() * mean;
  const auto& m = *fit.assembly;
  std::vector<validation::Residual> out;
  out.reserve(m.n_obs());
  for (int i = 0; i < m.n_obs(); ++i) out.push_back({m.station_of[i], m.day_of[i], m.y[i] - eta[i]});
  return out;
}

TargetSummary summarize_observations(const inference::SampleSet& samples, const ModelAssembly& m,
                                     bool fresh_station_effects, std::uint64_t seed, int chunk) {
  const int n = m.n_obs();
  std::vector<Triplet> trip;
  for (int i = 0; i < n; ++i) trip.emplace_back(i, m.station_of[i], 1.0);
  SparseMatrix select(n, m.n_station);
  select.setFromTriplets(trip.begin(), trip.end());
  const Eigen::SparseMatrix<double, Eigen::RowMajor> A = select * m.station_projector;

  TargetSummary out;
  out.observed = m.y.array().exp();
  for (auto* s : {&out.predictive, &out.linear}) {
    s->mean.resize(n);
    s->lower.resize(n);
    s->upper.resize(n);
  }
  for (int start = 0; start < n; start += chunk) {
    const int len = std::min(chunk, n - start);
    inference::PredictionTargets t;
    t.A = A.middleRows(start, len);
    t.X = m.X.middleRows(start, len);
    t.day.assign(m.day_of.begin() + start, m.day_of.begin() + start + len);
    const std::vector<int> station(m.station_of.begin() + start, m.station_of.begin() + start + len);
    if (fresh_station_effects) {
      t.station.assign(len, -1);
      t.new_station = station;
    } else {
      t.station = station;
      t.new_station.assign(len, -1);
    }
    const auto p = inference::predict(samples, t, seed, static_cast<std::uint64_t>(start));
    const auto sp = validation::backtransform(p.predictive);
    const auto sl = validation::backtransform(p.linear);
    out.predictive.mean.segment(start, len) = sp.mean;
    out.predictive.lower.segment(start, len) = sp.lower;
    out.predictive.upper.segment(start, len) = sp.upper;
    out.linear.mean.segment(start, len) = sl.mean;
    out.linear.lower.segment(start, len) = sl.lower;
    out.linear.upper.segment(start, len) = sl.upper;
  }
  return out;
}

std::vector<CvTrial> cross_validate(const Dataset& data, const geometry::TriangularMesh& mesh,
                                    const FitSettings& settings, const validation::SplitOptions& split, int trials) {
  // Split over the stations observed in the month.
  std::vector<bool> seen(data.stations.size(), false);
  for (const auto& r : data.rows) seen[r.station] = true;
  std::vector<int> active;
  std::vector<Station> active_stations;
  for (size_t s = 0; s < data.stations.size(); ++s) {
    if (!seen[s]) continue;
    active.push_back(static_cast<int>(s));
    active_stations.push_back(data.stations[s]);
  }

  std::vector<CvTrial> out;
  for (int trial = 0; trial < trials; ++trial) {
    CvTrial r;
    r.plan = validation::stratified_split(active_stations, split, settings.seed, trial);
    for (const auto& w : r.plan.warnings) log("trial " + std::to_string(trial + 1) + ": " + w);
    auto to_data = [&](std::vector<int> idx) {
      for (int& i : idx) i = active[i];
      return idx;
    };
    const Dataset train = subset_stations(data, to_data(r.plan.training));
    const Dataset held_out = subset_stations(data, to_data(r.plan.validation_all()));
    log("trial " + std::to_string(trial + 1) + ": " + std::to_string(train.stations.size()) + " training and " +
        std::to_string(held_out.stations.size()) + " validation stations");

    MonthFit fit = fit_month(train, mesh, settings);
    r.mode = fit.opt.mode;
    const auto tr = summarize_observations(fit.samples, *fit.assembly, false, settings.seed);
    r.training = validation::compute_metrics(tr.observed, tr.predictive);
    r.training_coverage_linear = validation::compute_metrics(tr.observed, tr.linear).coverage;

    if (!held_out.rows.empty()) {
      AssemblyOptions opts = settings.assembly;
      opts.min_obs = 1;
      opts.standardization = fit.assembly->standardization;
      const ModelAssembly va = assemble(held_out, fit.mesh, opts);
      const auto vs = summarize_observations(fit.samples, va, true, settings.seed);
      r.validation = validation::compute_metrics(vs.observed, vs.predictive);
      r.validation_coverage_linear = validation::compute_metrics(vs.observed, vs.linear).coverage;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void run_fit(const config::Config& cfg) {
  const Dataset data = load_month(cfg);
  const auto locs = observed_locations(data);
  const FitSettings settings = fit_settings(cfg, locs);
  const fs::path dir = output_dir(cfg);
  echo_config(cfg, dir);
  MonthFit fit = fit_month(data, month_mesh(cfg, data), settings);
  write_fit_outputs(cfg, fit, data, dir);
  log("fit outputs written to " + dir.string());
}

void run_predict(const config::Config& cfg) {
  const fs::path dir = output_dir(cfg);
  const FitArchive a = load_archive(dir);
  const auto grid = grid_spec(cfg);
  const auto cov = grid_covariates(cfg, grid, a);
  const int batch = checked_int(cfg, "grid.batch_size", 1, 100'000'000);
  const auto days = selected_days(cfg, a.samples.T, cov);
  echo_config(cfg, dir);
  const auto targets = day_targets(grid, a, cov, days);

  const int cells = grid.num_cells();
  std::vector<MapSet> daily(days.size(), MapSet(cells));
  MapSet monthly(cells);
  const products::Statistic mean_stat;
  grid_chunks(a.samples, targets, days, batch, [&](const std::vector<int>& block, const std::vector<RowMatrix>& per_day) {
    for (size_t d = 0; d < per_day.size(); ++d) {
      for (size_t j = 0; j < block.size(); ++j) {
        if (std::isnan(per_day[d](0, static_cast<int>(j)))) continue;
        daily[d].set(block[j], products::summarize_cell(column_vector(per_day[d], static_cast<int>(j))));
      }
    }
    const auto cols = complete_columns(per_day);
    if (cols.empty()) return;
    std::vector<RowMatrix> gathered;
    for (const auto& m : per_day) gathered.push_back(gather_columns(m, cols));
    const RowMatrix agg = products::aggregate_days(gathered, mean_stat);
    for (size_t k = 0; k < cols.size(); ++k) {
      monthly.set(block[cols[k]], products::summarize_cell(column_vector(agg, static_cast<int>(k))));
    }
  });

  const fs::path maps = dir / "maps";
  fs::create_directories(maps);
  for (size_t d = 0; d < days.size(); ++d) daily[d].write(grid, maps, "day_" + date_label(a.year, a.month, days[d]));
  monthly.write(grid, maps, "month_" + month_label(a.year, a.month));
  log("maps written to " + maps.string());
}

void run_products(const config::Config& cfg) {
  const fs::path dir = output_dir(cfg);
  const FitArchive a = load_archive(dir);
  const auto grid = grid_spec(cfg);
  const auto cov = grid_covariates(cfg, grid, a);
  const int batch = checked_int(cfg, "grid.batch_size", 1, 100'000'000);
  const auto days = selected_days(cfg, a.samples.T, cov);
  const double threshold = cfg.num("products.threshold");
  const auto stat = products::Statistic::parse(cfg.str("products.statistic"));
  std::vector<products::ZoneCell> zones;
  if (cfg.has("paths.zones")) {
    const fs::path z = cfg.path("paths.zones");
    require_file(z, "zones file");
    zones = products::load_zones(z);
    for (const auto& zc : zones) {
      if (zc.cell >= grid.num_cells()) {
        throw schema_error(z.string() + ": cell " + std::to_string(zc.cell) + " is outside the grid");
      }
    }
  }
  echo_config(cfg, dir);
  const auto targets = day_targets(grid, a, cov, days);

  const int cells = grid.num_cells();
  const int S = a.samples.n_samples();
  std::vector<std::vector<double>> daily_poe(days.size(), std::vector<double>(cells, NAN));
  std::vector<double> agg_mean(cells, NAN), agg_poe(cells, NAN);

  // Zone sums per sample for the exposure of the aggregate.
  std::vector<std::string> zone_names;
  std::vector<int> zone_of_cell(cells, -1);
  std::vector<double> pop_of_cell(cells, 0.0);
  for (const auto& zc : zones) {
    auto it = std::find(zone_names.begin(), zone_names.end(), zc.zone);
    if (it == zone_names.end()) it = zone_names.insert(zone_names.end(), zc.zone);
    zone_of_cell[zc.cell] = static_cast<int>(it - zone_names.begin());
    pop_of_cell[zc.cell] = zc.population;
  }
  const int nz = static_cast<int>(zone_names.size());
  Eigen::MatrixXd zone_num = Eigen::MatrixXd::Zero(S, nz);
  std::vector<double> zone_pop(nz, 0.0);
  std::vector<double> covered_pop(nz, 0.0);

  grid_chunks(a.samples, targets, days, batch, [&](const std::vector<int>& block, const std::vector<RowMatrix>& per_day) {
    for (size_t d = 0; d < per_day.size(); ++d) {
      for (size_t j = 0; j < block.size(); ++j) {
        if (std::isnan(per_day[d](0, static_cast<int>(j)))) continue;
        const auto v = column_vector(per_day[d], static_cast<int>(j));
        daily_poe[d][block[j]] = products::exceedance_probability(v, threshold);
      }
    }
    const auto cols = complete_columns(per_day);
    if (cols.empty()) return;
    std::vector<RowMatrix> gathered;
    for (const auto& m : per_day) gathered.push_back(gather_columns(m, cols));
    const RowMatrix agg = products::aggregate_days(gathered, stat);
    for (size_t k = 0; k < cols.size(); ++k) {
      const int cell = block[cols[k]];
      const auto v = column_vector(agg, static_cast<int>(k));
      agg_mean[cell] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      agg_poe[cell] = products::exceedance_probability(v, threshold);
      const int z = zone_of_cell[cell];
      if (z >= 0 && pop_of_cell[cell] > 0.0) {
        zone_num.col(z) += pop_of_cell[cell] * agg.col(static_cast<int>(k));
        covered_pop[z] += pop_of_cell[cell];
      }
    }
  });

  const fs::path out = dir / "products";
  fs::create_directories(out);
  std::ostringstream thr;
  thr << csv::format_double(threshold);
  for (size_t d = 0; d < days.size(); ++d) {
    write_map(grid, daily_poe[d], out / ("poe" + thr.str() + "_day_" + date_label(a.year, a.month, days[d])));
  }
  const std::string agg_name = stat.name() + "_" + month_label(a.year, a.month);
  write_map(grid, agg_mean, out / (agg_name + "_mean"));
  write_map(grid, agg_poe, out / (agg_name + "_poe" + thr.str()));

  if (!zones.empty()) {
    for (const auto& zc : zones) zone_pop[zone_of_cell[zc.cell]] += zc.population;
    const auto of_mean = products::population_exposure(agg_mean, zones);
    csv::Writer w(out / ("exposure_" + month_label(a.year, a.month) + ".csv"));
    w.header({"zone_id", "statistic", "value"});
    std::vector<int> order(nz);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return zone_names[x] < zone_names[y]; });
    for (int z : order) {
      // Missing when the zone is unpopulated or a populated cell has no value.
      const bool ok = zone_pop[z] > 0.0 && std::abs(covered_pop[z] - zone_pop[z]) <= 1e-9 * zone_pop[z];
      double mean = NAN, lo = NAN, hi = NAN, poe = NAN;
      if (ok) {
        std::vector<double> e(S);
        for (int k = 0; k < S; ++k) e[k] = zone_num(k, z) / zone_pop[z];
        mean = std::accumulate(e.begin(), e.end(), 0.0) / S;
        poe = products::exceedance_probability(e, threshold);
        std::sort(e.begin(), e.end());
        lo = stats::quantile_sorted(e, 0.025);
        hi = stats::quantile_sorted(e, 0.975);
      }
      auto value = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
      const std::string& id = zone_names[z];
      w.cells({id, stat.name() + "_of_posterior_mean", value(of_mean.at(id))});
      w.cells({id, stat.name() + "_mean", value(mean)});
      w.cells({id, stat.name() + "_q025", value(lo)});
      w.cells({id, stat.name() + "_q975", value(hi)});
      w.cells({id, stat.name() + "_poe" + thr.str(), value(poe)});
    }
    w.close();
  }
  log("products written to " + out.string());
}

void run_cv(const config::Config& cfg) {
  const Dataset data = load_month(cfg);
  const auto locs = observed_locations(data);
  const FitSettings settings = fit_settings(cfg, locs);
  validation::SplitOptions split;
  split.fraction = cfg.num("cv.fraction");
  if (!(split.fraction >= 0.0 && split.fraction <= 1.0)) throw invalid_argument("cv.fraction must lie in [0, 1]");
  const char* count_keys[3] = {"cv.count_urban", "cv.count_suburban", "cv.count_rural"};
  for (int s = 0; s < 3; ++s) {
    if (cfg.has(count_keys[s])) split.counts[s] = checked_int(cfg, count_keys[s], 0, 1'000'000);
  }
  const int trials = checked_int(cfg, "cv.trials", 1, 1000);
  const fs::path dir = output_dir(cfg);
  echo_config(cfg, dir);
  const auto mesh = month_mesh(cfg, data);
  const auto results = cross_validate(data, mesh, settings, split, trials);

  // Station ids of the split, by position in the observed-station list.
  std::vector<const Station*> active;
  {
    std::vector<bool> seen(data.stations.size(), false);
    for (const auto& r : data.rows) seen[r.station] = true;
    for (size_t s = 0; s < data.stations.size(); ++s) {
      if (seen[s]) active.push_back(&data.stations[s]);
    }
  }
  const std::vector<std::string> header{"month", "trial", "phase", "n", "rmse", "correlation",
                                        "bias", "coverage", "coverage_linear"};
  csv::Writer all(dir / "metrics.csv");
  all.header(header);
  auto value = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
  for (const auto& r : results) {
    const int trial = r.plan.trial + 1;
    csv::Writer one(dir / ("metrics_trial_" + std::to_string(trial) + ".csv"));
    one.header(header);
    auto emit = [&](const char* phase, const validation::Metrics& m, double linear) {
      const std::vector<std::string> row{std::to_string(data.month), std::to_string(trial), phase, std::to_string(m.n),
                                         value(m.rmse), value(m.correlation), value(m.bias), value(m.coverage),
                                         value(linear)};
      one.cells(row);
      all.cells(row);
    };
    emit("training", r.training, r.training_coverage_linear);
    emit("validation", r.validation, r.validation_coverage_linear);
    one.close();

    csv::Writer sw(dir / ("split_trial_" + std::to_string(trial) + ".csv"));
    sw.header({"station_id", "stratum", "role"});
    std::vector<std::string> role(active.size(), "training");
    for (int v : r.plan.validation_all()) role[v] = "validation";
    for (size_t s = 0; s < active.size(); ++s) sw.row(active[s]->id, stratum_name(active[s]->stratum), role[s]);
    sw.close();
    log("trial " + std::to_string(trial) + ": validation rmse " + value(r.validation.rmse) + ", coverage " +
        value(r.validation.coverage));
  }
  all.close();
}

void run_simulate(const config::Config& cfg) {
  simulate::SimulationSpec spec;
  spec.theta = {cfg.num("simulate.a"), cfg.num("simulate.rho"), cfg.num("simulate.sigma_omega"),
                cfg.num("simulate.sigma_z"), cfg.num("simulate.sigma_epsilon")};
  spec.mu = cfg.num("simulate.mu");
  spec.beta = cfg.numbers("simulate.beta");
  spec.n_stations = checked_int(cfg, "simulate.n_stations", 3, 10'000'000);
  spec.domain_km = positive(cfg, "simulate.domain_km");
  spec.month = checked_int(cfg, "data.month", 1, 12);
  spec.year = cfg.has("data.year") ? checked_int(cfg, "data.year", 1, 9999) : 2015;
  spec.T = checked_int(cfg, "simulate.days", 0, days_in_month(spec.year, spec.month));
  spec.missing_fraction = cfg.num("simulate.missing_fraction");
  if (!(spec.missing_fraction >= 0.0 && spec.missing_fraction < 1.0)) {
    throw invalid_argument("simulate.missing_fraction must lie in [0, 1)");
  }
  const long long seed = cfg.integer("run.seed");
  if (seed < 0) throw invalid_argument("run.seed must be non-negative");
  spec.seed = static_cast<std::uint64_t>(seed);

  const fs::path dir = output_dir(cfg);
  echo_config(cfg, dir);
  std::vector<geometry::Point> locs;
  for (const auto& s : simulate::simulate_stations(spec)) locs.push_back(s.location);
  const auto mesh = station_mesh(cfg, locs);
  log("simulating on a mesh with " + std::to_string(mesh.num_vertices()) + " vertices");
  const auto sim = simulate::simulate_dataset(spec, mesh);

  DatasetPaths paths{cfg.path("paths.stations"), cfg.path("paths.observations"), cfg.path("paths.covariates")};
  for (const auto* p : {&paths.stations, &paths.observations, &paths.covariates}) {
    if (p->has_parent_path()) fs::create_directories(p->parent_path());
  }
  if (spec.beta.empty()) paths.covariates.clear();
  save_dataset(sim.data, paths);

  {
    csv::Writer w(dir / "simulation_truth.csv");
    w.header({"parameter", "value"});
    w.row("a", spec.theta.a);
    w.row("rho", spec.theta.rho);
    w.row("sigma_omega", spec.theta.sigma_omega);
    w.row("sigma_z", spec.theta.sigma_z);
    w.row("sigma_epsilon", spec.theta.sigma_epsilon);
    w.row("intercept", spec.mu);
    for (size_t k = 0; k < spec.beta.size(); ++k) w.row(sim.data.covariate_names[k], spec.beta[k]);
    w.close();
  }

  // Synthetic grid inputs for the mapping commands, when a grid is configured.
  const bool have_grid = cfg.integer("grid.ncols") > 0 && cfg.integer("grid.nrows") > 0;
  if (have_grid && cfg.has("paths.grid_covariates") && !spec.beta.empty()) {
    const auto grid = grid_spec(cfg);
    const fs::path p = cfg.path("paths.grid_covariates");
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    csv::Writer w(p);
    std::vector<std::string> header{"cell_id", "date"};
    header.insert(header.end(), sim.data.covariate_names.begin(), sim.data.covariate_names.end());
    w.header(header);
    for (int d = 0; d < sim.data.num_days; ++d) {
      StreamRng rng(spec.seed, streams::synthetic_grid, static_cast<std::uint64_t>(d));
      for (int c = 0; c < grid.num_cells(); ++c) {
        std::vector<std::string> fields{std::to_string(c), date_label(spec.year, spec.month, d)};
        for (size_t k = 0; k < spec.beta.size(); ++k) fields.push_back(csv::format_double(rng.normal()));
        if (grid.is_land(c)) w.cells(fields);
      }
    }
    w.close();
  }
  if (have_grid && cfg.has("paths.zones")) {
    const auto grid = grid_spec(cfg);
    const fs::path p = cfg.path("paths.zones");
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    csv::Writer w(p);
    w.header({"cell_id", "zone_id", "population"});
    StreamRng rng(spec.seed, streams::synthetic_grid, 1'000'000);
    for (int c = 0; c < grid.num_cells(); ++c) {
      const int row = c / grid.ncols, col = c % grid.ncols;
      const std::string zone = "Z" + std::to_string(row / 10) + "_" + std::to_string(col / 10);
      const double pop = std::floor(1000.0 * rng.uniform());
      if (grid.is_land(c)) w.row(c, zone, pop);
    }
    w.close();
  }
  log("simulated " + std::to_string(sim.data.rows.size()) + " observations");
}

void run(const std::string& command, const config::Config& cfg) {
  if (command == "fit") {
    run_fit(cfg);
  } else if (command == "predict") {
    run_predict(cfg);
  } else if (command == "cv") {
    run_cv(cfg);
  } else if (command == "simulate") {
    run_simulate(cfg);
  } else if (command == "products") {
    run_products(cfg);
  } else {
    throw invalid_argument("unknown command '" + command + "' (expected fit, predict, cv, simulate or products)");
  }
}

}  // namespace pmspde::pipeline
