#include "core/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "core/csv.hpp"
#include "core/error.hpp"

namespace pmspde::config {

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"paths.stations", "\"stations.csv\"", "station table: station_id, x_km, y_km, stratum"},
      {"paths.observations", "\"observations.csv\"", "station_id, date, pm10"},
      {"paths.covariates", "\"covariates.csv\"", "station-day predictors: station_id, date, predictors..."},
      {"paths.grid_covariates", "", "cell-day predictors: cell_id, date, predictors..."},
      {"paths.grid_mask", "", "optional cell_id, land (0 = sea)"},
      {"paths.zones", "", "cell_id, zone_id, population"},
      {"paths.mesh_vertices", "", "reuse a mesh: vertex CSV (id, x, y)"},
      {"paths.mesh_triangles", "", "reuse a mesh: triangle CSV (v1, v2, v3)"},
      {"paths.output", "\"output\"", "directory for all artifacts"},
      {"data.month", "1", "month to fit, 1..12"},
      {"data.year", "", "year; default: taken from the observations"},
      {"data.min_obs", "10", "stations with fewer observations in the month are dropped"},
      {"data.zero_floor", "0.5", "concentrations below this (ug/m3) are raised to it before the log"},
      {"mesh.inner_max_edge", "0", "max edge (km) inside the station hull; 0 = sized to mesh.target_nodes"},
      {"mesh.outer_max_edge", "0", "max edge (km) in the extension band; 0 = 2.5 x inner"},
      {"mesh.cutoff", "-1", "merge stations closer than this (km); -1 = inner / 5"},
      {"mesh.extension", "-1", "width of the outer band (km); -1 = 20% of the hull diameter"},
      {"mesh.target_nodes", "1500", "approximate vertex count when inner_max_edge = 0"},
      {"priors.sigma_epsilon_u", "1", "Prob(sigma_epsilon > u) = alpha"},
      {"priors.sigma_epsilon_alpha", "0.01", "tail probability for priors.sigma_epsilon_u"},
      {"priors.sigma_z_u", "1", "Prob(sigma_z > u) = alpha"},
      {"priors.sigma_z_alpha", "0.01", "tail probability for priors.sigma_z_u"},
      {"priors.rho_u", "150", "Prob(rho < u) = alpha, km"},
      {"priors.rho_alpha", "0.8", "probability for priors.rho_u"},
      {"priors.sigma_omega_u", "1", "Prob(sigma_omega > u) = alpha"},
      {"priors.sigma_omega_alpha", "0.01", "tail probability for priors.sigma_omega_u"},
      {"priors.a_u", "0.8", "Prob(a > u) = alpha"},
      {"priors.a_alpha", "0.4", "tail probability for priors.a_u"},
      {"priors.fixed_effect_precision", "0.001", "precision of the Gaussian priors on intercept and coefficients"},
      {"inference.integration", "\"empirical_bayes\"", "empirical_bayes or ccd"},
      {"inference.ccd_f0", "1.1", "CCD scaling of the factorial points"},
      {"inference.gtol", "1e-4", "gradient infinity-norm tolerance on the internal scale"},
      {"inference.max_iter", "200", "optimizer iteration limit"},
      {"inference.fd_step", "1e-4", "finite-difference step for the gradient"},
      {"inference.hessian_step", "1e-3", "finite-difference step for the curvature"},
      {"inference.init_a", "0.5", "optimizer start"},
      {"inference.init_rho", "0", "optimizer start, km; 0 = 20% of the hull diameter"},
      {"inference.init_sigma_omega", "0.5", "optimizer start"},
      {"inference.init_sigma_z", "0.2", "optimizer start"},
      {"inference.init_sigma_epsilon", "0.2", "optimizer start"},
      {"inference.n_samples", "1000", "joint posterior draws"},
      {"inference.warm_start_days", "7", "days of a preliminary fit that seeds the optimizer (0 disables)"},
      {"inference.max_latent", "50000000", "upper bound on the latent dimension"},
      {"run.seed", "1", "seed for every random stream"},
      {"run.threads", "1", "worker threads; results do not depend on it"},
      {"cv.trials", "3", "number of random splits"},
      {"cv.fraction", "0.1", "held-out fraction per stratum"},
      {"cv.count_urban", "", "override the urban validation count"},
      {"cv.count_suburban", "", "override the suburban validation count"},
      {"cv.count_rural", "", "override the rural validation count"},
      {"variogram.bin_width", "25", "km"},
      {"variogram.max_distance", "400", "km"},
      {"variogram.max_lag", "7", "days"},
      {"grid.xll", "0", "lower-left corner x, km"},
      {"grid.yll", "0", "lower-left corner y, km"},
      {"grid.cell_size", "1", "km"},
      {"grid.ncols", "0", "cells per row; 0 = no grid"},
      {"grid.nrows", "0", "rows of cells; 0 = no grid"},
      {"grid.batch_size", "10000", "cells per prediction batch"},
      {"grid.days", "[]", "days of the month to map (1-based); empty = every day with grid covariates"},
      {"products.threshold", "50", "daily limit, ug/m3; exceedance is strictly greater"},
      {"products.statistic", "\"mean\"", "aggregate over days: mean or pNN.N (e.g. p90.4)"},
      {"simulate.a", "0.629", "AR(1) coefficient"},
      {"simulate.rho", "106.23", "km"},
      {"simulate.sigma_omega", "0.434", "field standard deviation"},
      {"simulate.sigma_z", "0.247", "station effect standard deviation"},
      {"simulate.sigma_epsilon", "0.197", "noise standard deviation"},
      {"simulate.mu", "3.2", "intercept on the log scale"},
      {"simulate.beta", "[0.15, -0.1, 0.08, 0.05, -0.12]", "one coefficient per generated covariate"},
      {"simulate.n_stations", "100", "number of simulated stations"},
      {"simulate.domain_km", "600", "stations uniform over a square of this side"},
      {"simulate.days", "0", "0 = the whole month"},
      {"simulate.missing_fraction", "0", "fraction of station-days dropped at random"},
  };
  return keys;
}

namespace {

const KeyInfo* find_key(const std::string& key) {
  for (const auto& k : known_keys()) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool is_quoted(const std::string& v) { return v.size() >= 2 && v.front() == '"' && v.back() == '"'; }

std::string unquote(const std::string& v) {
  if (!is_quoted(v)) return v;
  std::string out;
  for (size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] == '\\' && i + 2 < v.size()) {
      ++i;
      out += v[i] == 'n' ? '\n' : v[i] == 't' ? '\t' : v[i];
    } else {
      out += v[i];
    }
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const std::string t = [&] {
    std::string r;
    for (char c : s) {
      if (c != '_') r += c;
    }
    return r;
  }();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno == 0;
}

}  // namespace

Config::Config() {
  for (const auto& k : known_keys()) values_[k.key] = k.default_value;
}

Config Config::parse(const std::string& text, const std::string& source) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = csv::trim(strip_comment(line));
    if (t.empty()) continue;
    auto fail = [&](const std::string& why) {
      return invalid_argument(source + ": line " + std::to_string(lineno) + ": " + why);
    };
    if (t.front() == '[') {
      if (t.back() != ']') throw fail("unterminated section header");
      section = csv::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw fail("expected key = value");
    const std::string name = csv::trim(t.substr(0, eq));
    const std::string value = csv::trim(t.substr(eq + 1));
    const std::string key = name.find('.') == std::string::npos && !section.empty() ? section + "." + name : name;
    if (!find_key(key)) throw fail("unknown key '" + key + "'");
    if (value.empty()) throw fail("missing value for '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  Config c = parse(s.str(), path.string());
  c.base_dir_ = path.parent_path();
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw invalid_argument("unknown config key '" + key + "'");
  const std::string v = csv::trim(value);
  double d;
  if (v.empty() || is_quoted(v) || v.front() == '[' || v == "true" || v == "false" || parse_number(v, d)) {
    values_[key] = v;
  } else {
    values_[key] = quote(v);
  }
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw invalid_argument("unknown config key '" + key + "'");
  return it->second;
}

bool Config::has(const std::string& key) const {
  const auto& r = raw(key);
  return !r.empty() && r != "\"\"";
}

std::string Config::str(const std::string& key) const { return unquote(raw(key)); }

double Config::num(const std::string& key) const {
  double d;
  if (!parse_number(raw(key), d)) throw invalid_argument("config key '" + key + "' must be a number, got '" + raw(key) + "'");
  return d;
}

long long Config::integer(const std::string& key) const {
  const double d = num(key);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw invalid_argument("config key '" + key + "' must be an integer");
  return static_cast<long long>(d);
}

bool Config::boolean(const std::string& key) const {
  const auto& r = raw(key);
  if (r == "true") return true;
  if (r == "false") return false;
  throw invalid_argument("config key '" + key + "' must be true or false");
}

std::vector<double> Config::numbers(const std::string& key) const {
  const std::string r = raw(key);
  if (r.size() < 2 || r.front() != '[' || r.back() != ']') {
    throw invalid_argument("config key '" + key + "' must be an array of numbers");
  }
  std::vector<double> out;
  std::stringstream s(r.substr(1, r.size() - 2));
  std::string item;
  while (std::getline(s, item, ',')) {
    item = csv::trim(item);
    if (item.empty()) continue;
    double d;
    if (!parse_number(item, d)) throw invalid_argument("config key '" + key + "': '" + item + "' is not a number");
    out.push_back(d);
  }
  return out;
}

std::optional<double> Config::optional_num(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return num(key);
}

std::filesystem::path Config::path(const std::string& key) const {
  std::filesystem::path p = str(key);
  if (p.empty() || p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

std::string Config::to_toml() const {
  std::ostringstream out;
  std::string section;
  for (const auto& k : known_keys()) {
    const std::string key = k.key;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    std::string v = values_.at(key);
    // Paths are written resolved so the echo is usable from anywhere.
    if (sec == "paths" && has(key)) v = quote(path(key).string());
    if (v.empty()) {
      out << "# " << key.substr(dot + 1) << " =\n";
    } else {
      out << key.substr(dot + 1) << " = " << v << "\n";
    }
  }
  return out.str();
}

void Config::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << to_toml();
  if (!out) throw io_error("error writing " + path.string());
}

}  // namespace pmspde::config
