#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <iterator>
#include <sstream>

#include "core/config.hpp"
#include "core/csv.hpp"
#include "core/error.hpp"
#include "core/pipeline.hpp"
#include "core/simulate.hpp"

using namespace pmspde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  int n = 0;
  while (std::getline(f, line)) ++n;
  return n;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

// A small run directory: 40 stations over a week, a 16 x 16 grid with zones.
config::Config small_run(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "run.toml");
    f << "[paths]\n"
         "stations = \"data/stations.csv\"\n"
         "observations = \"data/observations.csv\"\n"
         "covariates = \"data/covariates.csv\"\n"
         "grid_covariates = \"data/grid.csv\"\n"
         "zones = \"data/zones.csv\"\n"
         "output = \"out\"\n"
         "[data]\nmonth = 2\nmin_obs = 3\n"
         "[mesh]\ntarget_nodes = 150\n"
         "[inference]\nn_samples = 60\nwarm_start_days = 0\n"
         "[simulate]\nn_stations = 40\ndays = 5\nbeta = [0.2]\n"
         "[grid]\nxll = 0\nyll = 0\ncell_size = 40\nncols = 16\nnrows = 16\n"
         "[cv]\ntrials = 1\ncount_urban = 2\ncount_suburban = 1\ncount_rural = 1\n";
  }
  pipeline::set_log_sink([](const std::string&) {});
  return config::Config::load(dir / "run.toml");
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("automatic mesh size lands near the target") {
    config::Config cfg;
    simulate::SimulationSpec spec;
    spec.n_stations = 80;
    std::vector<geometry::Point> locs;
    for (const auto& s : simulate::simulate_stations(spec)) locs.push_back(s.location);
    for (int target : {200, 600}) {
      cfg.set("mesh.target_nodes", std::to_string(target));
      const auto mesh = pipeline::station_mesh(cfg, locs);
      CHECK(std::abs(mesh.num_vertices() - target) <= 0.05 * target);
    }
  }

  TEST_CASE("settings validation") {
    const std::vector<geometry::Point> locs{{0, 0}, {100, 0}, {0, 100}};
    config::Config cfg;
    const auto s = pipeline::fit_settings(cfg, locs);
    CHECK(s.init.rho == doctest::Approx(0.2 * std::hypot(100.0, 100.0)));
    CHECK(s.warm_start_days == 7);
    for (auto [key, value] : std::vector<std::pair<const char*, const char*>>{
             {"inference.integration", "laplace"},
             {"priors.rho_alpha", "1.5"},
             {"inference.init_a", "1.0"},
             {"run.threads", "0"},
             {"run.seed", "-1"}}) {
      auto bad = cfg;
      bad.set(key, value);
      CHECK(kind_of([&] { pipeline::fit_settings(bad, locs); }) == ErrorKind::invalid_argument);
    }
  }

  TEST_CASE("simulate, fit, predict, products and cv write their artifacts") {
    const fs::path dir = fs::temp_directory_path() / "pmspde_pipeline_test";
    const auto cfg = small_run(dir);
    const fs::path out = dir / "out";

    CHECK(kind_of([&] { pipeline::run("predict", cfg); }) == ErrorKind::io);

    pipeline::run("simulate", cfg);
    CHECK(fs::exists(dir / "data/observations.csv"));
    CHECK(count_lines(dir / "data/stations.csv") == 41);
    CHECK(count_lines(dir / "data/grid.csv") == 1 + 5 * 256);
    CHECK(count_lines(dir / "data/zones.csv") == 257);

    pipeline::run("fit", cfg);
    CHECK(count_lines(out / "hyperparameters.csv") == 6);
    CHECK(count_lines(out / "fixed_effects.csv") == 3);
    for (const char* f : {"config.resolved.toml", "hyper_points.csv", "latent_summary.csv", "standardization.csv",
                          "mesh_vertices.csv", "mesh_triangles.csv", "samples.bin", "fit_summary.csv",
                          "variogram_observed.csv", "variogram_residuals.csv"}) {
      CHECK_MESSAGE(fs::exists(out / f), f);
    }
    const std::string samples = slurp(out / "samples.bin");

    pipeline::run("predict", cfg);
    CHECK(fs::exists(out / "maps/day_2015-02-01_mean.asc"));
    CHECK(fs::exists(out / "maps/day_2015-02-05_rwpir.csv"));
    CHECK(fs::exists(out / "maps/month_2015-02_sd.asc"));

    pipeline::run("products", cfg);
    CHECK(fs::exists(out / "products/exposure_2015-02.csv"));
    CHECK(fs::exists(out / "products/poe50_day_2015-02-03.asc"));
    CHECK(count_lines(out / "products/exposure_2015-02.csv") > 1);

    pipeline::run("cv", cfg);
    CHECK(count_lines(out / "metrics.csv") >= 3);
    CHECK(fs::exists(out / "split_trial_1.csv"));

    // Same seed, same draws.
    pipeline::run("fit", cfg);
    CHECK(slurp(out / "samples.bin") == samples);
    fs::remove_all(dir);
  }

  TEST_CASE("missing inputs are io errors and bad commands invalid") {
    const fs::path dir = fs::temp_directory_path() / "pmspde_pipeline_missing";
    const auto cfg = small_run(dir);
    CHECK(kind_of([&] { pipeline::run("fit", cfg); }) == ErrorKind::io);
    CHECK(kind_of([&] { pipeline::run("fly", cfg); }) == ErrorKind::invalid_argument);
    fs::remove_all(dir);
  }
}
