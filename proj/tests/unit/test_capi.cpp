#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "pmspde/pmspde.h"

namespace fs = std::filesystem;

TEST_SUITE("capi") {
  TEST_CASE("config handles") {
    pmspde_config* cfg = nullptr;
    REQUIRE(pmspde_config_new(&cfg) == PMSPDE_OK);
    char buf[64];
    size_t needed = 0;
    REQUIRE(pmspde_config_get(cfg, "priors.rho_u", buf, sizeof buf, &needed) == PMSPDE_OK);
    CHECK(std::string(buf) == "150");
    CHECK(needed == 4);
    CHECK(pmspde_config_set(cfg, "data.month", "7") == PMSPDE_OK);
    REQUIRE(pmspde_config_get(cfg, "data.month", buf, sizeof buf, nullptr) == PMSPDE_OK);
    CHECK(std::string(buf) == "7");

    // Truncated copy still reports the full size.
    char small[3];
    REQUIRE(pmspde_config_get(cfg, "inference.integration", small, sizeof small, &needed) == PMSPDE_OK);
    CHECK(std::string(small) == "\"e");
    CHECK(needed == std::string("\"empirical_bayes\"").size() + 1);

    CHECK(pmspde_config_set(cfg, "no.such", "1") == PMSPDE_INVALID_ARGUMENT);
    CHECK(std::string(pmspde_last_error()).find("no.such") != std::string::npos);
    CHECK(pmspde_config_get(cfg, nullptr, buf, sizeof buf, nullptr) == PMSPDE_INVALID_ARGUMENT);
    pmspde_config_free(cfg);
    pmspde_config_free(nullptr);

    pmspde_config* parsed = nullptr;
    CHECK(pmspde_config_parse("[data]\nmonth = 13x\nbad\n", &parsed) == PMSPDE_INVALID_ARGUMENT);
    CHECK(parsed == nullptr);
    CHECK(pmspde_config_load("/nonexistent/run.toml", &parsed) == PMSPDE_IO_ERROR);
  }

  TEST_CASE("key table") {
    const size_t n = pmspde_config_key_count();
    REQUIRE(n > 50);
    bool found = false;
    for (size_t i = 0; i < n; ++i) {
      if (std::string(pmspde_config_key_name(i)) == "inference.n_samples") {
        found = true;
        CHECK(std::string(pmspde_config_key_default(i)) == "1000");
        CHECK(std::string(pmspde_config_key_description(i)).size() > 0);
      }
    }
    CHECK(found);
    CHECK(pmspde_config_key_name(n) == nullptr);
  }

  TEST_CASE("mesh round trip") {
    const std::vector<double> xy{0, 0, 100, 0, 0, 100, 100, 100, 50, 40};
    pmspde_mesh* mesh = nullptr;
    REQUIRE(pmspde_mesh_build(xy.data(), 5, 20, 50, 1, 30, &mesh) == PMSPDE_OK);
    size_t nv = 0, nt = 0;
    REQUIRE(pmspde_mesh_size(mesh, &nv, &nt) == PMSPDE_OK);
    CHECK(nv >= 5);
    CHECK(nt > nv);
    const fs::path dir = fs::temp_directory_path() / "pmspde_capi_mesh";
    fs::create_directories(dir);
    const std::string v = (dir / "v.csv").string(), t = (dir / "t.csv").string();
    REQUIRE(pmspde_mesh_save(mesh, v.c_str(), t.c_str()) == PMSPDE_OK);
    pmspde_mesh* again = nullptr;
    REQUIRE(pmspde_mesh_load(v.c_str(), t.c_str(), &again) == PMSPDE_OK);
    size_t nv2 = 0, nt2 = 0;
    pmspde_mesh_size(again, &nv2, &nt2);
    CHECK(nv2 == nv);
    CHECK(nt2 == nt);
    pmspde_mesh_free(again);
    pmspde_mesh_free(mesh);
    fs::remove_all(dir);

    const double line[] = {0, 0, 1, 1, 2, 2};
    CHECK(pmspde_mesh_build(line, 3, 1, 2, 0.1, 1, &mesh) != PMSPDE_OK);
    CHECK(pmspde_mesh_build(nullptr, 3, 1, 2, 0.1, 1, &mesh) == PMSPDE_INVALID_ARGUMENT);
  }

  TEST_CASE("run errors map to status codes") {
    pmspde_config* cfg = nullptr;
    REQUIRE(pmspde_config_new(&cfg) == PMSPDE_OK);
    CHECK(pmspde_run("fly", cfg) == PMSPDE_INVALID_ARGUMENT);
    const fs::path dir = fs::temp_directory_path() / "pmspde_capi_run";
    pmspde_config_set(cfg, "paths.output", ("\"" + dir.string() + "\"").c_str());
    pmspde_config_set(cfg, "paths.stations", "\"/nonexistent/stations.csv\"");
    pmspde_config_set(cfg, "paths.observations", "\"/nonexistent/observations.csv\"");
    CHECK(pmspde_run("fit", cfg) == PMSPDE_IO_ERROR);
    CHECK(pmspde_run("predict", cfg) == PMSPDE_IO_ERROR);
    CHECK(pmspde_samples_load("/nonexistent/samples.bin", nullptr) == PMSPDE_INVALID_ARGUMENT);
    pmspde_samples* s = nullptr;
    CHECK(pmspde_samples_load("/nonexistent/samples.bin", &s) == PMSPDE_IO_ERROR);
    pmspde_config_free(cfg);
    fs::remove_all(dir);
  }

  TEST_CASE("matern correlation") {
    double r = 0.0;
    REQUIRE(pmspde_matern_correlation(0.0, 100.0, &r) == PMSPDE_OK);
    CHECK(r == 1.0);
    REQUIRE(pmspde_matern_correlation(100.0, 100.0, &r) == PMSPDE_OK);
    CHECK(r == doctest::Approx(std::sqrt(8.0) * std::cyl_bessel_k(1.0, std::sqrt(8.0))).epsilon(1e-12));
    CHECK(pmspde_matern_correlation(1.0, -1.0, &r) == PMSPDE_INVALID_ARGUMENT);
    CHECK(std::string(pmspde_version()).size() > 0);
  }
}
