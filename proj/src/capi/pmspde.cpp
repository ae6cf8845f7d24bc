#define PMSPDE_BUILDING
#include "pmspde/pmspde.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/inference.hpp"
#include "core/pipeline.hpp"
#include "core/spde.hpp"

struct pmspde_config {
  pmspde::config::Config value;
};

struct pmspde_mesh {
  pmspde::geometry::TriangularMesh value;
};

struct pmspde_samples {
  pmspde::inference::SampleSet value;
};

namespace {

thread_local std::string last_error;

int fail(int status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs `body`, mapping exceptions onto status codes.
template <typename F>
int guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return PMSPDE_OK;
  } catch (const pmspde::Error& e) {
    return fail(static_cast<int>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PMSPDE_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(PMSPDE_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(PMSPDE_INTERNAL_ERROR, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) throw pmspde::invalid_argument(std::string(name) + " is NULL");
}

const pmspde::config::KeyInfo* key_at(size_t index) {
  const auto& keys = pmspde::config::known_keys();
  return index < keys.size() ? &keys[index] : nullptr;
}

}  // namespace

extern "C" {

const char* pmspde_version(void) { return "0.1.0"; }

const char* pmspde_last_error(void) { return last_error.c_str(); }

void pmspde_set_log_callback(pmspde_log_fn fn, void* user_data) {
  if (fn == nullptr) {
    pmspde::pipeline::set_log_sink(nullptr);
    return;
  }
  pmspde::pipeline::set_log_sink([fn, user_data](const std::string& m) { fn(m.c_str(), user_data); });
}

int pmspde_config_new(pmspde_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new pmspde_config{};
  });
}

int pmspde_config_load(const char* path, pmspde_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pmspde_config{pmspde::config::Config::load(path)};
  });
}

int pmspde_config_parse(const char* text, pmspde_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new pmspde_config{pmspde::config::Config::parse(text)};
  });
}

int pmspde_config_set(pmspde_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    config->value.set(key, value);
  });
}

int pmspde_config_get(const pmspde_config* config, const char* key, char* buffer, size_t size, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    const std::string literal = config->value.literal(key);
    if (needed) *needed = literal.size() + 1;
    if (buffer && size > 0) {
      const size_t n = std::min(size - 1, literal.size());
      std::memcpy(buffer, literal.data(), n);
      buffer[n] = '\0';
    }
  });
}

int pmspde_config_save(const pmspde_config* config, const char* path) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    config->value.save(path);
  });
}

void pmspde_config_free(pmspde_config* config) { delete config; }

size_t pmspde_config_key_count(void) { return pmspde::config::known_keys().size(); }

const char* pmspde_config_key_name(size_t index) {
  const auto* k = key_at(index);
  return k ? k->key : nullptr;
}

const char* pmspde_config_key_default(size_t index) {
  const auto* k = key_at(index);
  return k ? k->default_value : nullptr;
}

const char* pmspde_config_key_description(size_t index) {
  const auto* k = key_at(index);
  return k ? k->description : nullptr;
}

int pmspde_run(const char* command, const pmspde_config* config) {
  return guarded([&] {
    need(command, "command");
    need(config, "config");
    pmspde::pipeline::run(command, config->value);
  });
}

int pmspde_mesh_build(const double* xy, size_t n_points, double inner_max_edge, double outer_max_edge, double cutoff,
                      double extension, pmspde_mesh** out) {
  return guarded([&] {
    need(xy, "xy");
    need(out, "out");
    std::vector<pmspde::geometry::Point> pts(n_points);
    for (size_t i = 0; i < n_points; ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
    pmspde::geometry::MeshOptions o;
    o.inner_max_edge = inner_max_edge;
    o.outer_max_edge = outer_max_edge;
    o.cutoff = cutoff;
    o.extension = extension;
    *out = new pmspde_mesh{pmspde::geometry::build_mesh(pts, o)};
  });
}

int pmspde_mesh_load(const char* vertices_csv, const char* triangles_csv, pmspde_mesh** out) {
  return guarded([&] {
    need(vertices_csv, "vertices_csv");
    need(triangles_csv, "triangles_csv");
    need(out, "out");
    *out = new pmspde_mesh{pmspde::geometry::load_mesh(vertices_csv, triangles_csv)};
  });
}

int pmspde_mesh_save(const pmspde_mesh* mesh, const char* vertices_csv, const char* triangles_csv) {
  return guarded([&] {
    need(mesh, "mesh");
    need(vertices_csv, "vertices_csv");
    need(triangles_csv, "triangles_csv");
    pmspde::geometry::save_mesh(mesh->value, vertices_csv, triangles_csv);
  });
}

int pmspde_mesh_size(const pmspde_mesh* mesh, size_t* vertices, size_t* triangles) {
  return guarded([&] {
    need(mesh, "mesh");
    if (vertices) *vertices = mesh->value.vertices.size();
    if (triangles) *triangles = mesh->value.triangles.size();
  });
}

void pmspde_mesh_free(pmspde_mesh* mesh) { delete mesh; }

int pmspde_samples_load(const char* path, pmspde_samples** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pmspde_samples{pmspde::inference::load_samples(path)};
  });
}

int pmspde_samples_shape(const pmspde_samples* samples, size_t* n_samples, size_t* latent_dim, size_t* days,
                         size_t* mesh_vertices, size_t* stations, size_t* fixed_effects) {
  return guarded([&] {
    need(samples, "samples");
    const auto& s = samples->value;
    if (n_samples) *n_samples = static_cast<size_t>(s.n_samples());
    if (latent_dim) *latent_dim = static_cast<size_t>(s.latent_dim());
    if (days) *days = static_cast<size_t>(s.T);
    if (mesh_vertices) *mesh_vertices = static_cast<size_t>(s.n_mesh);
    if (stations) *stations = static_cast<size_t>(s.n_station);
    if (fixed_effects) *fixed_effects = static_cast<size_t>(s.n_fixed);
  });
}

int pmspde_samples_draw(const pmspde_samples* samples, size_t index, double* out, size_t length) {
  return guarded([&] {
    need(samples, "samples");
    need(out, "out");
    const auto& s = samples->value;
    if (index >= static_cast<size_t>(s.n_samples())) throw pmspde::invalid_argument("draw index out of range");
    if (length < static_cast<size_t>(s.latent_dim())) throw pmspde::invalid_argument("output buffer too short");
    std::memcpy(out, s.latent.row(static_cast<Eigen::Index>(index)).data(), sizeof(double) * s.latent_dim());
  });
}

void pmspde_samples_free(pmspde_samples* samples) { delete samples; }

int pmspde_matern_correlation(double h, double rho, double* out) {
  return guarded([&] {
    need(out, "out");
    if (!(rho > 0.0) || !(h >= 0.0)) throw pmspde::invalid_argument("need h >= 0 and rho > 0");
    *out = pmspde::spde::matern_correlation(h, {rho, 1.0});
  });
}

}  // extern "C"
