/* C interface to the pmspde library.
 *
 * Every function that can fail returns a status code. On failure a message is
 * available from pmspde_last_error() on the same thread until the next call.
 * Objects are opaque handles released with the matching _free function;
 * passing NULL to a _free function is allowed.
 */
#ifndef PMSPDE_PMSPDE_H
#define PMSPDE_PMSPDE_H

#include <stddef.h>

#if defined(_WIN32)
#define PMSPDE_API __declspec(dllimport)
#elif defined(PMSPDE_BUILDING)
#define PMSPDE_API __attribute__((visibility("default")))
#else
#define PMSPDE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. They double as CLI exit codes. */
enum pmspde_status {
  PMSPDE_OK = 0,
  PMSPDE_INVALID_ARGUMENT = 1,
  PMSPDE_IO_ERROR = 2,       /* missing or unreadable file */
  PMSPDE_SCHEMA_ERROR = 3,   /* malformed input row */
  PMSPDE_NUMERICAL_ERROR = 4,
  PMSPDE_INTERNAL_ERROR = 5
};

typedef struct pmspde_config pmspde_config;
typedef struct pmspde_mesh pmspde_mesh;
typedef struct pmspde_samples pmspde_samples;

typedef void (*pmspde_log_fn)(const char* message, void* user_data);

PMSPDE_API const char* pmspde_version(void);
PMSPDE_API const char* pmspde_last_error(void);
/* Progress messages from long-running calls. NULL disables them. */
PMSPDE_API void pmspde_set_log_callback(pmspde_log_fn fn, void* user_data);

/* Run configuration. Keys are "section.name"; values are TOML literals
 * (bare words are taken as strings). */
PMSPDE_API int pmspde_config_new(pmspde_config** out);
PMSPDE_API int pmspde_config_load(const char* path, pmspde_config** out);
PMSPDE_API int pmspde_config_parse(const char* text, pmspde_config** out);
PMSPDE_API int pmspde_config_set(pmspde_config* config, const char* key, const char* value);
/* Copies the value as a TOML literal. `needed` (optional) receives the size
 * including the terminator; a short buffer gets a truncated copy. */
PMSPDE_API int pmspde_config_get(const pmspde_config* config, const char* key, char* buffer, size_t size,
                                 size_t* needed);
PMSPDE_API int pmspde_config_save(const pmspde_config* config, const char* path);
PMSPDE_API void pmspde_config_free(pmspde_config* config);

/* Documented keys, their defaults and descriptions; index < key count. */
PMSPDE_API size_t pmspde_config_key_count(void);
PMSPDE_API const char* pmspde_config_key_name(size_t index);
PMSPDE_API const char* pmspde_config_key_default(size_t index);
PMSPDE_API const char* pmspde_config_key_description(size_t index);

/* Runs "fit", "predict", "cv", "simulate" or "products". */
PMSPDE_API int pmspde_run(const char* command, const pmspde_config* config);

/* Meshes. `xy` holds n_points interleaved x, y pairs in km. */
PMSPDE_API int pmspde_mesh_build(const double* xy, size_t n_points, double inner_max_edge, double outer_max_edge,
                                 double cutoff, double extension, pmspde_mesh** out);
PMSPDE_API int pmspde_mesh_load(const char* vertices_csv, const char* triangles_csv, pmspde_mesh** out);
PMSPDE_API int pmspde_mesh_save(const pmspde_mesh* mesh, const char* vertices_csv, const char* triangles_csv);
PMSPDE_API int pmspde_mesh_size(const pmspde_mesh* mesh, size_t* vertices, size_t* triangles);
PMSPDE_API void pmspde_mesh_free(pmspde_mesh* mesh);

/* Posterior sample archives written by the fit command. */
PMSPDE_API int pmspde_samples_load(const char* path, pmspde_samples** out);
PMSPDE_API int pmspde_samples_shape(const pmspde_samples* samples, size_t* n_samples, size_t* latent_dim,
                                    size_t* days, size_t* mesh_vertices, size_t* stations, size_t* fixed_effects);
/* Copies draw `index` (latent_dim values) into `out`. */
PMSPDE_API int pmspde_samples_draw(const pmspde_samples* samples, size_t index, double* out, size_t length);
PMSPDE_API void pmspde_samples_free(pmspde_samples* samples);

/* Matern (nu = 1) correlation at distance h for range rho. */
PMSPDE_API int pmspde_matern_correlation(double h, double rho, double* out);

#ifdef __cplusplus
}
#endif

#endif
