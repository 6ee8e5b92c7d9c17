#ifndef WAVEJOINT_H
#define WAVEJOINT_H

#include <stddef.h>
#include <stdint.h>

#if defined(WAVEJOINT_BUILDING)
#define WJ_API __attribute__((visibility("default")))
#else
#define WJ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wj_status {
  WJ_OK = 0,
  WJ_INVALID_ARGUMENT = 1,
  WJ_BOUND_VIOLATION = 2,
  WJ_DOMAIN = 3,
  WJ_SINGULAR_SYSTEM = 4,
  WJ_SINGULAR_INTERPOLATION = 5,
  WJ_DUPLICATE_EXACT_NODE_CONFLICT = 6,
  WJ_CANNOT_PLACE_DISTINCT_POINTS = 7,
  WJ_EMPTY_DATASET = 8,
  WJ_INSUFFICIENT_DATA = 9,
  WJ_IO = 10,
  WJ_UNKNOWN_FUNCTION = 11,
  WJ_INTERNAL = 99
} wj_status;

typedef struct wj_config {
  double length_mm;
  double ridges;
  double height_mm;
  double thickness_mm;
  double twist_deg;
} wj_config;

typedef struct wj_stiffness {
  double k_xi;
  double k_eta;
  double k_zeta;
} wj_stiffness;

typedef struct wj_surrogate wj_surrogate;
typedef struct wj_store wj_store;

WJ_API const char* wj_version(void);
/* Message of the last failed call on this thread; "" if none. */
WJ_API const char* wj_last_error(void);
WJ_API const char* wj_status_name(wj_status status);
/* Frees strings returned through char** out-parameters. */
WJ_API void wj_string_free(char* s);

/* bounds_json may be NULL for the default box. *violations_json receives a
   JSON array (empty when valid); free it with wj_string_free. */
WJ_API wj_status wj_validate_config(const wj_config* cfg, const char* bounds_json, char** violations_json);
WJ_API wj_status wj_clamp_and_round(const wj_config* cfg, const char* bounds_json, wj_config* out);

/* fidelity: "exact", "noisy" or "noisy:<cap>". A failed evaluation returns
   WJ_OK with *failure set to a nonzero reason and *out untouched. */
WJ_API wj_status wj_evaluate_stiffness(const wj_config* cfg, const char* fidelity, uint64_t seed,
                                       wj_stiffness* out, int* failure);
WJ_API const char* wj_failure_name(int failure);
WJ_API wj_status wj_residual(const wj_stiffness* k, const wj_stiffness* target, double* out);
WJ_API wj_status wj_synthetic(const char* name, const double* x, size_t n, double* out);

/* points: n x d row-major. noise_caps may be NULL (all exact); a cap of 0
   marks an exact sample. kernel: "cubic", "gaussian:2", ... */
WJ_API wj_status wj_surrogate_fit(const double* points, const double* values, const double* noise_caps, size_t n,
                                  size_t d, const double* lower, const double* upper, const char* kernel,
                                  wj_surrogate** out);
WJ_API wj_status wj_surrogate_eval(const wj_surrogate* s, const double* x, double* out);
WJ_API wj_status wj_surrogate_merit(const wj_surrogate* s, const double* x, double weight, double* out);
WJ_API size_t wj_surrogate_size(const wj_surrogate* s);
WJ_API void wj_surrogate_free(wj_surrogate* s);

WJ_API wj_status wj_store_create(const char* path, const char* meta_json, wj_store** out);
WJ_API wj_status wj_store_open(const char* path, wj_store** out);
/* k == NULL records a failed evaluation. */
WJ_API wj_status wj_store_append(wj_store* store, const wj_config* cfg, const wj_stiffness* k, const char* fidelity,
                                 const char* run_id);
WJ_API size_t wj_store_size(const wj_store* store);
WJ_API wj_status wj_store_get(const wj_store* store, size_t index, wj_config* cfg, wj_stiffness* k, int* failed);
WJ_API void wj_store_free(wj_store* store);

/* options_json: {"bounds": {...}, "fidelity": "exact"|"noisy", "noise_cap": 0.3}; may be NULL. */
WJ_API wj_status wj_generate_dataset(const char* path, size_t n, uint64_t seed, const char* options_json,
                                     char** summary_json);
/* Runs a JSON experiment spec, writing CSV files into out_dir. */
WJ_API wj_status wj_run_experiment(const char* spec_json, const char* out_dir, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
