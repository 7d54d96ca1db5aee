#ifndef PFGP_PFGP_H
#define PFGP_PFGP_H

/* C interface to the pfgp toolkit. Every call returns a pfgp_status; on
 * failure pfgp_last_error() holds a message for the calling thread. Matrices
 * are row-major, n rows by d columns. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PFGP_API __declspec(dllexport)
#else
#define PFGP_API __attribute__((visibility("default")))
#endif

typedef enum pfgp_status {
  PFGP_OK = 0,
  PFGP_INVALID_ARGUMENT = 1,
  PFGP_DIMENSION_MISMATCH = 2,
  PFGP_NOT_SYMMETRIC = 3,
  PFGP_JITTER_CAP_EXCEEDED = 4,
  PFGP_INDEX_OUT_OF_RANGE = 5,
  PFGP_VALIDATION_MODE_REQUIRED = 6,
  PFGP_AUX_KIND_UNSUPPORTED = 7,
  PFGP_NEGATIVE_EPS = 8,
  PFGP_SINGULAR_COVARIANCE = 9,
  PFGP_NON_POSITIVE_DELTA = 10,
  PFGP_INFLATE_NOT_ABOVE_ONE = 11,
  PFGP_OPTIMIZER_DIVERGED = 12,
  PFGP_NON_FINITE_OBJECTIVE = 13,
  PFGP_ALL_RESTARTS_FAILED = 14,
  PFGP_FILE_NOT_FOUND = 15,
  PFGP_PARSE_ERROR = 16,
  PFGP_EMPTY_AFTER_CLEANING = 17,
  PFGP_IO_ERROR = 18,
  PFGP_CONFIG_ERROR = 19,
  PFGP_INTERNAL_ERROR = 100
} pfgp_status;

typedef enum pfgp_aux_kind { PFGP_AUX_SUBSET = 0, PFGP_AUX_SOR = 1 } pfgp_aux_kind;

typedef struct pfgp_config pfgp_config;
typedef struct pfgp_results pfgp_results;
typedef struct pfgp_aux pfgp_aux;

typedef struct pfgp_kernel_params {
  const double* lengthscales; /* d entries */
  size_t dim;
  double signal_variance;
  double noise_variance;
} pfgp_kernel_params;

typedef struct pfgp_result_row {
  const char* dataset;
  const char* method;
  int64_t m;
  uint64_t seed;
  double mean_rmse;
  double std_rmse;
  double pred_rmse;
  double kl_to_exact;
  double objective_final; /* NaN when absent */
  double eps_bound;       /* NaN when absent */
  double wall_time_seconds;
  const char* status;
} pfgp_result_row;

PFGP_API const char* pfgp_version(void);
PFGP_API const char* pfgp_last_error(void);
PFGP_API const char* pfgp_status_name(int status);

/* configuration */
PFGP_API int pfgp_config_load_file(const char* path, pfgp_config** out);
PFGP_API int pfgp_config_parse(const char* text, pfgp_config** out);
PFGP_API void pfgp_config_free(pfgp_config* cfg);
PFGP_API int pfgp_config_set_seed(pfgp_config* cfg, uint64_t seed);
PFGP_API int pfgp_config_set_out_dir(pfgp_config* cfg, const char* dir);
PFGP_API int pfgp_config_set_validation_mode(pfgp_config* cfg, int enabled);
PFGP_API int pfgp_config_set_emit_svg(pfgp_config* cfg, int enabled);
PFGP_API int pfgp_config_get_out_dir(const pfgp_config* cfg, const char** out);
/* static text, one key per line */
PFGP_API const char* pfgp_config_schema(void);

/* experiments; verbose != 0 logs progress to stderr */
PFGP_API int pfgp_run(const pfgp_config* cfg, int verbose, pfgp_results** out);
PFGP_API int pfgp_results_load(const char* csv_path, pfgp_results** out);
PFGP_API void pfgp_results_free(pfgp_results* res);
PFGP_API size_t pfgp_results_count(const pfgp_results* res);
PFGP_API int pfgp_results_failed_cells(const pfgp_results* res);
PFGP_API int pfgp_results_row(const pfgp_results* res, size_t i, pfgp_result_row* out);
/* NULL for loaded tables */
PFGP_API const char* pfgp_results_path(const pfgp_results* res);
/* writes SVGs into out_dir; n_files may be NULL */
PFGP_API int pfgp_report(const pfgp_results* res, const char* out_dir, size_t* n_files);

/* finite-dimensional checks, printed to stdout */
PFGP_API int pfgp_theory_check(uint64_t seed, int* passed, int* failed);
/* timing sweep from the bench.* keys of cfg; per-N lines on stdout */
PFGP_API int pfgp_bench_scaling(const pfgp_config* cfg, uint64_t seed, double* slope);

/* objective evaluation */
PFGP_API int pfgp_aux_create(int kind, const double* x, size_t n, size_t d, const double* y,
                             const int64_t* rows, size_t n_rows, const pfgp_kernel_params* params,
                             pfgp_aux** out);
PFGP_API void pfgp_aux_free(pfgp_aux* aux);
/* relative objective at m inducing points; grad (m x d, row-major) may be NULL */
PFGP_API int pfgp_pf_objective(const pfgp_aux* aux, const double* xt, size_t m, double* value,
                               double* grad);
/* value of the part that does not depend on the inducing points */
PFGP_API int pfgp_pf_constant(const pfgp_aux* aux, double* value);

#ifdef __cplusplus
}
#endif

#endif
