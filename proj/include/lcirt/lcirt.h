/*
 * lcirt C API.
 *
 * Opaque handles over the C++ estimation core. Every function that can fail
 * returns an lcirt_status; the message for the most recent failure on the
 * calling thread is available from lcirt_last_error(). Strings returned
 * through char** out-parameters are owned by the caller and released with
 * lcirt_free_string().
 *
 * Model specs, options, parameters and results cross the boundary as JSON
 * text. Item indices in JSON are 1-based.
 *
 * Spec JSON:    {"k":3, "link":"global"|"local"|"none", "disc":"constrained"|"free",
 *                "difl":"free"|"rating_scale", "multi":[[1,2],[3,4]], "cats":[4,4,4,4]}
 *               "multi" defaults to one dimension; "cats" defaults to the data's.
 * Options JSON: {"start":"deterministic"|"random"|"user", "n_random":0, "seed":1,
 *                "params":{...}, "tol":1e-9, "max_iter":5000, "threads":1,
 *                "fisher_sweeps":1, "cluster_random_starts":1}
 */
#ifndef LCIRT_H
#define LCIRT_H

#include <stddef.h>
#include <stdint.h>

#if defined(LCIRT_BUILDING)
#define LCIRT_API __attribute__((visibility("default")))
#else
#define LCIRT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lcirt_status {
    LCIRT_OK = 0,
    LCIRT_INVALID_ARGUMENT = 1, /* null handle or pointer */
    LCIRT_VALIDATION_ERROR = 2, /* malformed input, inconsistent spec */
    LCIRT_IO_ERROR = 3,
    LCIRT_NUMERIC_ERROR = 4,
    LCIRT_INTERNAL_ERROR = 5
} lcirt_status;

typedef struct lcirt_dataset lcirt_dataset;
typedef struct lcirt_fit lcirt_fit;
typedef struct lcirt_lrtest lcirt_lrtest;
typedef struct lcirt_trace lcirt_trace;

LCIRT_API const char* lcirt_version(void);
LCIRT_API const char* lcirt_last_error(void);
LCIRT_API void lcirt_free_string(char* s);

/* Datasets: aggregated response patterns. */
LCIRT_API lcirt_status lcirt_dataset_from_csv(const char* path, int missing_code, lcirt_dataset** out);
LCIRT_API lcirt_status lcirt_dataset_from_json(const char* json, lcirt_dataset** out);
/* CSV or response-matrix JSON, picked by content. */
LCIRT_API lcirt_status lcirt_dataset_load(const char* path, int missing_code, lcirt_dataset** out);
/* Row-major units x items cells. */
LCIRT_API lcirt_status lcirt_dataset_from_cells(const int* cells, size_t units, size_t items,
                                                int missing_code, lcirt_dataset** out);
LCIRT_API void lcirt_dataset_free(lcirt_dataset* data);
LCIRT_API size_t lcirt_dataset_units(const lcirt_dataset* data);
LCIRT_API size_t lcirt_dataset_patterns(const lcirt_dataset* data);
LCIRT_API size_t lcirt_dataset_items(const lcirt_dataset* data);
LCIRT_API lcirt_status lcirt_dataset_set_categories(lcirt_dataset* data, const int* cats, size_t items);
LCIRT_API lcirt_status lcirt_dataset_to_json(const lcirt_dataset* data, char** out);

/* Model fitting. options_json may be NULL. */
LCIRT_API lcirt_status lcirt_fit_run(const lcirt_dataset* data, const char* spec_json,
                                     const char* options_json, lcirt_fit** out);
LCIRT_API void lcirt_fit_free(lcirt_fit* fit);
LCIRT_API double lcirt_fit_loglik(const lcirt_fit* fit);
LCIRT_API int lcirt_fit_n_params(const lcirt_fit* fit);
LCIRT_API double lcirt_fit_aic(const lcirt_fit* fit);
LCIRT_API double lcirt_fit_bic(const lcirt_fit* fit);
LCIRT_API int lcirt_fit_iterations(const lcirt_fit* fit);
LCIRT_API int lcirt_fit_converged(const lcirt_fit* fit);
LCIRT_API lcirt_status lcirt_fit_to_json(const lcirt_fit* fit, char** out);
LCIRT_API lcirt_status lcirt_fit_summary(const lcirt_fit* fit, char** out);

/* Likelihood-ratio tests. */
LCIRT_API lcirt_status lcirt_compare_nested(const lcirt_fit* restricted, const lcirt_fit* general,
                                            lcirt_lrtest** out);
/* spec_json carries the general structure in "multi"; multi0_json is the
 * restricted structure (NULL: one dimension). */
LCIRT_API lcirt_status lcirt_test_dim(const lcirt_dataset* data, const char* spec_json,
                                      const char* multi0_json, const char* options_json,
                                      lcirt_lrtest** out);
LCIRT_API void lcirt_lrtest_free(lcirt_lrtest* test);
LCIRT_API double lcirt_lrtest_deviance(const lcirt_lrtest* test);
LCIRT_API int lcirt_lrtest_df(const lcirt_lrtest* test);
LCIRT_API double lcirt_lrtest_p_value(const lcirt_lrtest* test);
LCIRT_API int lcirt_lrtest_converged(const lcirt_lrtest* test);
LCIRT_API lcirt_status lcirt_lrtest_to_json(const lcirt_lrtest* test, char** out);
LCIRT_API lcirt_status lcirt_lrtest_summary(const lcirt_lrtest* test, char** out);

/* Hierarchical item clustering. "multi" in spec_json is ignored. */
LCIRT_API lcirt_status lcirt_class_item(const lcirt_dataset* data, const char* spec_json,
                                        const char* options_json, lcirt_trace** out);
LCIRT_API void lcirt_trace_free(lcirt_trace* trace);
LCIRT_API size_t lcirt_trace_steps(const lcirt_trace* trace);
/* step is 0-based. Negative entries are items, positive ones earlier steps. */
LCIRT_API lcirt_status lcirt_trace_merge(const lcirt_trace* trace, size_t step, int* left, int* right,
                                         double* height);
LCIRT_API int lcirt_trace_suggest_cut(const lcirt_trace* trace, double alpha);
LCIRT_API int lcirt_trace_converged(const lcirt_trace* trace);
LCIRT_API lcirt_status lcirt_trace_to_json(const lcirt_trace* trace, char** out);
LCIRT_API lcirt_status lcirt_trace_to_dot(const lcirt_trace* trace, char** out);
LCIRT_API lcirt_status lcirt_trace_to_text(const lcirt_trace* trace, char** out);

/* Fits every spec in a JSON array and ranks them by BIC. all_converged may be NULL. */
LCIRT_API lcirt_status lcirt_information_table(const lcirt_dataset* data, const char* specs_json,
                                               const char* options_json, char** table_json,
                                               char** table_text, int* all_converged);

/* Samples units from a fully specified model. The truth JSON holds the spec,
 * the parameters and the latent class of every unit (1-based). */
LCIRT_API lcirt_status lcirt_simulate(const char* spec_json, const char* params_json, size_t units,
                                      uint64_t seed, double missing_rate, char** csv,
                                      char** truth_json);

#ifdef __cplusplus
}
#endif

#endif /* LCIRT_H */
