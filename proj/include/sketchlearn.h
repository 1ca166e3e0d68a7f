/*
 * sketchlearn C API.
 *
 * A compressive-learning toolkit: datasets are compressed into random-Fourier
 * moment sketches, and k-means centroids or diagonal-covariance Gaussian
 * mixtures are decoded back from the sketch alone.
 *
 * Conventions:
 *   - Every function returns SL_OK (0) on success or an SL_ERR_* code; the
 *     per-thread message for the most recent failure is available via
 *     sl_last_error_message().
 *   - Objects are opaque handles created by the library and released with the
 *     matching sl_*_free function (free functions accept NULL).
 *   - Strings returned through char** out-parameters are heap-allocated and
 *     must be released with sl_string_free.
 *   - Structured inputs (generator configs, decode options, experiment
 *     configs) are JSON texts; see README.md for the schemas.
 */

#ifndef SKETCHLEARN_H
#define SKETCHLEARN_H

#include <stdint.h>

#if defined(_WIN32)
#  if defined(SKETCHLEARN_BUILD)
#    define SL_API __declspec(dllexport)
#  else
#    define SL_API __declspec(dllimport)
#  endif
#else
#  define SL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* ------------------------------------------------------------------ codes */

#define SL_OK 0
#define SL_ERR_INVALID_ARGUMENT 1
#define SL_ERR_DIMENSION_MISMATCH 2
#define SL_ERR_INCOMPATIBLE_SKETCH 3
#define SL_ERR_DEGENERATE_ATOM 4
#define SL_ERR_DEGENERATE_SCALE 5
#define SL_ERR_DECODE_FAILURE 6
#define SL_ERR_IO 7
#define SL_ERR_PARSE 8
#define SL_ERR_RUNTIME 99

SL_API const char* sl_version(void);
SL_API int sl_last_error_code(void);
SL_API const char* sl_last_error_message(void);
SL_API void sl_string_free(char* s);

/* ---------------------------------------------------------------- handles */

typedef struct sl_dataset sl_dataset;
typedef struct sl_frequencies sl_frequencies;
typedef struct sl_sketch sl_sketch;
typedef struct sl_model sl_model;
typedef struct sl_decode_result sl_decode_result;

/* ---------------------------------------------------------------- dataset */

/* Synthetic Gaussian-clusters dataset. config_json keys: k, d, n, separation,
 * within_std, weight_mode ("uniform"|"dirichlet5"), seed. Any output pointer
 * may be NULL when not needed; meta_json carries the config, the ground-truth
 * model and generation warnings. */
SL_API int sl_dataset_generate(const char* config_json, sl_dataset** out_data,
                               sl_model** out_truth, char** out_meta_json);

SL_API int sl_dataset_read(const char* path, sl_dataset** out);
SL_API int sl_dataset_write(const sl_dataset* ds, const char* path);
SL_API int sl_dataset_import_csv(const char* path, sl_dataset** out);
SL_API int sl_dataset_from_array(const double* points_row_major, uint64_t n,
                                 uint64_t d, sl_dataset** out);
SL_API int sl_dataset_shape(const sl_dataset* ds, uint64_t* out_n, uint64_t* out_d);
/* Copies n*d doubles; capacity is the element count of out. */
SL_API int sl_dataset_copy_points(const sl_dataset* ds, double* out,
                                  uint64_t capacity);
SL_API void sl_dataset_free(sl_dataset* ds);

/* ------------------------------------------------- frequencies and sketch */

/* law is "fg" (folded Gaussian radius) or "ar" (adapted radius). */
SL_API int sl_frequencies_draw(uint64_t m, uint64_t d, const char* law,
                               double sigma, uint64_t seed, sl_frequencies** out);
SL_API int sl_frequencies_shape(const sl_frequencies* fr, uint64_t* out_m,
                                uint64_t* out_d);
SL_API void sl_frequencies_free(sl_frequencies* fr);

/* Mean-pairwise-distance scale heuristic; subsample_size >= 2. */
SL_API int sl_scale_heuristic(const sl_dataset* ds, uint64_t subsample_size,
                              uint64_t seed, double* out_sigma);

SL_API int sl_sketch_compute(const sl_dataset* ds, const sl_frequencies* fr,
                             sl_sketch** out);
SL_API int sl_sketch_merge(const sl_sketch* a, const sl_sketch* b, sl_sketch** out);
SL_API int sl_sketch_save(const sl_sketch* sk, const sl_frequencies* fr,
                          const char* path);
/* Loads a sketch file; regenerates the frequency matrix from the stored
 * recipe. Either output may be NULL. */
SL_API int sl_sketch_load(const char* path, sl_sketch** out_sk,
                          sl_frequencies** out_fr);
/* Interleaved (re, im) pairs; capacity is the element count of out (>= 2m). */
SL_API int sl_sketch_values(const sl_sketch* sk, double* out, uint64_t capacity,
                            uint64_t* out_m, uint64_t* out_n);
SL_API void sl_sketch_free(sl_sketch* sk);

/* ----------------------------------------------------------------- models */

SL_API int sl_model_from_json(const char* json_text, sl_model** out);
SL_API int sl_model_to_json(const sl_model* mdl, char** out_json);
/* Closed-form sketch of the model under a frequency draw. */
SL_API int sl_model_sketch(const sl_model* mdl, const sl_frequencies* fr,
                           sl_sketch** out);
/* Sketch-matching cost ||z - A(P_model)||_2^2. */
SL_API int sl_model_cost(const sl_model* mdl, const sl_sketch* z,
                         const sl_frequencies* fr, double* out_cost);
SL_API void sl_model_free(sl_model* mdl);

/* ----------------------------------------------------------------- decode */

/* options_json keys: k (required), model ("dirac"|"gaussian"), decoder
 * ("clompr"|"clomprxN"|"geneticl"), trials, box_lo, box_hi (number or array
 * of length d; required), variance_lo, variance_hi, max_inner_iterations,
 * final_polish_iterations, seed, genetic {population, generations, gamma,
 * mutation_scale, crossover_rate, elitism, seed}. */
SL_API int sl_decode(const sl_sketch* z, const sl_frequencies* fr,
                     const char* options_json, sl_decode_result** out);
SL_API int sl_decode_result_to_json(const sl_decode_result* res, char** out_json);
SL_API int sl_decode_result_model(const sl_decode_result* res, sl_model** out);
SL_API int sl_decode_result_cost(const sl_decode_result* res, double* out_cost);
SL_API void sl_decode_result_free(sl_decode_result* res);

/* ------------------------------------------------------------- evaluation */

/* Lloyd k-means baseline (k-means++ seeding, best of `restarts`). The
 * centroids come back as a Dirac model with uniform weights. */
SL_API int sl_lloyd_kmeans(const sl_dataset* ds, uint64_t k, uint64_t restarts,
                           uint64_t seed, sl_model** out_centroids,
                           double* out_sse);

/* Evaluation report for a decoded model. truth/z/fr may be NULL; the report
 * contains null entries for whatever could not be computed from the inputs.
 * options_json (optional): {"lloyd_restarts": u, "seed": u}. */
SL_API int sl_evaluate(const sl_dataset* ds, const sl_model* decoded,
                       const sl_model* truth, const sl_sketch* z,
                       const sl_frequencies* fr, const char* options_json,
                       char** out_report_json);

/* ------------------------------------------------------------ experiments */

/* experiment_id: "fig2" | "fig3" | "fig4". config_json may be NULL (desk
 * preset); a "preset" key selects "desk" or "paper" before overrides apply.
 * Appends JSON-lines records to jsonl_path (resuming an interrupted sweep),
 * rewrites the CSV summary when csv_path is non-NULL, and reports
 * {cells_total, cells_run, cells_skipped} through out_summary_json. workers
 * <= 0 means: use CL_WORKERS or the hardware thread count. */
SL_API int sl_experiment_run(const char* experiment_id, const char* config_json,
                             const char* jsonl_path, const char* csv_path,
                             int workers, char** out_summary_json);

/* -------------------------------------------------------------- selfcheck */

/* Runs the invariant suite. out_ok is 1 when every check passed; the report
 * has one line per check. */
SL_API int sl_selfcheck(uint64_t seed, int quick, int* out_ok, char** out_report);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif /* SKETCHLEARN_H */
