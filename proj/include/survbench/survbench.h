#ifndef SURVBENCH_SURVBENCH_H
#define SURVBENCH_SURVBENCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(SURVBENCH_BUILDING_LIBRARY)
#define SB_API __attribute__((visibility("default")))
#else
#define SB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sb_dataset sb_dataset;
typedef struct sb_model sb_model;

typedef enum sb_status {
  SB_OK = 0,
  SB_ERR_INVALID_ARGUMENT = 1,
  SB_ERR_PARSE = 2,
  SB_ERR_STRUCTURE = 3,
  SB_ERR_DOMAIN = 4,
  SB_ERR_SUPPORT = 5,
  SB_ERR_FIT_FAILURE = 6,
  SB_ERR_SELECTION = 7,
  SB_ERR_BANDWIDTH = 8,
  SB_ERR_SAMPLER_STALL = 9,
  SB_ERR_MODEL = 10,
  SB_ERR_SIZE = 11,
  SB_ERR_INFEASIBLE = 12,
  SB_ERR_DEGENERATE = 13,
  SB_ERR_IO = 14,
  SB_ERR_SUMMARY = 15,
  SB_ERR_INTERNAL = 99
} sb_status;

typedef enum sb_engine {
  SB_ENGINE_PARAMETRIC = 0,
  SB_ENGINE_KDE = 1,
  SB_ENGINE_CASE = 2,
  SB_ENGINE_CONDBOOT = 3
} sb_engine;

typedef struct sb_evaluation {
  int has_logrank;
  double logrank_statistic;
  double logrank_p;
  int has_hazard_ratio;
  double hazard_ratio;
  int has_median[2];
  double median[2];
  double tau;
  double rmstd;
  double tie_ratio;
} sb_evaluation;

SB_API const char* sb_version(void);
/* Message of the last failure on the calling thread; empty after success. */
SB_API const char* sb_last_error(void);
SB_API const char* sb_status_name(sb_status status);
/* Releases strings returned through char** out-parameters. */
SB_API void sb_string_free(char* text);

/* `study_id` may be NULL to use the file stem. */
SB_API sb_status sb_dataset_load(const char* path, const char* study_id, sb_dataset** out);
/* status[i] is 1 for an event and 0 for a censoring. */
SB_API sb_status sb_dataset_from_arrays(const char* study_id, const char* label_a,
                                        const double* times_a, const int* status_a, size_t n_a,
                                        const char* label_b, const double* times_b,
                                        const int* status_b, size_t n_b, sb_dataset** out);
SB_API sb_status sb_dataset_store(const sb_dataset* dataset, const char* path);
SB_API void sb_dataset_free(sb_dataset* dataset);
SB_API const char* sb_dataset_study_id(const sb_dataset* dataset);
SB_API const char* sb_dataset_arm_label(const sb_dataset* dataset, size_t arm);
SB_API size_t sb_dataset_arm_size(const sb_dataset* dataset, size_t arm);
/* Copies one arm into caller buffers of at least sb_dataset_arm_size() entries. */
SB_API sb_status sb_dataset_arm_copy(const sb_dataset* dataset, size_t arm, double* times,
                                     int* status, size_t capacity);

SB_API sb_status sb_evaluate(const sb_dataset* dataset, sb_evaluation* out);
SB_API sb_status sb_evaluate_json(const sb_dataset* dataset, char** json_out);

/* Accepts "parametric", "kde", "case", "condboot" and the long names. */
SB_API sb_status sb_engine_from_name(const char* name, sb_engine* out);
SB_API sb_status sb_model_build(sb_engine engine, const sb_dataset* dataset, sb_model** out);
SB_API void sb_model_free(sb_model* model);
/* n_per_arm = 0 simulates each arm at its source size. */
SB_API sb_status sb_model_simulate(const sb_model* model, uint64_t seed, uint64_t stream_id,
                                   size_t n_per_arm, sb_dataset** out);
SB_API sb_status sb_model_summary_json(const sb_model* model, char** json_out);

/* Rebuilds a study from digitized curves (time,survival CSV) and risk
   tables (time,n_risk CSV). `meta_path` (total events per label) and
   `report_json` may be NULL. */
SB_API sb_status sb_reconstruct_files(const char* study_id, const char* label_a,
                                      const char* coords_a, const char* risk_a,
                                      const char* label_b, const char* coords_b,
                                      const char* risk_b, const char* meta_path,
                                      sb_dataset** out, char** report_json);

/* Runs bench.json and writes reports to `outdir`. `threads` < 0 keeps the
   config value. `skipped` (may be NULL) receives the skipped pair count. */
SB_API sb_status sb_bench_run(const char* config_path, const char* outdir, int threads,
                              size_t* skipped);

#ifdef __cplusplus
}
#endif

#endif
