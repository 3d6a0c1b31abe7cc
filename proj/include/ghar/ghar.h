/* C interface to the ghar engine.
 *
 * Every function returns a ghar_status. On failure the calling thread's last
 * error is set to a JSON object {"error": <status name>, "message": ...}
 * (plus "fields" for invalid requests); read it with ghar_last_error().
 * Strings returned through char** out-parameters are owned by the caller and
 * released with ghar_string_free().
 */
#ifndef GHAR_GHAR_H
#define GHAR_GHAR_H

#include <stddef.h>
#include <stdint.h>

#if defined(GHAR_BUILDING_LIBRARY)
#define GHAR_API __attribute__((visibility("default")))
#else
#define GHAR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ghar_status {
  GHAR_OK = 0,
  GHAR_INVALID_ARGUMENT = 1,
  GHAR_PARSE_ERROR = 2,
  GHAR_CONSISTENCY_ERROR = 3,
  GHAR_UNKNOWN_META_PATH = 4,
  GHAR_CONFIG_ERROR = 5,
  GHAR_RETRIEVAL_ERROR = 6,
  GHAR_PROVIDER_ERROR = 7,
  GHAR_NUMERIC_ERROR = 8,
  GHAR_SHAPE_ERROR = 9,
  GHAR_IO_ERROR = 10,
  GHAR_NOT_FOUND = 11,
  GHAR_NOT_LABELABLE = 12,
  GHAR_INTERNAL_ERROR = 13
} ghar_status;

typedef struct ghar_engine ghar_engine;

/* Skip reading or building partition indexes at creation. */
#define GHAR_ENGINE_NO_INDEXES 1u

GHAR_API const char* ghar_version(void);
GHAR_API const char* ghar_status_name(ghar_status status);
/* 1 for user-caused failures, 2 for internal or upstream failures, 0 for GHAR_OK. */
GHAR_API int ghar_status_exit_code(ghar_status status);
/* Valid until the next failing call on this thread; "" when none. */
GHAR_API const char* ghar_last_error(void);
GHAR_API void ghar_string_free(char* s);

/* config_path may be NULL (then $GHAR_CONFIG, then defaults); overrides_json
 * is a JSON merge patch over the config document, or NULL. */
GHAR_API ghar_status ghar_engine_create(const char* config_path, const char* overrides_json, unsigned flags,
                                        ghar_engine** out);
GHAR_API void ghar_engine_destroy(ghar_engine* engine);

GHAR_API ghar_status ghar_engine_config_json(const ghar_engine* engine, char** out);
GHAR_API ghar_status ghar_engine_catalog_json(const ghar_engine* engine, char** out);
GHAR_API ghar_status ghar_engine_health_json(const ghar_engine* engine, char** out);

/* Builds indexes for the listed meta-paths (all when count is 0) and writes
 * them to out_path. */
GHAR_API ghar_status ghar_engine_build_indexes(ghar_engine* engine, const char* const* meta_paths, size_t count,
                                               const char* out_path);

/* Runs one EpisodeRequest; *trajectory_json receives the trajectory line. */
GHAR_API ghar_status ghar_engine_run_episode(const ghar_engine* engine, const char* request_json,
                                             char** trajectory_json);

/* Runs a task over every patient of the cohort file (the first `limit`
 * when limit > 0) and writes trajectory JSON Lines to out_path. Returns
 * GHAR_PROVIDER_ERROR (or the first failure's status) after writing when
 * some episodes failed. */
GHAR_API ghar_status ghar_engine_run_cohort(const ghar_engine* engine, const char* cohort_path, const char* task,
                                            size_t limit, const char* out_path);

/* Blocks serving HTTP until the process ends. */
GHAR_API ghar_status ghar_engine_serve(const ghar_engine* engine);

/* Validates a TSV triple file; writes the catalog JSON to catalog_path when
 * non-NULL. *summary_json gets {"nodes","edges","node_types","edge_types","meta_paths"}. */
GHAR_API ghar_status ghar_ingest(const char* tsv_path, const char* catalog_path, char** summary_json);

/* task, split and gold_cohort_path may be NULL. */
GHAR_API ghar_status ghar_eval(const char* trajectories_path, const char* task, const char* split,
                               const char* gold_cohort_path, char** metrics_json);

/* Writes the score export to out_path; *scored receives the count of
 * scorable trajectories. */
GHAR_API ghar_status ghar_score(const char* trajectories_path, const char* out_path, size_t* scored);

/* Pretty-prints one episode; episode_id NULL selects the first. */
GHAR_API ghar_status ghar_replay(const char* trajectories_path, const char* episode_id, char** text);

/* spec_json keys: seed, n_patients, n_diagnoses, n_procedures, n_medications,
 * min_visits, max_visits, mean_stay_days, dec_prevalence, high_risk_rate,
 * kappa; missing keys keep their defaults. */
GHAR_API ghar_status ghar_gen_cohort(const char* spec_json, const char* out_path);
GHAR_API ghar_status ghar_gen_kg(uint64_t seed, size_t n_nodes, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* GHAR_GHAR_H */
