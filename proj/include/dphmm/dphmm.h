#ifndef DPHMM_DPHMM_H
#define DPHMM_DPHMM_H

/* C interface to the dphmm library. Every object is an opaque handle created
 * by a *_create / *_load / *_run function and released by the matching
 * *_free. Functions report failures through dphmm_status; the message for the
 * most recent failure on the calling thread is available from
 * dphmm_last_error(). Strings returned through char** are owned by the caller
 * and released with dphmm_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DPHMM_API __declspec(dllexport)
#else
#define DPHMM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dphmm_status {
  DPHMM_OK = 0,
  DPHMM_ERR_USAGE = 1,     /* invalid argument or configuration */
  DPHMM_ERR_DATA = 2,      /* unreadable or malformed input */
  DPHMM_ERR_NUMERICAL = 3, /* sampler hit an impossible state */
  DPHMM_ERR_INTERNAL = 4
} dphmm_status;

typedef struct dphmm_config dphmm_config;
typedef struct dphmm_dataset dphmm_dataset;
typedef struct dphmm_simulation dphmm_simulation;
typedef struct dphmm_fit dphmm_fit;
typedef struct dphmm_samples dphmm_samples;

DPHMM_API const char* dphmm_version(void);
DPHMM_API const char* dphmm_last_error(void);
DPHMM_API void dphmm_string_free(char* s);

/* Sampler configuration. Defaults: 1000 iterations, no burn-in, thin 1, one
 * chain, m = 3 auxiliary components, seed 1, two-state model. */
DPHMM_API dphmm_status dphmm_config_create(dphmm_config** out);
DPHMM_API dphmm_status dphmm_config_parse_json(const char* json, dphmm_config** out);
DPHMM_API dphmm_status dphmm_config_load_json(const char* path, dphmm_config** out);
/* key: iterations, burn_in, thin, chains, m, seed, adaptation_window */
DPHMM_API dphmm_status dphmm_config_set_uint(dphmm_config* config, const char* key, uint64_t value);
DPHMM_API dphmm_status dphmm_config_set_model(dphmm_config* config, const char* model);
DPHMM_API dphmm_status dphmm_config_to_json(const dphmm_config* config, char** out);
DPHMM_API void dphmm_config_free(dphmm_config* config);

/* Reads the config echoed in a run manifest and the digest of the capture
 * file that run used. */
DPHMM_API dphmm_status dphmm_manifest_load(const char* path, dphmm_config** config, char** data_digest);

/* model: "two-state" or "three-state" */
DPHMM_API dphmm_status dphmm_dataset_load_csv(const char* path, const char* model, dphmm_dataset** out);
DPHMM_API size_t dphmm_dataset_individuals(const dphmm_dataset* data);
DPHMM_API const char* dphmm_dataset_digest(const dphmm_dataset* data);
DPHMM_API void dphmm_dataset_free(dphmm_dataset* data);

/* design_json: simulation design; replicate selects an independent stream of
 * the design's seed. */
DPHMM_API dphmm_status dphmm_simulate(const char* design_json, uint64_t replicate, dphmm_simulation** out);
/* Writes capture.csv, truth.csv, paths.csv and simulation.json. */
DPHMM_API dphmm_status dphmm_simulation_write(const dphmm_simulation* sim, const char* out_dir);
DPHMM_API void dphmm_simulation_free(dphmm_simulation* sim);

/* Progress callback: one JSON object per call, no trailing newline. May be
 * invoked from worker threads, one call at a time. */
typedef void (*dphmm_progress_fn)(const char* json_line, void* user);

DPHMM_API dphmm_status dphmm_fit_run(const dphmm_dataset* data, const dphmm_config* config,
                                     dphmm_progress_fn progress, void* user, dphmm_fit** out);
DPHMM_API size_t dphmm_fit_sample_count(const dphmm_fit* fit);
DPHMM_API const char* dphmm_fit_digest(const dphmm_fit* fit);
/* Writes samples.csv and manifest.json. */
DPHMM_API dphmm_status dphmm_fit_write(const dphmm_fit* fit, const char* out_dir);
DPHMM_API void dphmm_fit_free(dphmm_fit* fit);

DPHMM_API dphmm_status dphmm_samples_load_csv(const char* path, dphmm_samples** out);
DPHMM_API size_t dphmm_samples_count(const dphmm_samples* samples);
/* Writes k_frequencies.csv, log_alpha_density.csv, pooled_density.csv,
 * individual_intervals.csv and summary.json. */
DPHMM_API dphmm_status dphmm_samples_summarize(const dphmm_samples* samples, const char* out_dir);
DPHMM_API void dphmm_samples_free(dphmm_samples* samples);

/* Draws `replicates` seatings of n customers from a CRP(alpha) and counts
 * how often each table count occurs. out_counts has n + 1 entries; entry k
 * receives the count for k tables. */
DPHMM_API dphmm_status dphmm_crp_cluster_counts(size_t n, double alpha, size_t replicates, uint64_t seed,
                                                uint64_t* out_counts);

#ifdef __cplusplus
}
#endif

#endif
