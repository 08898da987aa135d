/* C interface to the jumpflow library. */
#ifndef JUMPFLOW_H
#define JUMPFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(JUMPFLOW_BUILDING_LIBRARY)
#define JF_API __attribute__((visibility("default")))
#else
#define JF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum jf_status {
  JF_OK = 0,
  JF_ERR_VALIDATION = 1, /* bad input, unknown config key, unreadable file */
  JF_ERR_NUMERIC = 2,    /* integrator blow-up, solver failure */
  JF_ERR_DOMAIN = 3,     /* mathematically undefined request */
  JF_ERR_INTERNAL = 4
} jf_status;

typedef struct jf_experiment jf_experiment;
typedef struct jf_system jf_system;

JF_API const char* jf_version(void);
/* Message of the last failure on the calling thread; empty when none. */
JF_API const char* jf_last_error(void);

/* Experiments: a parsed configuration plus overrides. */
JF_API jf_status jf_experiment_from_json(const char* json_text, jf_experiment** out);
JF_API jf_status jf_experiment_from_file(const char* path, jf_experiment** out);
JF_API void jf_experiment_free(jf_experiment* e);
JF_API jf_status jf_experiment_set_seed(jf_experiment* e, uint64_t seed);
JF_API jf_status jf_experiment_set_replicas(jf_experiment* e, uint64_t replicas);
JF_API jf_status jf_experiment_set_output(jf_experiment* e, const char* dir);
/* 0 = hardware concurrency. Never changes results. */
JF_API jf_status jf_experiment_set_threads(jf_experiment* e, unsigned threads);
/* Resolved configuration JSON; valid until the next call on e. */
JF_API const char* jf_experiment_resolved_config(jf_experiment* e);
JF_API jf_status jf_experiment_run(jf_experiment* e, const char* subcommand);
/* Summary JSON of the last successful run; empty before any run. */
JF_API const char* jf_experiment_summary(const jf_experiment* e);

/* Number of subcommands and their names. */
JF_API size_t jf_subcommand_count(void);
JF_API const char* jf_subcommand_name(size_t i);

/* Systems built from the "system" block of a configuration. */
JF_API jf_status jf_system_from_json(const char* json_text, jf_system** out);
JF_API void jf_system_free(jf_system* s);
JF_API int jf_system_state_dim(const jf_system* s);
JF_API int jf_system_noise_dim(const jf_system* s);
/* S_t(x): x and out have state_dim entries. */
JF_API jf_status jf_system_flow(const jf_system* s, const double* x, double t, double* out);
/* Embedded chain X_{tau_1..tau_k} from x; out holds k * state_dim values. */
JF_API jf_status jf_system_embedded_chain(const jf_system* s, const double* x, int k, uint64_t seed,
                                          uint64_t replica, double* out);

/* Kalman rank of (A, B); A is d x d, B is d x n, both column-major. */
JF_API jf_status jf_kalman_rank(const double* a, const double* b, int d, int n, int* rank);

#ifdef __cplusplus
}
#endif

#endif
