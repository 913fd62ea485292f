#ifndef MSRD_MSRD_H
#define MSRD_MSRD_H

/* C interface to the msrd library. Objects are opaque handles owned by the
 * caller and released with the matching _free function. Every fallible call
 * returns an msrd_status; on failure msrd_last_error() describes the cause
 * for the calling thread until its next failing call. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(MSRD_BUILDING_LIBRARY)
#define MSRD_API __attribute__((visibility("default")))
#else
#define MSRD_API
#endif

typedef enum msrd_status {
  MSRD_OK = 0,
  MSRD_ERR_INTERNAL = 1, /* unexpected failure inside the library */
  MSRD_ERR_CONFIG = 2,   /* invalid configuration, arguments or file contents */
  MSRD_ERR_IO = 3,       /* file open, read or write failure */
  MSRD_ERR_NUMERIC = 4   /* non-finite values during training */
} msrd_status;

typedef struct msrd_config msrd_config;
typedef struct msrd_demoset msrd_demoset;

MSRD_API const char* msrd_version(void);
MSRD_API const char* msrd_last_error(void);

/* Configuration. A new config holds every default. */
MSRD_API msrd_status msrd_config_new(msrd_config** out);
MSRD_API msrd_status msrd_config_parse(const char* ini_text, msrd_config** out);
MSRD_API msrd_status msrd_config_load(const char* path, msrd_config** out);
MSRD_API void msrd_config_free(msrd_config* cfg);
/* key is "section.key"; value uses the config file syntax. */
MSRD_API msrd_status msrd_config_set(msrd_config* cfg, const char* key, const char* value);
/* Copies the value and a terminating NUL into buf when it fits; *needed
 * receives the full length including the NUL. */
MSRD_API msrd_status msrd_config_get(const msrd_config* cfg, const char* key, char* buf,
                                     size_t cap, size_t* needed);
/* Canonical INI text, same buffer protocol as msrd_config_get. */
MSRD_API msrd_status msrd_config_to_ini(const msrd_config* cfg, char* buf, size_t cap,
                                        size_t* needed);
/* Applies MSRD_SEED and MSRD_OUT from the environment. */
MSRD_API msrd_status msrd_config_apply_env(msrd_config* cfg);
MSRD_API msrd_status msrd_config_validate(const msrd_config* cfg);

/* Pipeline stages; outputs go to the config's run.out directory. */
MSRD_API msrd_status msrd_gen_demos(const msrd_config* cfg);
/* method: "msrd", "airl" or "vanilla_distill". resume_path may be NULL. */
MSRD_API msrd_status msrd_train(const msrd_config* cfg, const char* demos_path,
                                const char* method, const char* resume_path);
MSRD_API msrd_status msrd_eval(const msrd_config* cfg, const char* demos_path,
                               const char* checkpoint_dir, const char* method);

/* Demonstration files (binary or JSONL, detected from content). */
MSRD_API msrd_status msrd_demoset_load(const char* path, msrd_demoset** out);
MSRD_API void msrd_demoset_free(msrd_demoset* demos);
MSRD_API size_t msrd_demoset_num_strategies(const msrd_demoset* demos);
MSRD_API size_t msrd_demoset_state_dim(const msrd_demoset* demos);
MSRD_API size_t msrd_demoset_action_dim(const msrd_demoset* demos);
MSRD_API msrd_status msrd_demoset_num_trajectories(const msrd_demoset* demos,
                                                   size_t strategy, size_t* out);
MSRD_API msrd_status msrd_demoset_trajectory_length(const msrd_demoset* demos,
                                                    size_t strategy, size_t index,
                                                    size_t* out);
/* Undiscounted sum of recorded task rewards. */
MSRD_API msrd_status msrd_demoset_trajectory_return(const msrd_demoset* demos,
                                                    size_t strategy, size_t index,
                                                    double* out);

/* Numeric helpers. */
MSRD_API msrd_status msrd_pearson(const double* a, const double* b, size_t n, double* out);
MSRD_API double msrd_discriminator_prob(double f_value, double log_pi);

#ifdef __cplusplus
}
#endif

#endif
