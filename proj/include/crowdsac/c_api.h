/* C interface to the crowd-navigation DSAC library.
 *
 * All handles are opaque. Every call returns a cs_status; on failure the
 * message is available from cs_last_error() until the next call on the same
 * thread.
 */
#ifndef CROWDSAC_C_API_H
#define CROWDSAC_C_API_H

#include <stddef.h>
#include <stdint.h>

#if defined(CROWDSAC_BUILDING)
#define CS_API __attribute__((visibility("default")))
#else
#define CS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
  CS_OK = 0,
  CS_ERR_CONFIG = 1,       /* bad configuration value or checkpoint/config mismatch */
  CS_ERR_INVALID = 2,      /* invalid input value */
  CS_ERR_USAGE = 3,        /* API misuse */
  CS_ERR_NUMERIC = 4,      /* non-finite gradient or value */
  CS_ERR_PARSE = 5,        /* malformed file */
  CS_ERR_SPAWN = 6,        /* could not place agents */
  CS_ERR_IO = 7,           /* filesystem failure */
  CS_ERR_CHECK_FAILED = 8, /* an oracle check or evaluation gate failed */
  CS_ERR_INTERNAL = 9
} cs_status;

typedef struct cs_config cs_config;
typedef struct cs_agent cs_agent;

typedef struct cs_eval_summary {
  int episodes;
  double success_rate;
  double time_to_goal; /* NaN when nothing succeeded */
  double collision_rate;
  double timeout_rate;
  double mean_min_distance;
  double mean_reward;
} cs_eval_summary;

CS_API const char* cs_last_error(void);
CS_API const char* cs_status_name(cs_status status);

/* Configuration. path may be NULL for all defaults. */
CS_API cs_status cs_config_load(const char* path, cs_config** out);
/* key is "section.name", e.g. "sim.n_obstacles". */
CS_API cs_status cs_config_set(cs_config* config, const char* key, const char* value);
/* Canonical INI text. Writes at most capacity bytes including the NUL;
 * *needed receives the full length plus one. */
CS_API cs_status cs_config_dump(const cs_config* config, char* buffer, size_t capacity, size_t* needed);
CS_API void cs_config_free(cs_config* config);

/* Commands. Progress goes to stdout. */
CS_API cs_status cs_train(const cs_config* config);
/* out_dir may be NULL. transfer != 0 also evaluates on the square scenario. */
CS_API cs_status cs_eval(const cs_config* config, const char* checkpoint, int episodes, int transfer,
                         const char* out_dir, cs_eval_summary* summary, cs_eval_summary* transfer_summary);
CS_API cs_status cs_inspect(const cs_config* config, const char* checkpoint, uint64_t episode_seed,
                            const char* out_dir);
CS_API cs_status cs_render(const char* trajectory_csv, const char* svg_path);
/* suite: grad, tabular, reward, orca, inject or all. */
CS_API cs_status cs_oracle(const char* suite);

/* Frozen agent for inference. */
CS_API cs_status cs_agent_load(const cs_config* config, const char* checkpoint, cs_agent** out);
/* robot: 9 values [px, py, vx, vy, r, gx, gy, v_pref, heading];
 * obstacles: n_obstacles rows of [px, py, vx, vy, r]. */
CS_API cs_status cs_agent_act(const cs_agent* agent, const double* robot, const double* obstacles,
                              size_t n_obstacles, int greedy, uint64_t seed, int* action);
/* Fills probs[0..80]. */
CS_API cs_status cs_agent_policy(const cs_agent* agent, const double* robot, const double* obstacles,
                                 size_t n_obstacles, double* probs, size_t capacity);
CS_API void cs_agent_free(cs_agent* agent);

#ifdef __cplusplus
}
#endif

#endif /* CROWDSAC_C_API_H */
