/* C interface to the rgflow library. All handles are opaque; functions return rg_status. */
#ifndef RGFLOW_H
#define RGFLOW_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(RGFLOW_BUILDING)
#define RGFLOW_API __attribute__((visibility("default")))
#else
#define RGFLOW_API
#endif

typedef enum rg_status {
  RG_OK = 0,
  RG_ERR_INVALID = 1, /* bad argument or configuration value */
  RG_ERR_PARSE = 2,   /* malformed configuration text */
  RG_ERR_NUMERIC = 3, /* non-finite value, failed factorisation, tuner divergence */
  RG_ERR_BUDGET = 4,  /* a size cap was exceeded */
  RG_ERR_IO = 5,
  RG_ERR_INTERNAL = 6
} rg_status;

typedef struct rg_config rg_config;
typedef struct rg_report rg_report;

RGFLOW_API const char* rg_version(void);

/* Message for the last failure on this thread; empty string if none. */
RGFLOW_API const char* rg_last_error(void);

RGFLOW_API rg_status rg_config_new(rg_config** out);
/* Reads an INI or JSON file (chosen by extension) into the config, replacing earlier file contents. */
RGFLOW_API rg_status rg_config_load(rg_config* cfg, const char* path);
RGFLOW_API rg_status rg_config_parse(rg_config* cfg, const char* text, int is_json);
/* "section.key=value"; later assignments win. */
RGFLOW_API rg_status rg_config_set(rg_config* cfg, const char* assignment);
/* Resolved configuration as JSON; owned by the config, valid until the next call on it. */
RGFLOW_API rg_status rg_config_json(rg_config* cfg, const char** json);
RGFLOW_API void rg_config_free(rg_config* cfg);

RGFLOW_API int rg_subcommand_count(void);
RGFLOW_API const char* rg_subcommand_name(int i);

/* 0 means all cores. */
RGFLOW_API void rg_set_workers(int n);

RGFLOW_API rg_status rg_run(const rg_config* cfg, const char* subcommand, rg_report** out);
/* 1 if every check passed. */
RGFLOW_API int rg_report_passed(const rg_report* rep);
RGFLOW_API const char* rg_report_json(rg_report* rep);
RGFLOW_API rg_status rg_report_write(const rg_report* rep, const char* dir, int json, int csv);
RGFLOW_API void rg_report_free(rg_report* rep);

#ifdef __cplusplus
}
#endif

#endif
