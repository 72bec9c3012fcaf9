#ifndef EVSIM_H
#define EVSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum EvsimStatus {
  EVSIM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  EVSIM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  EVSIM_STATUS_INVALID_STRING = 2,
  /**
   * The configuration was rejected.
   */
  EVSIM_STATUS_CONFIG = 3,
  /**
   * An input was outside the domain of an operation.
   */
  EVSIM_STATUS_DOMAIN = 4,
  /**
   * The run diverged, hit a boost pole or drained the battery.
   */
  EVSIM_STATUS_NUMERICAL = 5,
  EVSIM_STATUS_IO = 6,
  /**
   * A file was malformed.
   */
  EVSIM_STATUS_FORMAT = 7,
  /**
   * An index was past the end of a log.
   */
  EVSIM_STATUS_OUT_OF_RANGE = 8,
  /**
   * An internal invariant failed.
   */
  EVSIM_STATUS_PANIC = 9,
} EvsimStatus;

/**
 * A scenario configuration being assembled.
 */
typedef struct EvsimConfig EvsimConfig;

/**
 * The log of a finished run.
 */
typedef struct EvsimLog EvsimLog;

/**
 * One logged time step.
 */
typedef struct EvsimRecord {
  double t;
  double reference;
  double speed_rpm;
  double v_kmph;
  double torque_nm;
  double load_nm;
  double theta_r;
  double soc;
  double v_batt;
  double v_dclink;
  double u_cmd;
  double sigma;
  double p_tract_w;
} EvsimRecord;

/**
 * Tracking figures of a run.
 */
typedef struct EvsimMetrics {
  double rmse;
  /**
   * False when the signal never stayed inside the band.
   */
  bool settled;
  /**
   * Settling time in seconds; NaN when not settled.
   */
  double settling_time_s;
  double steady_state_value;
  double overshoot_pct;
} EvsimMetrics;

/**
 * Whole-run figures tracked at every step.
 */
typedef struct EvsimSummary {
  size_t steps;
  double max_current_imbalance;
  double tractive_energy_j;
  double final_soc;
} EvsimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or null after a
 * success. The pointer stays valid until the next call on this thread.
 */
const char *evsim_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *evsim_version(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void evsim_string_free(char *s);

/**
 * New configuration holding the defaults.
 *
 * # Safety
 * `out` must be writable for one pointer.
 */
enum EvsimStatus evsim_config_new(struct EvsimConfig **out);

/**
 * Configuration parsed from TOML text. A relative `scenario.cycle` is
 * resolved against `base_dir`, or the working directory when it is null.
 *
 * # Safety
 * `text` must be a nul-terminated string, `base_dir` null or one, and
 * `out` writable for one pointer.
 */
enum EvsimStatus evsim_config_from_str(const char *text,
                                       const char *base_dir,
                                       struct EvsimConfig **out);

/**
 * Configuration read from a TOML file; a relative cycle path is resolved
 * against the file's directory.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` writable for one pointer.
 */
enum EvsimStatus evsim_config_from_file(const char *path, struct EvsimConfig **out);

/**
 * Apply one `key=value` assignment, e.g. `"controller.kind=pid"`.
 *
 * # Safety
 * `cfg` must be a live configuration and `assignment` a nul-terminated string.
 */
enum EvsimStatus evsim_config_set(struct EvsimConfig *cfg, const char *assignment);

/**
 * The configuration as TOML text; release it with [`evsim_string_free`].
 *
 * # Safety
 * `cfg` must be a live configuration and `out` writable for one pointer.
 */
enum EvsimStatus evsim_config_render(const struct EvsimConfig *cfg, char **out);

/**
 * Release a configuration. Null is ignored.
 *
 * # Safety
 * `cfg` must be null or a configuration from this library, not yet freed.
 */
void evsim_config_free(struct EvsimConfig *cfg);

/**
 * Validate the configuration, run it and return the log.
 *
 * # Safety
 * `cfg` must be a live configuration and `out` writable for one pointer.
 */
enum EvsimStatus evsim_run(const struct EvsimConfig *cfg, struct EvsimLog **out);

/**
 * Number of logged records; 0 for a null log.
 *
 * # Safety
 * `log` must be null or a live log.
 */
size_t evsim_log_len(const struct EvsimLog *log);

/**
 * Copy record `index` into `out`.
 *
 * # Safety
 * `log` must be a live log and `out` writable for one record.
 */
enum EvsimStatus evsim_log_record(const struct EvsimLog *log,
                                  size_t index,
                                  struct EvsimRecord *out);

/**
 * Tracking metrics of the run, scored as the `run` command scores them.
 *
 * # Safety
 * `log` must be a live log and `out` writable for one value.
 */
enum EvsimStatus evsim_log_metrics(const struct EvsimLog *log, struct EvsimMetrics *out);

/**
 * Whole-run figures.
 *
 * # Safety
 * `log` must be a live log and `out` writable for one value.
 */
enum EvsimStatus evsim_log_summary(const struct EvsimLog *log, struct EvsimSummary *out);

/**
 * Write the log as CSV.
 *
 * # Safety
 * `log` must be a live log and `path` a nul-terminated string.
 */
enum EvsimStatus evsim_log_write_csv(const struct EvsimLog *log, const char *path);

/**
 * Release a log. Null is ignored.
 *
 * # Safety
 * `log` must be null or a log from this library, not yet freed.
 */
void evsim_log_free(struct EvsimLog *log);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVSIM_H */
