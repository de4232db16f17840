#ifndef EWQOF_H
#define EWQOF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EwqofStatus {
  EWQOF_STATUS_OK = 0,
  EWQOF_STATUS_NULL_POINTER = 1,
  EWQOF_STATUS_INVALID_ARGUMENT = 2,
  EWQOF_STATUS_INVALID_CONFIG = 3,
  EWQOF_STATUS_PARSE = 4,
  EWQOF_STATUS_TOPOLOGY = 5,
  EWQOF_STATUS_FORMATION_TIMEOUT = 6,
  EWQOF_STATUS_PANIC = 7,
} EwqofStatus;

typedef enum EwqofStrategy {
  EWQOF_STRATEGY_EWQOF = 0,
  EWQOF_STRATEGY_MAX_QOF = 1,
} EwqofStrategy;

/**
 * Opaque simulation configuration.
 */
typedef struct EwqofConfig EwqofConfig;

/**
 * Opaque result of one run.
 */
typedef struct EwqofReport EwqofReport;

typedef struct EwqofEstimatorParams {
  double alpha;
  double theta_th;
  double delta_th;
  double eta;
  double etx_worst;
} EwqofEstimatorParams;

/**
 * A child's view of one candidate parent.
 */
typedef struct EwqofParentView {
  uint32_t parent_id;
  uint32_t rank;
  /**
   * Advertised queue occupancy in [0, 1].
   */
  double advertised_qof;
  double advertised_beta;
  /**
   * Transmissions attempted over the link.
   */
  uint64_t tnop;
  /**
   * Successful transmissions, at most `tnop`.
   */
  uint64_t tnopss;
} EwqofParentView;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ewqof_last_error_message(void);

/**
 * A configuration holding the reference defaults.
 */
struct EwqofConfig *ewqof_config_default(void);

/**
 * Parses a TOML configuration; absent keys take their defaults.
 *
 * # Safety
 * `toml` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum EwqofStatus ewqof_config_from_toml(const char *toml, struct EwqofConfig **out);

/**
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void ewqof_config_free(struct EwqofConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum EwqofStatus ewqof_config_set_node_count(struct EwqofConfig *config, size_t node_count);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum EwqofStatus ewqof_config_set_strategy(struct EwqofConfig *config, enum EwqofStrategy strategy);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum EwqofStatus ewqof_config_set_duration_slotframes(struct EwqofConfig *config,
                                                      uint64_t slotframes);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum EwqofStatus ewqof_config_set_history(struct EwqofConfig *config, size_t k);

/**
 * Sets the estimator thresholds in one call.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum EwqofStatus ewqof_config_set_estimator(struct EwqofConfig *config,
                                            struct EwqofEstimatorParams params);

/**
 * Returns `InvalidConfig` with every violation in the error message.
 *
 * # Safety
 * `config` must be a live handle or null.
 */
enum EwqofStatus ewqof_config_validate(const struct EwqofConfig *config);

/**
 * Runs one simulation with `seed` and stores a new report in `out`.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum EwqofStatus ewqof_run(const struct EwqofConfig *config,
                           uint64_t seed,
                           struct EwqofReport **out);

/**
 * # Safety
 * `report` must come from this library and not be used afterwards.
 */
void ewqof_report_free(struct EwqofReport *report);

/**
 * Packet delivery ratio; NaN for a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
double ewqof_report_pdr(const struct EwqofReport *report);

/**
 * Delivered payload bits per second; NaN for a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
double ewqof_report_throughput_bps(const struct EwqofReport *report);

/**
 * Mean per-node energy in mJ; NaN for a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
double ewqof_report_avg_energy_mj(const struct EwqofReport *report);

/**
 * Parent changes during measurement.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
uint64_t ewqof_report_total_swaps(const struct EwqofReport *report);

/**
 * Packets generated during measurement.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
uint64_t ewqof_report_generated(const struct EwqofReport *report);

/**
 * Packets that reached the root.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
uint64_t ewqof_report_delivered(const struct EwqofReport *report);

/**
 * Nodes in the run, root included.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
size_t ewqof_report_node_count(const struct EwqofReport *report);

/**
 * Full report as JSON; release with [`ewqof_string_free`]. Null on error.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
char *ewqof_report_to_json(const struct EwqofReport *report);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ewqof_string_free(char *s);

struct EwqofEstimatorParams ewqof_estimator_params_default(void);

/**
 * Exponentially weighted congestion level of the last `k` of `len`
 * samples, oldest first.
 *
 * # Safety
 * `values` must point to `len` doubles and `out` must be valid.
 */
enum EwqofStatus ewqof_beta_ewqof(const double *values,
                                  size_t len,
                                  size_t k,
                                  double alpha,
                                  double *out);

/**
 * Largest of the last `k` of `len` samples.
 *
 * # Safety
 * `values` must point to `len` doubles and `out` must be valid.
 */
enum EwqofStatus ewqof_beta_maxqof(const double *values, size_t len, size_t k, double *out);

/**
 * `rank + ETX + eta * QOF` of one candidate.
 *
 * # Safety
 * `view` and `out` must be valid pointers.
 */
enum EwqofStatus ewqof_parent_score(const struct EwqofParentView *view,
                                    double eta,
                                    double etx_worst,
                                    double *out);

/**
 * Runs parent selection. On success `*swap` tells whether to leave
 * `current`, and `*new_parent` holds the chosen id when it does.
 *
 * # Safety
 * `current`, `swap` and `new_parent` must be valid; `candidates` must point
 * to `count` views.
 */
enum EwqofStatus ewqof_select_parent(const struct EwqofParentView *current,
                                     const struct EwqofParentView *candidates,
                                     size_t count,
                                     struct EwqofEstimatorParams params,
                                     bool *swap,
                                     uint32_t *new_parent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EWQOF_H */
