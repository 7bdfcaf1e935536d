#ifndef SATRAIN_H
#define SATRAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SatrainStatus {
  SATRAIN_STATUS_OK = 0,
  SATRAIN_STATUS_NULL_POINTER = 1,
  SATRAIN_STATUS_INVALID_ARGUMENT = 2,
  SATRAIN_STATUS_OUT_OF_RANGE = 3,
  SATRAIN_STATUS_PARSE_ERROR = 4,
  SATRAIN_STATUS_CONFIG_ERROR = 5,
  // Nothing left to pop.
  SATRAIN_STATUS_EMPTY = 6,
  SATRAIN_STATUS_PANIC = 7,
} SatrainStatus;

typedef enum SatrainQuality {
  SATRAIN_QUALITY_OK = 0,
  SATRAIN_QUALITY_DEGRADED = 1,
  SATRAIN_QUALITY_MASKED = 2,
  SATRAIN_QUALITY_INVALID = 3,
  SATRAIN_QUALITY_GLOBAL = 4,
} SatrainQuality;

// Opaque engine handle.
typedef struct SatrainEngine SatrainEngine;

// Link noise parameters; losses in dB, temperatures in K.
typedef struct SatrainLinkParams {
  double atm_loss_db;
  double cloud_loss_db;
  double t_cosmos;
  double t_meteo;
  double t_ground;
  double t_receiver;
} SatrainLinkParams;

// Slant-path geometry with Ku-band power-law coefficients.
typedef struct SatrainGeometry {
  double elevation_deg;
  double isotherm_height_km;
  double melting_thickness_km;
} SatrainGeometry;

// One per-sample estimate. Absent values are NaN.
typedef struct SatrainRecord {
  // Index into the engine's station registry.
  uint32_t station_index;
  // Start of the sample's minute, Unix seconds.
  int64_t timestamp;
  double epsilon_db;
  bool rain_flag;
  double l_rain_db;
  double rate_mm_per_h;
  enum SatrainQuality quality;
} SatrainRecord;

// One closed rain event. Absent values are NaN.
typedef struct SatrainEvent {
  uint32_t station_index;
  int64_t onset;
  int64_t end;
  double dry_ref_db;
  double h0_km;
  double peak_rate_mm_per_h;
  double cumulative_mm;
  uint32_t rate_samples;
  uint32_t invalid_samples;
  enum SatrainQuality quality;
} SatrainEvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *satrain_last_error_message(void);

// Noise-coupling constant ξ of a link.
//
// # Safety
// `params` and `out` must be valid pointers or NULL.
enum SatrainStatus satrain_compute_xi(const struct SatrainLinkParams *params, double *out);

// Slant-path rain attenuation (dB) for a ground rain rate (mm/h).
//
// # Safety
// `g` and `out` must be valid pointers or NULL.
enum SatrainStatus satrain_total_attenuation_db(const struct SatrainGeometry *g,
                                                double rate_mm_per_h,
                                                double *out);

// Ground rain rate (mm/h) producing the given attenuation (dB).
//
// # Safety
// `g` and `out` must be valid pointers or NULL.
enum SatrainStatus satrain_invert_to_rain_rate(const struct SatrainGeometry *g,
                                               double l_rain_db,
                                               double *out);

// Linear rain attenuation and rain rate from a frozen dry reference and
// the fast tracker level, both dB.
//
// # Safety
// `g`, `l_rain_linear` and `rate_mm_per_h` must be valid pointers or NULL.
enum SatrainStatus satrain_estimate_rate(double dry_ref_db,
                                         double eta_ft_db,
                                         double xi,
                                         const struct SatrainGeometry *g,
                                         double *l_rain_linear,
                                         double *rate_mm_per_h);

// Horizontal length of the wet slant path, km.
//
// # Safety
// `out` must be a valid pointer or NULL.
enum SatrainStatus satrain_ground_footprint(double h0_km, double elevation_rad, double *out);

// Gaussian probability that ε exceeds `threshold`.
//
// # Safety
// `out` must be a valid pointer or NULL.
enum SatrainStatus satrain_false_alarm_probability(double eps_mean,
                                                   double eps_std,
                                                   double threshold,
                                                   double *out);

// Creates an engine.
//
// `config` is key = value text (NULL for defaults), `registry` the station
// TOML, `forecast` and `transits` CSV text or NULL.
//
// # Safety
// String arguments must be NUL-terminated or NULL; `out` must be valid.
enum SatrainStatus satrain_engine_new(const char *config,
                                      const char *registry,
                                      const char *forecast,
                                      const char *transits,
                                      struct SatrainEngine **out);

// Creates an engine from a state written by `satrain_engine_checkpoint`.
// The other inputs must match the ones the checkpointed engine used.
//
// # Safety
// As for `satrain_engine_new`; `checkpoint` must be NUL-terminated.
enum SatrainStatus satrain_engine_restore(const char *config,
                                          const char *registry,
                                          const char *forecast,
                                          const char *transits,
                                          const char *checkpoint,
                                          struct SatrainEngine **out);

// Releases an engine. NULL is ignored.
//
// # Safety
// `engine` must come from this library and not be used afterwards.
void satrain_engine_free(struct SatrainEngine *engine);

// Feeds one measurement. Records must come in non-decreasing time order;
// late, duplicate or unknown-station records are counted and dropped.
//
// # Safety
// `engine` must be a live handle; `station_id` NUL-terminated.
enum SatrainStatus satrain_engine_push(struct SatrainEngine *engine,
                                       const char *station_id,
                                       int64_t unix_seconds,
                                       double esn0_db);

// Feeds one JSON telemetry line. Malformed lines are counted and dropped.
//
// # Safety
// `engine` must be a live handle; `line` NUL-terminated.
enum SatrainStatus satrain_engine_push_line(struct SatrainEngine *engine, const char *line);

// Processes the minute still being collected.
//
// # Safety
// `engine` must be a live handle.
enum SatrainStatus satrain_engine_flush(struct SatrainEngine *engine);

// Takes the oldest pending estimate; `Empty` when there is none.
//
// # Safety
// `engine` and `out` must be valid.
enum SatrainStatus satrain_engine_pop_record(struct SatrainEngine *engine,
                                             struct SatrainRecord *out);

// Takes the oldest closed event; `Empty` when there is none.
//
// # Safety
// `engine` and `out` must be valid.
enum SatrainStatus satrain_engine_pop_event(struct SatrainEngine *engine, struct SatrainEvent *out);

// Number of registered stations.
//
// # Safety
// `engine` and `out` must be valid.
enum SatrainStatus satrain_engine_station_count(const struct SatrainEngine *engine, uint32_t *out);

// Copy of a station id; free with `satrain_string_free`.
//
// # Safety
// `engine` and `out` must be valid.
enum SatrainStatus satrain_engine_station_id(const struct SatrainEngine *engine,
                                             uint32_t index,
                                             char **out);

// Serialized engine state (JSON); free with `satrain_string_free`.
// Pending, not yet popped outputs are not part of the state.
//
// # Safety
// `engine` and `out` must be valid.
enum SatrainStatus satrain_engine_checkpoint(const struct SatrainEngine *engine, char **out);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void satrain_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SATRAIN_H */
