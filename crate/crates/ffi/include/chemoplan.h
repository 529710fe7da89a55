#ifndef CHEMOPLAN_H
#define CHEMOPLAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every fallible function.
typedef enum ChemoStatus {
  CHEMO_STATUS_OK = 0,
  CHEMO_STATUS_NULL_POINTER = 1,
  CHEMO_STATUS_INVALID_ARGUMENT = 2,
  CHEMO_STATUS_SIMULATION_FAILURE = 3,
  CHEMO_STATUS_IO = 4,
  CHEMO_STATUS_PANIC = 5,
} ChemoStatus;

// A non-dominated set of schedules.
typedef struct ChemoArchive ChemoArchive;

// A patient parameter set.
typedef struct ChemoPatient ChemoPatient;

typedef struct ChemoObjectives {
  // Tumor cells at the end of treatment (minimized; +inf for failed runs).
  double f1;
  // Neutrophils at the end of treatment (maximized).
  double f2;
  // Lowest neutrophil count seen.
  double min_circ;
  bool feasible;
} ChemoObjectives;

typedef struct ChemoReport {
  double avg_dose;
  double avg_concentration;
  double avg_circ;
  uint64_t cells_remaining;
  double pct_reduction;
  bool tumor_grew;
} ChemoReport;

typedef struct ChemoSwarmOptions {
  size_t population;
  size_t generations;
  uint64_t seed;
  // Evaluate particles on all cores; results do not depend on it.
  bool parallel;
} ChemoSwarmOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next call into this library from the same thread.
const char *chemo_last_error_message(void);

// Built-in default patient with the default 21-day simulation settings.
struct ChemoPatient *chemo_patient_default(void);

// Parses a patient parameter JSON document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum ChemoStatus chemo_patient_from_json(const char *json, struct ChemoPatient **out);

// # Safety
// `patient` must come from this library and not be used afterwards. Null is ignored.
void chemo_patient_free(struct ChemoPatient *patient);

// Simulates a daily schedule of `len` doses and writes its objectives.
//
// # Safety
// `doses` must point to `len` readable doubles; `out` must be writable.
enum ChemoStatus chemo_evaluate(const struct ChemoPatient *patient,
                                const double *doses,
                                size_t len,
                                struct ChemoObjectives *out);

// Simulates a daily schedule and writes the plan summary.
//
// # Safety
// As for [`chemo_evaluate`].
enum ChemoStatus chemo_report(const struct ChemoPatient *patient,
                              const double *doses,
                              size_t len,
                              struct ChemoReport *out);

// Runs the optimizer; other swarm settings keep their defaults.
//
// # Safety
// `options` must be readable and `out` writable.
enum ChemoStatus chemo_optimize(const struct ChemoPatient *patient,
                                const struct ChemoSwarmOptions *options,
                                struct ChemoArchive **out);

// Number of members; 0 for null.
//
// # Safety
// `archive` must be null or come from this library.
size_t chemo_archive_len(const struct ChemoArchive *archive);

// Copies member `index`. `position` receives up to `capacity` doses;
// `position_len` (optional) receives the full schedule length.
//
// # Safety
// `position` must hold `capacity` doubles (or be null with capacity 0);
// `objectives_out` and `position_len` may be null.
enum ChemoStatus chemo_archive_member(const struct ChemoArchive *archive,
                                      size_t index,
                                      double *position,
                                      size_t capacity,
                                      size_t *position_len,
                                      struct ChemoObjectives *objectives_out);

// Serializes the archive as JSON; free the string with [`chemo_string_free`].
//
// # Safety
// `out` must be writable.
enum ChemoStatus chemo_archive_to_json(const struct ChemoArchive *archive, char **out);

// # Safety
// `archive` must come from this library and not be used afterwards. Null is ignored.
void chemo_archive_free(struct ChemoArchive *archive);

// # Safety
// `s` must come from this library. Null is ignored.
void chemo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEMOPLAN_H */
