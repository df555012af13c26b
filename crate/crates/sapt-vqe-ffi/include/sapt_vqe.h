#ifndef SAPT_VQE_H
#define SAPT_VQE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SaptStatus {
  SAPT_STATUS_OK = 0,
  SAPT_STATUS_NULL_POINTER = 1,
  SAPT_STATUS_VALIDATION = 2,
  SAPT_STATUS_NUMERICAL = 3,
  SAPT_STATUS_IO = 4,
  SAPT_STATUS_INVALID_UTF8 = 5,
  SAPT_STATUS_PANIC = 6,
} SaptStatus;

typedef enum SaptTerm {
  SAPT_TERM_ELST = 0,
  SAPT_TERM_EXCH = 1,
  SAPT_TERM_IND_U = 2,
  SAPT_TERM_EXCH_IND_U = 3,
  SAPT_TERM_DISP = 4,
  SAPT_TERM_EXCH_DISP = 5,
  SAPT_TERM_TOTAL = 6,
} SaptTerm;

/**
 * Opaque integral bundle.
 */
typedef struct SaptBundle SaptBundle;

/**
 * Opaque SAPT report.
 */
typedef struct SaptReport SaptReport;

typedef struct SaptBundleDims {
  uintptr_t n_orb_a;
  uintptr_t n_orb_b;
  uintptr_t n_elec_a;
  uintptr_t n_elec_b;
  uintptr_t n_active_a;
  uintptr_t n_active_b;
} SaptBundleDims;

typedef struct SaptResources {
  uintptr_t n_qubits;
  uintptr_t n_params;
  uintptr_t n_two_qubit_gates;
  uintptr_t depth;
} SaptResources;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *sapt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sapt_version(void);

/**
 * Reads and validates a bundle file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SaptStatus sapt_bundle_read(const char *path, struct SaptBundle **out);

/**
 * Parses and validates a bundle from memory.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be a valid pointer.
 */
enum SaptStatus sapt_bundle_from_bytes(const uint8_t *data, uintptr_t len, struct SaptBundle **out);

/**
 * # Safety
 * `bundle` and `out` must be valid pointers.
 */
enum SaptStatus sapt_bundle_dims(const struct SaptBundle *bundle, struct SaptBundleDims *out);

/**
 * # Safety
 * `bundle` must be NULL or a handle from this library that has not been freed.
 */
void sapt_bundle_free(struct SaptBundle *bundle);

/**
 * Runs the pipeline on `bundle` with a JSON run configuration
 * (`bundle_path` and `output_path` are ignored; NULL means defaults).
 *
 * # Safety
 * `bundle` must be a live handle, `config_json` NULL or a NUL-terminated
 * string, and `out` a valid pointer.
 */
enum SaptStatus sapt_run(const struct SaptBundle *bundle,
                         const char *config_json,
                         struct SaptReport **out);

/**
 * One energy term in Hartree.
 *
 * # Safety
 * `report` and `hartree` must be valid pointers.
 */
enum SaptStatus sapt_report_energy(const struct SaptReport *report,
                                   enum SaptTerm term,
                                   double *hartree);

/**
 * The full report as JSON; release with [`sapt_string_free`]. NULL on failure.
 *
 * # Safety
 * `report` must be a live handle.
 */
char *sapt_report_json(const struct SaptReport *report);

/**
 * # Safety
 * `report` must be NULL or a handle from this library that has not been freed.
 */
void sapt_report_free(struct SaptReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library that has not been freed.
 */
void sapt_string_free(char *s);

/**
 * Circuit resource counts for `m` active orbitals and `k` layers.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SaptStatus sapt_resource_count(uintptr_t m, uintptr_t k, struct SaptResources *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAPT_VQE_H */
