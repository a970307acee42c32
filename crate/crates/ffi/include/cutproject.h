#ifndef CUTPROJECT_H
#define CUTPROJECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes of fallible calls.
typedef enum CpStatus {
  CP_STATUS_OK = 0,
  CP_STATUS_NULL_POINTER = 1,
  CP_STATUS_INVALID_UTF8 = 2,
  CP_STATUS_PARSE = 3,
  CP_STATUS_INVALID_INPUT = 4,
  CP_STATUS_RESOURCE = 5,
  CP_STATUS_CERTIFICATION = 6,
  CP_STATUS_VERIFICATION = 7,
  CP_STATUS_BUFFER_TOO_SMALL = 8,
  CP_STATUS_PANIC = 9,
} CpStatus;

// Opaque finite patch of a point set.
typedef struct CpPatch CpPatch;

// Opaque cut-and-project scheme.
typedef struct CpScheme CpScheme;

// Opaque window in the internal space of some scheme.
typedef struct CpWindow CpWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *cp_last_error_message(void);

// # Safety
// `s` must be NULL or a string returned by this library.
void cp_string_free(char *s);

// The Fibonacci scheme `(ℝ, ℝ, ℤ[τ] Minkowski-embedded)`.
struct CpScheme *cp_scheme_fibonacci(void);

// # Safety
// `json` must be a NUL-terminated string, `out` a valid pointer.
enum CpStatus cp_scheme_from_json(const char *json, struct CpScheme **out);

// # Safety
// `scheme` must be a live handle, `out` a valid pointer.
enum CpStatus cp_scheme_to_json(const struct CpScheme *scheme, char **out);

// Direct dimension, or 0 for NULL.
//
// # Safety
// `scheme` must be NULL or a live handle.
uintptr_t cp_scheme_dim(const struct CpScheme *scheme);

// Lattice rank, or 0 for NULL.
//
// # Safety
// `scheme` must be NULL or a live handle.
uintptr_t cp_scheme_rank(const struct CpScheme *scheme);

// `dens(𝓛) = 1 / covolume` as a double.
//
// # Safety
// `scheme` must be a live handle, `out` a valid pointer.
enum CpStatus cp_scheme_density(const struct CpScheme *scheme, double *out);

// # Safety
// `scheme` must be NULL or a handle not yet freed.
void cp_scheme_free(struct CpScheme *scheme);

// Window in `ℝ` from interval notation, e.g. `(-1, tau-1]`.
//
// # Safety
// `notation` must be a NUL-terminated string, `out` a valid pointer.
enum CpStatus cp_window_parse(const char *notation, struct CpWindow **out);

// # Safety
// `json` must be a NUL-terminated string, `out` a valid pointer.
enum CpStatus cp_window_from_json(const char *json, struct CpWindow **out);

// # Safety
// `window` must be NULL or a handle not yet freed.
void cp_window_free(struct CpWindow *window);

// `Λ_W ∩ B`; `bbox` is `[lo, hi]` or `lo:hi` per axis, comma separated
// (`-5:5,0:10`).
//
// # Safety
// Handles must be live, `bbox` NUL-terminated, `out` a valid pointer.
enum CpStatus cp_generate(const struct CpScheme *scheme,
                          const struct CpWindow *window,
                          const char *bbox,
                          struct CpPatch **out);

// Number of points, or 0 for NULL.
//
// # Safety
// `patch` must be NULL or a live handle.
uintptr_t cp_patch_len(const struct CpPatch *patch);

// Point dimension, or 0 for NULL.
//
// # Safety
// `patch` must be NULL or a live handle.
uintptr_t cp_patch_dim(const struct CpPatch *patch);

// Writes the points as doubles, row-major, into `buf` of length `cap`
// (at least `len * dim`).
//
// # Safety
// `patch` must be a live handle and `buf` valid for `cap` writes.
enum CpStatus cp_patch_points(const struct CpPatch *patch, double *buf, uintptr_t cap);

// Exact patch JSON (points as exact expressions).
//
// # Safety
// `patch` must be a live handle, `out` a valid pointer.
enum CpStatus cp_patch_to_json(const struct CpPatch *patch, char **out);

// # Safety
// `patch` must be NULL or a handle not yet freed.
void cp_patch_free(struct CpPatch *patch);

// Translation scheme of the shift `shift` (comma-separated exact
// expressions), decided up to `bound`. Writes the new scheme and the
// certificate JSON; `certificate` may be NULL.
//
// # Safety
// `scheme` must be a live handle, `shift` NUL-terminated, `out` valid.
enum CpStatus cp_translate(const struct CpScheme *scheme,
                           const char *shift,
                           uint64_t bound,
                           struct CpScheme **out,
                           char **certificate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUTPROJECT_H */
