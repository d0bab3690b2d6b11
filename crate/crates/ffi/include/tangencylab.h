#ifndef TANGENCYLAB_H
#define TANGENCYLAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_INVALID_ARGUMENT = 2,
  TL_STATUS_PRECONDITION = 3,
  TL_STATUS_DOMAIN = 4,
  TL_STATUS_NUMERICAL = 5,
  TL_STATUS_IO = 6,
  TL_STATUS_PANIC = 7,
} TlStatus;

typedef enum TlOrbitClass {
  TL_ORBIT_CLASS_SINK = 0,
  TL_ORBIT_CLASS_SADDLE = 1,
  TL_ORBIT_CLASS_SOURCE = 2,
  TL_ORBIT_CLASS_NONHYPERBOLIC = 3,
} TlOrbitClass;

/**
 * Opaque cascade result handle.
 */
typedef struct TlCascade TlCascade;

/**
 * Opaque model handle.
 */
typedef struct TlModel TlModel;

typedef struct TlPoint {
  double x;
  double y;
} TlPoint;

typedef struct TlQuadAnalysis {
  double mu_hat;
  /**
   * Number of real fixed points (0, 1 or 2).
   */
  uint32_t fixed_point_count;
  double fixed_points[2];
  /**
   * Multiplier of the lower fixed point; NaN when there is none.
   */
  double sink_multiplier;
  bool is_sink;
} TlQuadAnalysis;

typedef struct TlOrbit {
  struct TlPoint point;
  size_t period;
  /**
   * Multipliers ordered by decreasing modulus.
   */
  double multiplier_re[2];
  double multiplier_im[2];
  enum TlOrbitClass orbit_class;
  double residual;
} TlOrbit;

typedef struct TlWindow {
  size_t index;
  size_t n;
  size_t period;
  double t_center;
  double nu_zero;
  double nu_minus;
  double nu_plus;
  double t_minus;
  double t_plus;
  double width;
} TlWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on the calling thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tl_last_error_message(void);

/**
 * The default model. Free with `tl_model_free`.
 */
struct TlModel *tl_model_default(void);

/**
 * Parses and validates a model configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TlStatus tl_model_from_json(const char *json, struct TlModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void tl_model_free(struct TlModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
enum TlStatus tl_model_set_t(struct TlModel *model, double t);

/**
 * Image of `p` under the return map through the saddle itinerary `word`
 * (a string of '0' and '1').
 *
 * # Safety
 * `model` must be a live handle, `word` NUL-terminated, `out` valid.
 */
enum TlStatus tl_return_map(const struct TlModel *model,
                            const char *word,
                            struct TlPoint p,
                            struct TlPoint *out);

/**
 * Jacobian of the return map at `p`, row-major.
 *
 * # Safety
 * `model` must be a live handle, `word` NUL-terminated, `out` room for 4 doubles.
 */
enum TlStatus tl_return_jacobian(const struct TlModel *model,
                                 const char *word,
                                 struct TlPoint p,
                                 double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum TlStatus tl_quad_analyze(double mu_hat, struct TlQuadAnalysis *out);

/**
 * Thickness of the symmetric self-similar set with ratio `r` at `depth`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TlStatus tl_thickness_affine(double r, size_t depth, double *out);

/**
 * Periodic orbit of the return through `word` by Newton's method from `seed`.
 *
 * # Safety
 * `model` must be a live handle, `word` NUL-terminated, `out` valid.
 */
enum TlStatus tl_find_periodic(const struct TlModel *model,
                               const char *word,
                               struct TlPoint seed,
                               struct TlOrbit *out);

/**
 * Sink window of the tangency addressed by `word`. A nonpositive `rho`
 * disables the eigenvalue narrowing.
 *
 * # Safety
 * `model` must be a live handle, `word` NUL-terminated, `out` valid.
 */
enum TlStatus tl_sink_window(const struct TlModel *model,
                             const char *word,
                             double rho,
                             double eps,
                             struct TlWindow *out);

/**
 * Runs the cascade construction. `min_n` may be NULL when `min_n_len` is 0.
 * On failure `*out` is NULL.
 *
 * # Safety
 * `model` must be a live handle, `min_n` valid for `min_n_len` reads, `out` valid.
 */
enum TlStatus tl_cascade_run(const struct TlModel *model,
                             size_t sinks,
                             double rho,
                             const size_t *min_n,
                             size_t min_n_len,
                             double eps,
                             struct TlCascade **out);

/**
 * # Safety
 * `cascade` must be NULL or a handle not yet freed.
 */
void tl_cascade_free(struct TlCascade *cascade);

/**
 * Number of windows, or 0 for NULL.
 *
 * # Safety
 * `cascade` must be NULL or a live handle.
 */
size_t tl_cascade_window_count(const struct TlCascade *cascade);

/**
 * # Safety
 * `cascade` must be a live handle and `out` valid.
 */
enum TlStatus tl_cascade_window(const struct TlCascade *cascade,
                                size_t index,
                                struct TlWindow *out);

/**
 * # Safety
 * `cascade` must be a live handle and `out` valid.
 */
enum TlStatus tl_cascade_t_infinity(const struct TlCascade *cascade, double *out);

/**
 * JSON form of the cascade result. Free the string with `tl_string_free`.
 *
 * # Safety
 * `cascade` must be a live handle and `out` valid.
 */
enum TlStatus tl_cascade_to_json(const struct TlCascade *cascade, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void tl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TANGENCYLAB_H */
