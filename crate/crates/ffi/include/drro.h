#ifndef DRRO_H
#define DRRO_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>

/*
 Result of every call.
 */
typedef enum DrroStatus {
  DRRO_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  DRRO_STATUS_NULL_POINTER = 1,
  /*
   Malformed input: dimensions, strings, files or configuration.
   */
  DRRO_STATUS_INVALID_ARGUMENT = 2,
  /*
   A numerical failure in the library.
   */
  DRRO_STATUS_NUMERICAL = 3,
  /*
   An iterative solver stopped before converging. Synthesis still
   returns its handle in this case.
   */
  DRRO_STATUS_NON_CONVERGENCE = 4,
  /*
   The output buffer is too small; the required length was written back.
   */
  DRRO_STATUS_BUFFER_TOO_SMALL = 5,
  /*
   An internal invariant failed.
   */
  DRRO_STATUS_INTERNAL = 6,
} DrroStatus;

/*
 A finite-dimensional controller `xi+ = F xi + G w, u = H xi + J w`.
 */
typedef struct DrroController DrroController;

/*
 A plant together with its Riccati solution.
 */
typedef struct DrroModel DrroModel;

/*
 A finished (or stopped) worst-case spectrum synthesis.
 */
typedef struct DrroSynthesis DrroSynthesis;

typedef struct DrroSynthesisInfo {
  double radius;
  double regret;
  double gamma_star;
  size_t iterations;
  size_t grid;
  bool converged;
} DrroSynthesisInfo;

typedef struct DrroControllerDims {
  size_t states;
  size_t inputs;
  size_t outputs;
  /*
   Trailing states that replicate the negated plant state.
   */
  size_t replica_states;
} DrroControllerDims;

/*
 Message of the last failed call on this thread, or null. The pointer
 stays valid until the next call on this thread.
 */
const char *drro_last_error(void);

/*
 Library version as a static string.
 */
const char *drro_version(void);

/*
 Builds a plant from row-major `A` (d_x x d_x), `B_u` (d_x x d_u),
 `B_w` (d_x x d_w) and `C` (d_s x d_x).

 # Safety
 Each matrix pointer must reference at least rows * cols readable doubles.
 */
enum DrroStatus drro_model_new(const double *a,
                               const double *b_u,
                               const double *b_w,
                               const double *c,
                               size_t d_x,
                               size_t d_u,
                               size_t d_w,
                               size_t d_s,
                               struct DrroModel **out);

/*
 Loads a plant from a TOML matrix document.

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum DrroStatus drro_model_read(const char *path, struct DrroModel **out);

/*
 Loads a bundled benchmark plant: "ac15", "he3", "rea4" or "scalar".

 # Safety
 `name` must be a nul-terminated string; `out` must be writable.
 */
enum DrroStatus drro_model_builtin(const char *name, struct DrroModel **out);

/*
 # Safety
 `model` must come from this library; dimension pointers may be null.
 */
enum DrroStatus drro_model_dims(const struct DrroModel *model,
                                size_t *d_x,
                                size_t *d_u,
                                size_t *d_w,
                                size_t *d_s);

/*
 # Safety
 `model` must come from this library and not be used afterwards.
 */
void drro_model_free(struct DrroModel *model);

/*
 Solves for the worst-case disturbance spectrum at `radius`.

 `grid` (a power of two), `tol` and `max_iter` fall back to the library
 defaults when zero. A run that stops at `max_iter` returns
 `NonConvergence` and still hands back its result.

 # Safety
 `model` must come from this library; `out` must be writable.
 */
enum DrroStatus drro_synthesize(const struct DrroModel *model,
                                double radius,
                                size_t grid,
                                double tol,
                                size_t max_iter,
                                struct DrroSynthesis **out);

/*
 # Safety
 `synthesis` must come from this library; `info` must be writable.
 */
enum DrroStatus drro_synthesis_info(const struct DrroSynthesis *synthesis,
                                    struct DrroSynthesisInfo *info);

/*
 Copies the worst-case spectrum samples at `exp(i 2 pi k / N)`.

 # Safety
 `out` must hold `len` doubles; `needed` may be null.
 */
enum DrroStatus drro_synthesis_spectrum(const struct DrroSynthesis *synthesis,
                                        double *out,
                                        size_t len,
                                        size_t *needed);

/*
 # Safety
 `synthesis` must come from this library and not be used afterwards.
 */
void drro_synthesis_free(struct DrroSynthesis *synthesis);

/*
 Fits a rational spectrum of `degree` to a synthesis and realizes the
 controller. `lp_grid` falls back to the library default when zero.

 # Safety
 Handles must come from this library and belong together; `out` must be
 writable.
 */
enum DrroStatus drro_controller_realize(const struct DrroModel *model,
                                        const struct DrroSynthesis *synthesis,
                                        size_t degree,
                                        size_t lp_grid,
                                        struct DrroController **out);

/*
 The H2 (LQR with disturbance feedforward) controller of a plant.

 # Safety
 `model` must come from this library; `out` must be writable.
 */
enum DrroStatus drro_controller_h2(const struct DrroModel *model, struct DrroController **out);

/*
 # Safety
 `controller` must come from this library; `dims` must be writable.
 */
enum DrroStatus drro_controller_dims(const struct DrroController *controller,
                                     struct DrroControllerDims *dims);

/*
 Copies one realization matrix, selected by `which` ('F', 'G', 'H' or
 'J'), in row-major order.

 # Safety
 `out` must hold `len` doubles; `needed` may be null.
 */
enum DrroStatus drro_controller_matrix(const struct DrroController *controller,
                                       char which,
                                       double *out,
                                       size_t len,
                                       size_t *needed);

/*
 Spectral radius of the closed loop formed with `model`; `stable` is set
 when it is below one.

 # Safety
 Handles must come from this library; `radius` must be writable and
 `stable` may be null.
 */
enum DrroStatus drro_controller_closed_loop(const struct DrroModel *model,
                                            const struct DrroController *controller,
                                            double *radius,
                                            bool *stable);

/*
 Worst-case expected regret of a controller over the Wasserstein ball of
 `radius`, evaluated on a frequency grid of `grid` points (power of two).

 # Safety
 Handles must come from this library; `regret` must be writable.
 */
enum DrroStatus drro_controller_regret(const struct DrroModel *model,
                                       const struct DrroController *controller,
                                       double radius,
                                       size_t grid,
                                       double *regret);

/*
 Writes a controller as a TOML matrix document.

 # Safety
 `controller` must come from this library; `path` must be nul-terminated.
 */
enum DrroStatus drro_controller_write(const struct DrroController *controller, const char *path);

/*
 # Safety
 `controller` must come from this library and not be used afterwards.
 */
void drro_controller_free(struct DrroController *controller);

#endif  /* DRRO_H */
