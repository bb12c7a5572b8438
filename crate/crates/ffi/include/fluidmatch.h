#ifndef FLUIDMATCH_H
#define FLUIDMATCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FmSolver {
  FM_SOLVER_MM = 0,
  FM_SOLVER_PG = 1,
} FmSolver;

// Status codes. Nonzero values match the exit codes of the command-line tool.
typedef enum FmStatus {
  FM_STATUS_OK = 0,
  FM_STATUS_NULL_POINTER = 1,
  FM_STATUS_INVALID_INPUT = 2,
  FM_STATUS_SOLVER_FAILURE = 3,
  // The time cap stopped the solver; outputs hold the last iterate.
  FM_STATUS_TIME_CAP_REACHED = 4,
  FM_STATUS_PANIC = 5,
} FmStatus;

typedef enum FmVerdict {
  FM_VERDICT_CONCAVE_CERTIFIED = 0,
  FM_VERDICT_WEAKLY_CONCAVE_CERTIFIED = 1,
  FM_VERDICT_INCONCLUSIVE = 2,
  FM_VERDICT_KNOWN_VIOLATION_WITNESS = 3,
} FmVerdict;

// Arrival-rate box, patience rates and route costs of a market.
typedef struct FmInstance FmInstance;

// Optimal fluid LP solution at one rate vector.
typedef struct FmSolution FmSolution;

typedef struct FmPriceOptions {
  enum FmSolver solver;
  // Convergence threshold on the change of the objective.
  double eps;
  // Wall-clock cap in seconds.
  double time_cap;
  // Initial projected-gradient step; ignored by MM.
  double step0;
  // Curvature increment for MM; 0 picks the scale-based default.
  double delta_mm;
  // Seeds the start point when none is given.
  uint64_t seed;
} FmPriceOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *fm_last_error(void);

// Library version as a static NUL-terminated string.
const char *fm_version(void);

// Builds an instance of `n` types. `pair_cost` is row-major `n * n`; the
// other arrays have length `n`.
//
// Every array pointer must be valid for the stated length and `out` must be
// writable.
enum FmStatus fm_instance_new(size_t n,
                              const double *theta,
                              const double *solo_cost,
                              const double *pair_cost,
                              const double *lambda_lower,
                              const double *lambda_upper,
                              struct FmInstance **out);

// Loads an instance JSON file, or the matching part of a bundle file.
//
// `path` must be a NUL-terminated string and `out` writable.
enum FmStatus fm_instance_load(const char *path, struct FmInstance **out);

// `inst` must come from this library and not be used afterwards. NULL is a no-op.
void fm_instance_free(struct FmInstance *inst);

// Number of types, or 0 for NULL.
//
// `inst` must be NULL or a live handle.
size_t fm_instance_n_types(const struct FmInstance *inst);

// Solves the fluid LP at `lambda` (length = number of types).
//
// `inst` must be a live handle, `lambda` valid for `len` reads, `out` writable.
enum FmStatus fm_solve(const struct FmInstance *inst,
                       const double *lambda,
                       size_t len,
                       struct FmSolution **out);

// Optimal cost at `lambda` without keeping the solution.
//
// As for [`fm_solve`]; `out_cost` must be writable.
enum FmStatus fm_cost(const struct FmInstance *inst,
                      const double *lambda,
                      size_t len,
                      double *out_cost);

// `sol` must come from this library and not be used afterwards. NULL is a no-op.
void fm_solution_free(struct FmSolution *sol);

// Optimal cost, or NaN for NULL.
//
// `sol` must be NULL or a live handle.
double fm_solution_objective(const struct FmSolution *sol);

// Copies the match rates, row-major `n * n` with rows indexing the active type.
//
// `sol` must be a live handle and `buf` valid for `len` writes.
enum FmStatus fm_solution_x(const struct FmSolution *sol, double *buf, size_t len);

// Copies the unmatched rates (length `n`).
//
// `sol` must be a live handle and `buf` valid for `len` writes.
enum FmStatus fm_solution_y(const struct FmSolution *sol, double *buf, size_t len);

// Copies the envelope supergradient of the cost (length `n`).
//
// `sol` must be a live handle and `buf` valid for `len` writes.
enum FmStatus fm_solution_gradient(const struct FmSolution *sol, double *buf, size_t len);

// Certifies concavity on the instance's rate box. When `summary` is
// non-NULL, a NUL-terminated description such as
// `WeaklyConcaveCertified (Cor3_N3_sameTheta)` is written into it,
// truncated to `summary_len - 1` bytes.
//
// `inst` must be a live handle, `out_verdict` writable and `summary` NULL or
// valid for `summary_len` writes.
enum FmStatus fm_certify(const struct FmInstance *inst,
                         enum FmVerdict *out_verdict,
                         char *summary,
                         size_t summary_len);

// Defaults: MM, `eps = 1e-3`, 20-minute cap, `step0 = 1`, default curvature
// increment, seed 0.
struct FmPriceOptions fm_price_options_default(void);

// Maximizes revenue minus matching cost under linear demand with per-type
// solo trip lengths and zero-price rates. `lambda0` may be NULL to draw a
// start point from the box. On `FM_STATUS_OK` or `FM_STATUS_TIME_CAP_REACHED`
// the rates, objective and iteration count are written out.
//
// Arrays must be valid for `n` elements (`lambda0` may be NULL), `options`
// may be NULL for defaults, and outputs must be writable.
enum FmStatus fm_price(const struct FmInstance *inst,
                       const double *solo_length,
                       const double *max_rate,
                       const double *lambda0,
                       size_t n,
                       const struct FmPriceOptions *options,
                       double *out_lambda,
                       double *out_objective,
                       size_t *out_iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLUIDMATCH_H */
