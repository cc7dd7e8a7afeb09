#ifndef GKBO_H
#define GKBO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GkboDiffusion {
  GKBO_DIFFUSION_ISOTROPIC = 0,
  GKBO_DIFFUSION_ANISOTROPIC = 1,
} GkboDiffusion;

typedef enum GkboStatus {
  GKBO_STATUS_OK = 0,
  GKBO_STATUS_NULL_POINTER = 1,
  GKBO_STATUS_INVALID_ARGUMENT = 2,
  GKBO_STATUS_NUMERIC = 3,
  GKBO_STATUS_EMPTY_LEADER_SET = 4,
  GKBO_STATUS_OUT_OF_RANGE = 5,
  GKBO_STATUS_PANIC = 6,
} GkboStatus;

typedef enum GkboFunctionKind {
  GKBO_FUNCTION_KIND_RASTRIGIN = 0,
  GKBO_FUNCTION_KIND_ACKLEY = 1,
} GkboFunctionKind;

/*
 Opaque objective handle.
 */
typedef struct GkboObjective GkboObjective;

/*
 Opaque run report handle.
 */
typedef struct GkboReport GkboReport;

/*
 Opaque handle to a GKBO run advanced one iteration at a time.
 */
typedef struct GkboRun GkboRun;

/*
 GKBO hyperparameters, passed by value.
 */
typedef struct GkboSolverParams {
  double nu_f;
  double nu_l;
  double sigma_f;
  double eps;
  double alpha;
  uintptr_t n_leaders;
  uintptr_t n_steps;
  double delta_stall;
  uintptr_t j_stall;
  enum GkboDiffusion diffusion;
  uint64_t seed;
  double domain_lo;
  double domain_hi;
} GkboSolverParams;

/*
 Polarized CBO hyperparameters, passed by value.
 */
typedef struct GkboPcboParams {
  double nu;
  double sigma;
  double alpha;
  uintptr_t n_clusters;
  uintptr_t n_steps;
  double delta_stall;
  uintptr_t j_stall;
  enum GkboDiffusion diffusion;
  uint64_t seed;
  double domain_lo;
  double domain_hi;
} GkboPcboParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the most recent failure on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *gkbo_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *gkbo_version(void);

/*
 Defaults: ν_F = 1, ν_L = 2, σ_F = 2.5, ε = 0.1, α = 5e6, N_L = 12,
 N_t = 10000, δ_stall = 1e-4, j_stall = 1000, anisotropic, [-10, 10].
 */
struct GkboSolverParams gkbo_solver_params_default(void);

struct GkboPcboParams gkbo_pcbo_params_default(void);

/*
 Creates a named preset objective ("rastrigin2", "ackley4", ...).
 */
enum GkboStatus gkbo_objective_preset(const char *name, uintptr_t dim, struct GkboObjective **out);

/*
 Creates an objective from `n_minima` row-major minimizers of length `dim`.
 */
enum GkboStatus gkbo_objective_new(enum GkboFunctionKind kind,
                                   uintptr_t dim,
                                   const double *minimizers,
                                   uintptr_t n_minima,
                                   struct GkboObjective **out);

void gkbo_objective_free(struct GkboObjective *obj);

/*
 Dimension of the objective, 0 for NULL.
 */
uintptr_t gkbo_objective_dim(const struct GkboObjective *obj);

uintptr_t gkbo_objective_n_minima(const struct GkboObjective *obj);

enum GkboStatus gkbo_objective_eval(const struct GkboObjective *obj,
                                    const double *x,
                                    uintptr_t len,
                                    double *out_value);

/*
 Runs GKBO with `n_agents` agents to termination.
 */
enum GkboStatus gkbo_run(const struct GkboObjective *obj,
                         const struct GkboSolverParams *params,
                         uintptr_t n_agents,
                         struct GkboReport **out);

/*
 Runs polarized CBO with `n_particles` particles to termination.
 */
enum GkboStatus gkbo_pcbo_run(const struct GkboObjective *obj,
                              const struct GkboPcboParams *params,
                              uintptr_t n_particles,
                              struct GkboReport **out);

enum GkboStatus gkbo_run_new(const struct GkboObjective *obj,
                             const struct GkboSolverParams *params,
                             uintptr_t n_agents,
                             struct GkboRun **out);

/*
 Advances one iteration; `*out_advanced` is false once the run has
 terminated.
 */
enum GkboStatus gkbo_run_step(struct GkboRun *run, bool *out_advanced);

/*
 Snapshot of the run's current state as a report.
 */
enum GkboStatus gkbo_run_report(const struct GkboRun *run, struct GkboReport **out);

void gkbo_run_free(struct GkboRun *run);

void gkbo_report_free(struct GkboReport *report);

uintptr_t gkbo_report_iterations(const struct GkboReport *report);

bool gkbo_report_stalled(const struct GkboReport *report);

uint64_t gkbo_report_evaluations(const struct GkboReport *report);

uintptr_t gkbo_report_leader_count(const struct GkboReport *report);

/*
 Lowest objective value in the final ensemble; NaN for NULL.
 */
double gkbo_report_best_value(const struct GkboReport *report);

uint64_t gkbo_report_seed(const struct GkboReport *report);

/*
 Number of distinct final consensus points.
 */
uintptr_t gkbo_report_consensus_count(const struct GkboReport *report);

/*
 Copies consensus point `index` into `out` (capacity `len`, must equal the
 objective dimension).
 */
enum GkboStatus gkbo_report_consensus(const struct GkboReport *report,
                                      uintptr_t index,
                                      double *out,
                                      uintptr_t len);

/*
 Scores a report against the objective's planted minimizers with the
 0.25 max-norm detection radius.
 */
enum GkboStatus gkbo_report_evaluate(const struct GkboReport *report,
                                     const struct GkboObjective *obj,
                                     bool *out_success,
                                     uintptr_t *out_detected);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GKBO_H */
