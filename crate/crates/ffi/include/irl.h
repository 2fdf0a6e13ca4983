#ifndef IRL_H
#define IRL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrlStatus {
  IRL_STATUS_OK = 0,
  IRL_STATUS_NULL_POINTER = 1,
  IRL_STATUS_INVALID_ARGUMENT = 2,
  IRL_STATUS_DIMENSION_MISMATCH = 3,
  IRL_STATUS_NOT_CONVERGED = 4,
  IRL_STATUS_INVALID_MODEL = 5,
  IRL_STATUS_IO = 6,
  IRL_STATUS_BUFFER_TOO_SMALL = 7,
  IRL_STATUS_PANIC = 8,
} IrlStatus;

typedef enum IrlMethod {
  IRL_METHOD_PLAIN = 0,
  IRL_METHOD_NATURAL = 1,
  IRL_METHOD_RPROP = 2,
} IrlMethod;

/*
 A benchmark instance: model, features, ground truth.
 */
typedef struct IrlModel IrlModel;

/*
 Expert policy with the state weights of the loss.
 */
typedef struct IrlTarget IrlTarget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`) and returns the full message length plus one.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t irl_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *irl_version(void);

/*
 Loads a model file written by `irl gen-gridworld` or `irl gen-sailing`,
 with its ground-truth sidecar.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum IrlStatus irl_model_from_json(const char *path, struct IrlModel **out);

/*
 # Safety
 `out` must be writable.
 */
enum IrlStatus irl_model_gridworld(size_t size,
                                   size_t n_features,
                                   double success_prob,
                                   double gamma,
                                   uint64_t seed,
                                   struct IrlModel **out);

/*
 # Safety
 `out` must be writable.
 */
enum IrlStatus irl_model_sailing(size_t size, double p_stay, double gamma, struct IrlModel **out);

/*
 # Safety
 `model` must be null or a handle from this library, not yet freed.
 */
void irl_model_free(struct IrlModel *model);

/*
 # Safety
 `model` must be a live handle; the outputs may be null.
 */
enum IrlStatus irl_model_dims(const struct IrlModel *model,
                              size_t *n_states,
                              size_t *n_actions,
                              size_t *n_features);

/*
 # Safety
 `model` must be a live handle; `out` must hold `len` doubles.
 */
enum IrlStatus irl_model_theta_star(const struct IrlModel *model, double *out, size_t len);

/*
 Optimal action values for the reward `θᵀφ`, row-major `[state][action]`.

 # Safety
 `theta` must hold `theta_len` doubles, `q_out` `q_len` doubles;
 `iterations` may be null.
 */
enum IrlStatus irl_model_solve(const struct IrlModel *model,
                               const double *theta,
                               size_t theta_len,
                               double *q_out,
                               size_t q_len,
                               size_t *iterations);

/*
 Exact expert: the optimal policy weighted by its occupancy over
 non-terminal states.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum IrlStatus irl_target_exact(const struct IrlModel *model, struct IrlTarget **out);

/*
 Empirical target from `episodes` sampled demonstrations of the optimal
 policy.

 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum IrlStatus irl_target_sampled(const struct IrlModel *model,
                                  size_t episodes,
                                  size_t horizon,
                                  uint64_t seed,
                                  struct IrlTarget **out);

/*
 Empirical target from caller-supplied demonstrations. Trajectory `i`
 occupies the next `lengths[i]` entries of `states` and `actions`.

 # Safety
 `states` and `actions` must each hold the sum of `lengths` entries;
 `lengths` must hold `n_trajectories` entries.
 */
enum IrlStatus irl_target_from_trajectories(const struct IrlModel *model,
                                            const size_t *states,
                                            const size_t *actions,
                                            const size_t *lengths,
                                            size_t n_trajectories,
                                            struct IrlTarget **out);

/*
 # Safety
 `target` must be null or a handle from this library, not yet freed.
 */
void irl_target_free(struct IrlTarget *target);

/*
 Loss of the Boltzmann policy for `θ` and its Euclidean and natural
 gradients. Either gradient output may be null.

 # Safety
 `theta` must hold `len` doubles; non-null gradient outputs must hold `len`
 doubles; `loss` must be writable.
 */
enum IrlStatus irl_loss_gradient(const struct IrlModel *model,
                                 const struct IrlTarget *target,
                                 const double *theta,
                                 size_t len,
                                 double beta,
                                 double *loss,
                                 double *gradient,
                                 double *natural_gradient);

/*
 Trains from `theta` (updated in place) for `iters` steps. When `losses`
 is non-null it receives the `iters + 1` recorded losses.

 # Safety
 `theta` must hold `len` doubles; `losses` must be null or hold
 `losses_len` doubles.
 */
enum IrlStatus irl_train(const struct IrlModel *model,
                         const struct IrlTarget *target,
                         enum IrlMethod method,
                         double step_size,
                         size_t iters,
                         double beta,
                         double *theta,
                         size_t len,
                         double *losses,
                         size_t losses_len);

/*
 Fraction of states where the greedy policy for `θ` differs from the
 optimal one.

 # Safety
 `theta` must hold `len` doubles; `out` must be writable.
 */
enum IrlStatus irl_policy_disagreement(const struct IrlModel *model,
                                       const double *theta,
                                       size_t len,
                                       double *out);

/*
 Greedy and Boltzmann losses of the reward `θ` against the exact expert.

 # Safety
 `theta` must hold `len` doubles; the outputs must be writable.
 */
enum IrlStatus irl_evaluate(const struct IrlModel *model,
                            const double *theta,
                            size_t len,
                            double beta,
                            double *loss_greedy,
                            double *loss_boltzmann);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRL_H */
