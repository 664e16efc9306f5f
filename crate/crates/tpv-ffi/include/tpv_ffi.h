#ifndef TPV_FFI_H
#define TPV_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum TpvStatus {
  TPV_STATUS_OK = 0,
  TPV_STATUS_NULL_POINTER = 1,
  TPV_STATUS_INVALID_ARGUMENT = 2,
  TPV_STATUS_DIMENSION_MISMATCH = 3,
  TPV_STATUS_NUMERICAL_ERROR = 4,
  TPV_STATUS_PANIC = 5,
} TpvStatus;

/**
 * Opaque dataset handle.
 */
typedef struct TpvDataset TpvDataset;

/**
 * Opaque network handle.
 */
typedef struct TpvNetwork TpvNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread. The pointer is
 * valid until the next failing call on the same thread; do not free it.
 */
const char *tpv_last_error(void);

/**
 * Crate version as a static C string.
 */
const char *tpv_version(void);

/**
 * Create a ReLU MLP with He-uniform weights drawn from `seed`.
 *
 * # Safety
 * `hidden` must point to `n_hidden` readable usize values (or be null with
 * `n_hidden == 0`); `out` must be a valid destination pointer.
 */
enum TpvStatus tpv_network_create(uint64_t seed,
                                  uintptr_t input_dim,
                                  const uintptr_t *hidden,
                                  uintptr_t n_hidden,
                                  uintptr_t output_dim,
                                  struct TpvNetwork **out);

/**
 * Release a network handle.
 *
 * # Safety
 * `net` must be a pointer returned by this library, freed at most once.
 */
void tpv_network_free(struct TpvNetwork *net);

/**
 * Number of parameters p of the network.
 *
 * # Safety
 * `net` must be a live handle from this library.
 */
uintptr_t tpv_network_param_count(const struct TpvNetwork *net);

/**
 * Copy the flat parameter vector into `out` (length `len` == p).
 *
 * # Safety
 * `net` must be live; `out` must point to `len` writable f64 slots.
 */
enum TpvStatus tpv_network_get_params(const struct TpvNetwork *net, double *out, uintptr_t len);

/**
 * Replace the network parameters from a flat vector of length p.
 *
 * # Safety
 * `net` must be live; `params` must point to `len` readable f64 values.
 */
enum TpvStatus tpv_network_set_params(struct TpvNetwork *net, const double *params, uintptr_t len);

/**
 * Forward pass on one input of length `input_dim`, writing `output_dim`
 * values to `out`.
 *
 * # Safety
 * `net` must be live; `x` readable for `x_len`; `out` writable for
 * `out_len`.
 */
enum TpvStatus tpv_network_forward(const struct TpvNetwork *net,
                                   const double *x,
                                   uintptr_t x_len,
                                   double *out,
                                   uintptr_t out_len);

/**
 * Sample a synthetic teacher dataset. `teacher_kind`: 0 linear Gaussian,
 * 1 single ReLU, 2 ten-unit multi-ReLU. `stream` separates splits drawn
 * from the same teacher (0 train, 1 test by convention).
 *
 * # Safety
 * `out` must be a valid destination pointer.
 */
enum TpvStatus tpv_dataset_sample(uint32_t teacher_kind,
                                  uintptr_t input_dim,
                                  uint64_t seed,
                                  uintptr_t n,
                                  uint64_t stream,
                                  struct TpvDataset **out);

/**
 * Release a dataset handle.
 *
 * # Safety
 * `ds` must be a pointer returned by this library, freed at most once.
 */
void tpv_dataset_free(struct TpvDataset *ds);

/**
 * Number of samples in the dataset.
 *
 * # Safety
 * `ds` must be a live handle.
 */
uintptr_t tpv_dataset_len(const struct TpvDataset *ds);

/**
 * New dataset with fresh additive Gaussian label noise of std `sigma`.
 *
 * # Safety
 * `ds` must be live; `out` must be a valid destination pointer.
 */
enum TpvStatus tpv_dataset_add_label_noise(const struct TpvDataset *ds,
                                           double sigma,
                                           uint64_t run_seed,
                                           struct TpvDataset **out);

/**
 * Full-batch MSE training with heavy-ball momentum; `cosine_schedule`
 * nonzero enables cosine annealing; `proximity_gamma` > 0 anchors at the
 * current parameters. Writes the final full-dataset loss to `final_loss`.
 *
 * # Safety
 * `net` and `ds` must be live handles; `final_loss` writable if non-null.
 */
enum TpvStatus tpv_train_mse(struct TpvNetwork *net,
                             const struct TpvDataset *ds,
                             double lr,
                             double momentum,
                             uintptr_t epochs,
                             int32_t cosine_schedule,
                             double proximity_gamma,
                             double *final_loss);

/**
 * Empirical TPV of `n_runs` perturbed parameter vectors (row-major
 * `n_runs`×p in `perturbed`) against the reference network, evaluated on
 * the dataset inputs.
 *
 * # Safety
 * Handles must be live; `perturbed` readable for `n_runs * p`; `out`
 * writable.
 */
enum TpvStatus tpv_empirical_tpv(const struct TpvNetwork *net,
                                 const double *perturbed,
                                 uintptr_t n_runs,
                                 uintptr_t p,
                                 const struct TpvDataset *ds,
                                 double *out);

/**
 * Relative finite-difference Taylor error of one perturbed parameter
 * vector over the dataset inputs (step `h`, threshold 1e-3 upstream).
 *
 * # Safety
 * Handles must be live; `perturbed` readable for p values; `out` writable.
 */
enum TpvStatus tpv_taylor_validity(const struct TpvNetwork *net,
                                   const double *perturbed,
                                   uintptr_t p,
                                   const struct TpvDataset *ds,
                                   double h,
                                   double *out);

/**
 * Gauss-Newton Hessian-trace proxy Tr((1/n)JᵀJ) on the dataset inputs
 * (scalar-output networks only).
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum TpvStatus tpv_hessian_trace_proxy(const struct TpvNetwork *net,
                                       const struct TpvDataset *ds,
                                       double *out);

/**
 * Closed-form SGD stationary TPV: η·σ²·trace/(2b).
 */
double tpv_sgd_tpv_formula(double eta,
                           uintptr_t batch,
                           double residual_variance,
                           double hessian_trace);

/**
 * Closed-form quantization TPV: δ²·trace/12.
 */
double tpv_quantization_tpv_formula(double delta, double hessian_trace);

/**
 * MSE loss of the network on a dataset.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum TpvStatus tpv_network_loss_mse(const struct TpvNetwork *net,
                                    const struct TpvDataset *ds,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TPV_FFI_H */
