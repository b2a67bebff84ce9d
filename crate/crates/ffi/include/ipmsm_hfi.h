#ifndef IPMSM_HFI_H
#define IPMSM_HFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  IPMSM_STATUS_OK = 0,
  IPMSM_STATUS_NULL_POINTER = 1,
  IPMSM_STATUS_INVALID_PARAMETER = 2,
  IPMSM_STATUS_MISALIGNED = 3,
  IPMSM_STATUS_NON_FINITE = 4,
  IPMSM_STATUS_INTERNAL = 5,
} IpmsmStatus;

typedef struct IpmsmConventional IpmsmConventional;

typedef struct IpmsmPll IpmsmPll;

typedef struct IpmsmProposed IpmsmProposed;

typedef struct {
  uint32_t pole_pairs;
  double r_s;
  double l_d;
  double l_q;
  double flux;
  double inertia;
  double friction;
} IpmsmMotorParams;

typedef struct {
  /**
   * Amplitude (V).
   */
  double v_h;
  /**
   * Frequency (Hz).
   */
  double freq_hz;
  /**
   * Demodulation phase of the conventional chain (rad).
   */
  double phi;
  /**
   * Phase applied to the proposed estimator's probe copy (rad).
   */
  double phi_p;
} IpmsmInjection;

/**
 * Validity codes: 0 warming up, 1 low confidence (angle held), 2 valid.
 */
typedef struct {
  double theta_hat;
  double y_v1;
  double y_v2;
  uint8_t validity;
} IpmsmEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Simulation-machine parameter set.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `IpmsmMotorParams`.
 */
IpmsmStatus ipmsm_motor_params_simulation(IpmsmMotorParams *out);

/**
 * Experimental-machine parameter set.
 *
 * # Safety
 * As [`ipmsm_motor_params_simulation`].
 */
IpmsmStatus ipmsm_motor_params_experimental(IpmsmMotorParams *out);

/**
 * Creates a proposed (delayed-difference / gradient) estimator. `ts` must
 * divide the probe period. Compensation starts at `(1, 0, 1)`.
 *
 * # Safety
 * `params`, `inj` must be valid for reads; `out` valid for one pointer write.
 */
IpmsmStatus ipmsm_proposed_new(const IpmsmMotorParams *params,
                               const IpmsmInjection *inj,
                               double gamma_alpha,
                               double gamma_beta,
                               double initial_theta,
                               double ts,
                               IpmsmProposed **out);

/**
 * # Safety
 * `h` must be a live handle from [`ipmsm_proposed_new`].
 */
IpmsmStatus ipmsm_proposed_set_compensation(IpmsmProposed *h,
                                            double ell1,
                                            double ell2,
                                            double ell3);

/**
 * Feeds the current sample taken at `t`.
 *
 * # Safety
 * `h` must be a live handle; `out` valid for one write.
 */
IpmsmStatus ipmsm_proposed_step(IpmsmProposed *h,
                                double i_alpha,
                                double i_beta,
                                double t,
                                IpmsmEstimate *out);

/**
 * # Safety
 * `h` must be null or a handle from [`ipmsm_proposed_new`] not yet freed.
 */
void ipmsm_proposed_free(IpmsmProposed *h);

/**
 * Creates a conventional HPF / demodulation / LPF estimator with corners
 * `λ_h = ω_h`, `λ_ℓ = max(√(ω_h·omega_star), 1)`.
 *
 * # Safety
 * As [`ipmsm_proposed_new`].
 */
IpmsmStatus ipmsm_conventional_new(const IpmsmMotorParams *params,
                                   const IpmsmInjection *inj,
                                   double omega_star,
                                   double initial_theta,
                                   double ts,
                                   IpmsmConventional **out);

/**
 * `out.validity` is always 2; the chain has no warm-up.
 *
 * # Safety
 * As [`ipmsm_proposed_step`].
 */
IpmsmStatus ipmsm_conventional_step(IpmsmConventional *h,
                                    double i_alpha,
                                    double i_beta,
                                    double t,
                                    IpmsmEstimate *out);

/**
 * # Safety
 * `h` must be null or a live handle from [`ipmsm_conventional_new`].
 */
void ipmsm_conventional_free(IpmsmConventional *h);

/**
 * # Safety
 * `out` valid for one pointer write.
 */
IpmsmStatus ipmsm_pll_new(double kp,
                          double ki,
                          uint32_t pole_pairs,
                          double initial_angle,
                          IpmsmPll **out);

/**
 * Writes the mechanical speed estimate for this sample, then advances the
 * loop by `ts` with `theta_hat` held.
 *
 * # Safety
 * `h` must be a live handle; `omega_hat` valid for one write.
 */
IpmsmStatus ipmsm_pll_step(IpmsmPll *h, double theta_hat, double ts, double *omega_hat);

/**
 * # Safety
 * `h` must be null or a live handle from [`ipmsm_pll_new`].
 */
void ipmsm_pll_free(IpmsmPll *h);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t ipmsm_last_error(char *buf, size_t len);

/**
 * Static description of a status code.
 */
const char *ipmsm_status_str(IpmsmStatus status);

/**
 * Library version string.
 */
const char *ipmsm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPMSM_HFI_H */
