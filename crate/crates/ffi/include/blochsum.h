#ifndef BLOCHSUM_H
#define BLOCHSUM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_INVALID_ARGUMENT = 2,
  BS_STATUS_OUT_OF_RANGE = 3,
  BS_STATUS_DEGENERATE = 4,
  BS_STATUS_NOT_CONVERGED = 5,
  BS_STATUS_NUMERICAL = 6,
  BS_STATUS_CONFIG = 7,
  BS_STATUS_IO = 8,
  BS_STATUS_PANIC = 9,
} BsStatus;

/*
 Momentum matrix `π̂_st` in one direction.
 */
typedef struct BsMomentum BsMomentum;

/*
 A periodic potential.
 */
typedef struct BsPotential BsPotential;

/*
 Eigenvalues and eigenvectors of one fiber.
 */
typedef struct BsSpectrum BsSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *bs_version(void);

/*
 Message of the last failed call on this thread, or null after a success.
 The pointer stays valid until the next call into the library on this thread.
 */
const char *bs_last_error(void);

/*
 Trigonometric polynomial `Σ cos_i cos(2π m_i·x) + sin_i sin(2π m_i·x) + shift`.
 `freqs` holds `n * dim` integers, row by row; `sin_coeffs` may be null.

 # Safety
 Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum BsStatus bs_potential_trig(size_t dim,
                                const int64_t *freqs,
                                const double *cos_coeffs,
                                const double *sin_coeffs,
                                size_t n,
                                double shift,
                                struct BsPotential **out);

/*
 Real Gaussian-decay coefficients `A exp(-|m|²/2w²)` for `0 < |m|_∞ <= cutoff`.

 # Safety
 `out` must be writable.
 */
enum BsStatus bs_potential_gaussian(size_t dim,
                                    double amplitude,
                                    double width,
                                    int64_t cutoff,
                                    double shift,
                                    struct BsPotential **out);

/*
 One-dimensional delta comb truncated to `|m| <= cutoff`, `V̂(m) = strength`.

 # Safety
 `out` must be writable.
 */
enum BsStatus bs_potential_truncated_delta(double strength,
                                           int64_t cutoff,
                                           double shift,
                                           struct BsPotential **out);

/*
 # Safety
 `p` must be null or a handle from a `bs_potential_*` constructor, freed once.
 */
void bs_potential_free(struct BsPotential *p);

/*
 Diagonalizes `h(k)` in the basis `|m|_∞ <= m_cut`. `k` has the potential's
 dimension; `n_bands = 0` keeps the trusted lower half of the spectrum.

 # Safety
 `potential` must be a live handle, `k` readable, `out` writable.
 */
enum BsStatus bs_spectrum_compute(const struct BsPotential *potential,
                                  int64_t m_cut,
                                  const double *k,
                                  size_t n_bands,
                                  struct BsSpectrum **out);

/*
 # Safety
 `s` must be a live handle and `count` writable.
 */
enum BsStatus bs_spectrum_band_count(const struct BsSpectrum *s, size_t *count);

/*
 Copies the eigenvalues, ascending, into `values[0..len]`; `len` must be at
 least the band count.

 # Safety
 `s` must be a live handle and `values` writable for `len` doubles.
 */
enum BsStatus bs_spectrum_eigenvalues(const struct BsSpectrum *s, double *values, size_t len);

/*
 # Safety
 `s` must be null or a handle from [`bs_spectrum_compute`], freed once.
 */
void bs_spectrum_free(struct BsSpectrum *s);

/*
 # Safety
 `s` must be a live handle and `out` writable.
 */
enum BsStatus bs_momentum_compute(const struct BsSpectrum *s,
                                  size_t alpha,
                                  struct BsMomentum **out);

/*
 Entry `π̂_st` with 1-based band labels.

 # Safety
 `m` must be a live handle; `re` and `im` writable.
 */
enum BsStatus bs_momentum_entry(const struct BsMomentum *m,
                                size_t s,
                                size_t t,
                                double *re,
                                double *im);

/*
 # Safety
 `m` must be null or a handle from [`bs_momentum_compute`], freed once.
 */
void bs_momentum_free(struct BsMomentum *m);

/*
 Fermi–Dirac divided difference `f[x_1, ..., x_n]` with `f = 1/(1+e^{β(x-μ)})`.

 # Safety
 `nodes` readable for `n` doubles, `out` writable.
 */
enum BsStatus bs_divided_difference_fd(double beta,
                                       double mu,
                                       const double *nodes,
                                       size_t n,
                                       double *out);

/*
 Trace per unit volume of `f_FD(h) (p_{α1}+k)(h-z)^{-1}...` by band sums over
 bands `1..=cutoff`, on a Monkhorst–Pack grid with `k_per_axis` points per axis.

 # Safety
 `potential` must be a live handle, `directions` readable for `n_directions`
 values, `re`/`im` writable.
 */
enum BsStatus bs_trace_band_sum(const struct BsPotential *potential,
                                int64_t m_cut,
                                double beta,
                                double mu,
                                const size_t *directions,
                                size_t n_directions,
                                size_t cutoff,
                                size_t k_per_axis,
                                double *re,
                                double *im);

/*
 Exact momentum element `π̂_j` between the ground state and odd level `j` of
 the periodic delta model with coupling `g`.

 # Safety
 `re` and `im` writable.
 */
enum BsStatus bs_delta_pi(double g, size_t j, double *re, double *im);

/*
 Runs a named experiment from config text. Writes `report.json` and CSV files
 to `out_dir` unless it is null. `passed` receives whether all checks held;
 a failed check is not an error.

 # Safety
 Strings must be NUL-terminated; `passed` writable.
 */
enum BsStatus bs_run_experiment(const char *experiment,
                                const char *config_text,
                                const char *out_dir,
                                bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOCHSUM_H */
