#ifndef CSOBENCH_H
#define CSOBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsoStatus {
  CsoStatus_Ok = 0,
  CsoStatus_NullPointer = 1,
  CsoStatus_InvalidArgument = 2,
  CsoStatus_Io = 3,
  CsoStatus_CorruptDataset = 4,
  CsoStatus_Numerical = 5,
  CsoStatus_OutputExists = 6,
  CsoStatus_Panic = 7,
} CsoStatus;

/**
 * A verified dataset held in memory.
 */
typedef struct CsoDataset CsoDataset;

/**
 * A fitted nearest-neighbour GP classifier.
 */
typedef struct CsoGpModel CsoGpModel;

/**
 * GP classifier hyperparameters.
 */
typedef struct CsoGpSettings {
  double nu;
  double length_scale;
  double variance;
  uintptr_t k_neighbors;
  double nugget;
  double ambiguity_threshold;
} CsoGpSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the
 * library; valid until the next failing call on this thread.
 */
const char *cso_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cso_version(void);

/**
 * Matérn covariance at distance `r`.
 */
CsoStatus cso_matern(double nu, double length_scale, double variance, double r, double *out);

/**
 * Min/max scaling of `n` values into `out` (may alias `values`).
 */
CsoStatus cso_minmax(const double *values, uintptr_t n, double *out);

/**
 * Great-circle separation in arcseconds between two (RA, Dec) positions in
 * degrees.
 */
CsoStatus cso_angular_separation(double ra1, double dec1, double ra2, double dec2, double *out_arcsec);

/**
 * Simulates `n_single + n_cso` cutouts with default settings into `dir`.
 */
CsoStatus cso_simulate(const char *dir, uintptr_t n_single, uintptr_t n_cso, uint64_t seed, bool force);

/**
 * Loads and verifies a dataset directory.
 */
CsoStatus cso_dataset_load(const char *dir, CsoDataset **out);

void cso_dataset_free(CsoDataset *ds);

/**
 * Number of cutouts (0 for a null handle).
 */
uintptr_t cso_dataset_len(const CsoDataset *ds);

/**
 * Cutout side length in pixels (0 for a null handle).
 */
uintptr_t cso_dataset_cutout_size(const CsoDataset *ds);

/**
 * Label of cutout `i`: 0 = single, 1 = CSO.
 */
CsoStatus cso_dataset_label(const CsoDataset *ds, uintptr_t i, int32_t *out);

/**
 * Copies the row-major pixels of cutout `i`; `len` must equal size².
 */
CsoStatus cso_dataset_pixels(const CsoDataset *ds, uintptr_t i, float *out, uintptr_t len);

/**
 * Covariates of cutout `i`. Separation and magnitude difference are NaN
 * for single-satellite cutouts. Any output pointer may be null.
 */
CsoStatus cso_dataset_covariates(const CsoDataset *ds,
                                 uintptr_t i,
                                 double *separation_arcsec,
                                 double *delta_mag,
                                 double *primary_mag);

CsoGpSettings cso_gp_default_settings(void);

/**
 * Fits the GP on `n` row-major feature vectors of length `dim` with labels
 * 0 (single) or 1 (CSO). A null `settings` means the defaults.
 */
CsoStatus cso_gp_fit(const double *features,
                     uintptr_t n,
                     uintptr_t dim,
                     const int32_t *labels,
                     const CsoGpSettings *settings,
                     CsoGpModel **out);

void cso_gp_free(CsoGpModel *model);

/**
 * Classifies `m` row-major queries. `labels_out` receives 0/1 per query;
 * `mean_out` (2 per query, single then CSO) and `variance_out` (1 per
 * query) may be null.
 */
CsoStatus cso_gp_predict(const CsoGpModel *model,
                         const double *queries,
                         uintptr_t m,
                         int32_t *labels_out,
                         double *mean_out,
                         double *variance_out);

/**
 * Runs `runs` train/test repetitions of the comma-separated `models`
 * ("gp", "logreg", "cnn" or "all") on a dataset directory and writes the
 * result artifacts to `out_dir`. `config` is a key = value config text or
 * null for the defaults.
 */
CsoStatus cso_evaluate(const char *dataset_dir,
                       const char *models,
                       uintptr_t runs,
                       uint64_t seed,
                       const char *config,
                       const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSOBENCH_H */
