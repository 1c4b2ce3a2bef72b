#ifndef MEHOM_H
#define MEHOM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MehomStatus {
  MEHOM_STATUS_OK = 0,
  MEHOM_STATUS_NULL_POINTER = 1,
  MEHOM_STATUS_INVALID_ARGUMENT = 2,
  MEHOM_STATUS_CONFIG = 3,
  MEHOM_STATUS_SOLVER = 4,
  MEHOM_STATUS_INADMISSIBLE = 5,
  MEHOM_STATUS_IO = 6,
  MEHOM_STATUS_PANIC = 7,
} MehomStatus;

typedef enum MehomDensityKind {
  MEHOM_DENSITY_KIND_D1 = 1,
  MEHOM_DENSITY_KIND_D2 = 2,
} MehomDensityKind;

// A material law.
typedef struct MehomDensity MehomDensity;

// Homogenized elastic form with a per-direction tensor cache.
typedef struct MehomElastic MehomElastic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mehom_version(void);

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call into the library on this thread.
const char *mehom_last_error(void);

// Builds a reference density. Layouts use the CLI syntax, e.g. `2.5` or
// `laminate(axis=1, fraction=0.5, values=[1, 10])`. `kappa` is ignored for
// `D1`; `exchange` may be NULL for a unit coefficient.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum MehomStatus mehom_density_new(enum MehomDensityKind kind,
                                   const char *stiffness,
                                   const char *kappa,
                                   const char *exchange,
                                   double p,
                                   double s,
                                   struct MehomDensity **out);

// # Safety
// `density` must come from `mehom_density_new` and not be used afterwards.
void mehom_density_free(struct MehomDensity *density);

// Stored energy `W(y, F, ν)`; `f` is row-major 3x3. Infinite when `det F <= 0`.
//
// # Safety
// `y` and `nu` point to 3 doubles, `f` to 9, `out` to one writable double.
enum MehomStatus mehom_density_w(const struct MehomDensity *density,
                                 const double *y,
                                 const double *f,
                                 const double *nu,
                                 double *out);

// Quadratic form `Q(y, G, ν)` at the identity.
//
// # Safety
// As for `mehom_density_w`.
enum MehomStatus mehom_density_q(const struct MehomDensity *density,
                                 const double *y,
                                 const double *g,
                                 const double *nu,
                                 double *out);

// Runs the hypothesis validator and reports whether every check passed.
//
// # Safety
// `density` must be a live handle; `passed` must be writable.
enum MehomStatus mehom_density_validate(const struct MehomDensity *density,
                                        size_t samples,
                                        uint64_t seed,
                                        bool *passed);

// Homogenized exchange tensor on an `n³` cell, written row-major to `out[9]`.
//
// # Safety
// `density` must be a live handle; `out` must hold 9 doubles.
enum MehomStatus mehom_exchange_tensor(const struct MehomDensity *density,
                                       size_t cell_n,
                                       double tol,
                                       double *out);

// Homogenized elastic form on an `n³` cell; tensors are solved per direction
// on first use and cached.
//
// # Safety
// `density` must be a live handle; `out` must be writable.
enum MehomStatus mehom_elastic_new(const struct MehomDensity *density,
                                   size_t cell_n,
                                   double tol,
                                   struct MehomElastic **out);

// # Safety
// `elastic` must come from `mehom_elastic_new` and not be used afterwards.
void mehom_elastic_free(struct MehomElastic *elastic);

// 9x9 matrix of `A ↦ Q_hom(A, ν)` on row-major flattened `A`, row-major in `out[81]`.
//
// # Safety
// `nu` points to 3 doubles and `out` to 81.
enum MehomStatus mehom_elastic_tensor(const struct MehomElastic *elastic,
                                      const double *nu,
                                      double *out);

// `Q_hom(A, ν)` for row-major `a[9]`.
//
// # Safety
// `a` points to 9 doubles, `nu` to 3, `out` to one.
enum MehomStatus mehom_elastic_value(const struct MehomElastic *elastic,
                                     const double *a,
                                     const double *nu,
                                     double *out);

// Stray-field energy of `m` on the unit box with `dims` cells.
//
// `m` holds `3·N` doubles, component-major with x fastest within each
// component. `mask` holds `N` bytes (nonzero = inside) or is NULL to use `m`
// as given.
//
// # Safety
// Buffers must have the stated lengths.
enum MehomStatus mehom_stray_energy(const size_t *dims,
                                    const double *m,
                                    const uint8_t *mask,
                                    double mu0,
                                    double pad_factor,
                                    double *out);

// Runs a TOML configuration (the CLI file format, `subcommand` required) and
// writes its outputs under `out_dir`. `exit_code` receives the CLI exit code:
// 0 pass, 1 check failure, 2 configuration error, 3 solver failure. The
// returned status is `Ok` whenever a run completed, passed or not.
//
// # Safety
// Strings must be NUL-terminated; `exit_code` must be writable.
enum MehomStatus mehom_run_toml(const char *config, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEHOM_H */
