#ifndef OCTCAL_H
#define OCTCAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OctcalMethod {
  OCTCAL_METHOD_SVDT = 0,
  OCTCAL_METHOD_QT = 1,
  OCTCAL_METHOD_QKT = 2,
} OctcalMethod;

typedef enum OctcalStatus {
  OCTCAL_STATUS_OK = 0,
  OCTCAL_STATUS_NULL_POINTER = 1,
  OCTCAL_STATUS_INVALID_ARGUMENT = 2,
  OCTCAL_STATUS_IO = 3,
  OCTCAL_STATUS_FORMAT = 4,
  // Degenerate geometry or too few points.
  OCTCAL_STATUS_DEGENERATE = 5,
  // Nothing to detect in the volume.
  OCTCAL_STATUS_NOT_FOUND = 6,
  OCTCAL_STATUS_NOT_INVERTIBLE = 7,
  OCTCAL_STATUS_PANIC = 99,
} OctcalStatus;

// Opaque OCT volume.
typedef struct OctcalVolume OctcalVolume;

// Virtual pivot centers of the two scan mirrors, mm.
typedef struct OctcalGalvo {
  double x_c;
  double z_xc;
  double y_c;
  double z_yc;
} OctcalGalvo;

// Rigid transform `p' = rotation · p + translation`; `rotation` is row-major.
typedef struct OctcalTransform {
  double rotation[9];
  double translation[3];
} OctcalTransform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library from the same thread.
const char *octcal_last_error(void);

// Pivot centers of the reference scanner.
struct OctcalGalvo octcal_galvo_default(void);

// Loads a volume from its `.hdr` header path.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum OctcalStatus octcal_volume_load(const char *path, struct OctcalVolume **out);

// Builds a volume from `n_x · n_y · n_z` bytes, x fastest, then z, then y
// (one contiguous B-scan per y index).
//
// # Safety
// `data` must point to `len` readable bytes; `extent_mm` to 3 doubles.
enum OctcalStatus octcal_volume_from_raw(size_t n_x,
                                         size_t n_y,
                                         size_t n_z,
                                         const double *extent_mm,
                                         const uint8_t *data,
                                         size_t len,
                                         struct OctcalVolume **out);

// # Safety
// `volume` must come from this library and not be used afterwards.
void octcal_volume_free(struct OctcalVolume *volume);

// Writes `[n_x, n_y, n_z]` to `dims`.
//
// # Safety
// `volume` must be a live handle; `dims` must hold 3 values.
enum OctcalStatus octcal_volume_dims(const struct OctcalVolume *volume, size_t *dims);

// Raw (distorted) position to corrected space.
//
// # Safety
// `raw` and `out` must each hold 3 doubles; `galvo` must be valid.
enum OctcalStatus octcal_correct_point(const struct OctcalGalvo *galvo,
                                       const double *raw,
                                       double *out);

// Corrected position back to raw scanner coordinates.
//
// # Safety
// As for [`octcal_correct_point`].
enum OctcalStatus octcal_distort_point(const struct OctcalGalvo *galvo,
                                       const double *corrected,
                                       double *out);

// Detects the needle tip with default parameters and writes its corrected
// position (mm) to `tip`.
//
// # Safety
// `volume` must be a live handle, `galvo` valid, `tip` hold 3 doubles.
enum OctcalStatus octcal_detect_needle_tip(const struct OctcalVolume *volume,
                                           const struct OctcalGalvo *galvo,
                                           double *tip);

// Fits a ball marker of `radius_mm` and writes its corrected centre.
//
// # Safety
// As for [`octcal_detect_needle_tip`].
enum OctcalStatus octcal_detect_marker(const struct OctcalVolume *volume,
                                       const struct OctcalGalvo *galvo,
                                       double radius_mm,
                                       double *center);

// Solves `robot_i ≈ X · camera_i` for `n` point pairs (`3n` doubles each).
//
// # Safety
// `robot` and `camera` must hold `3n` doubles; `out` must be writable.
enum OctcalStatus octcal_solve_handeye(enum OctcalMethod method,
                                       const double *robot,
                                       const double *camera,
                                       size_t n,
                                       struct OctcalTransform *out);

// Per-pair calibration errors in µm into `errors` (n values) and their mean
// into `mean_um`. Either output may be null.
//
// # Safety
// `robot`/`camera` must hold `3n` doubles, `errors` (if non-null) `n`.
enum OctcalStatus octcal_calib_error(const double *robot,
                                     const double *camera,
                                     size_t n,
                                     const struct OctcalTransform *transform,
                                     double *errors,
                                     double *mean_um);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCTCAL_H */
