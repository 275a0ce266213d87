#ifndef UCGAN_H
#define UCGAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Classical fusion methods.
typedef enum UcganBaseline {
  UCGAN_BASELINE_IHS = 0,
  UCGAN_BASELINE_BROVEY = 1,
  UCGAN_BASELINE_HPF = 2,
  UCGAN_BASELINE_SFIM = 3,
} UcganBaseline;

// Result code of every fallible call.
typedef enum UcganStatus {
  UCGAN_STATUS_OK = 0,
  UCGAN_STATUS_NULL_POINTER = 1,
  UCGAN_STATUS_INVALID_ARGUMENT = 2,
  UCGAN_STATUS_IO = 3,
  UCGAN_STATUS_FORMAT = 4,
  UCGAN_STATUS_DIMENSION = 5,
  UCGAN_STATUS_DEGENERATE = 6,
  UCGAN_STATUS_VALIDATION = 7,
  // A Rust panic was caught at the boundary.
  UCGAN_STATUS_INTERNAL = 8,
} UcganStatus;

// Opaque trained generator.
typedef struct UcganGenerator UcganGenerator;

// Opaque band-sequential 16-bit image.
typedef struct UcganRaster UcganRaster;

// No-reference quality of a fused image.
typedef struct UcganQnr {
  double d_lambda;
  double d_s;
  double qnr;
} UcganQnr;

// Full-reference quality of a fused image.
typedef struct UcganReferenceMetrics {
  // Spectral angle in degrees.
  double sam_deg;
  double ergas;
  double ssim;
} UcganReferenceMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ucgan_version(void);

// Message of the last failed call on this thread, or NULL after a success.
// Valid until the next call into the library on the same thread.
const char *ucgan_last_error(void);

// Build a raster from `len` band-sequential samples.
//
// # Safety
// `pixels` must point to `len` readable values and `out` must be writable.
enum UcganStatus ucgan_raster_new(size_t width,
                                  size_t height,
                                  size_t bands,
                                  uint16_t bit_depth,
                                  const uint16_t *pixels,
                                  size_t len,
                                  struct UcganRaster **out);

// Read a raster container from disk.
//
// # Safety
// `path` must be a NUL-terminated string and `out` must be writable.
enum UcganStatus ucgan_raster_load(const char *path, struct UcganRaster **out);

// Write a raster container to disk.
//
// # Safety
// `raster` must come from this library; `path` must be NUL-terminated.
enum UcganStatus ucgan_raster_save(const struct UcganRaster *raster, const char *path);

// Width, height, band count and bit depth; any out pointer may be NULL.
//
// # Safety
// `raster` must come from this library; non-null out pointers must be writable.
enum UcganStatus ucgan_raster_dims(const struct UcganRaster *raster,
                                   size_t *width,
                                   size_t *height,
                                   size_t *bands,
                                   uint16_t *bit_depth);

// Borrow the band-sequential samples. The pointer lives as long as the raster.
//
// # Safety
// `raster` must come from this library; `len` may be NULL.
const uint16_t *ucgan_raster_pixels(const struct UcganRaster *raster, size_t *len);

// # Safety
// `raster` must come from this library (or be NULL) and not be used afterwards.
void ucgan_raster_free(struct UcganRaster *raster);

// Load a generator checkpoint.
//
// # Safety
// `path` must be NUL-terminated and `out` writable.
enum UcganStatus ucgan_generator_load(const char *path, struct UcganGenerator **out);

// Fuse a 1-band PAN with a 4-band MS at a quarter of its resolution.
//
// # Safety
// All handles must come from this library and `out` must be writable.
enum UcganStatus ucgan_generator_pansharpen(const struct UcganGenerator *generator,
                                            const struct UcganRaster *pan,
                                            const struct UcganRaster *ms,
                                            struct UcganRaster **out);

// # Safety
// `generator` must come from this library (or be NULL) and not be used afterwards.
void ucgan_generator_free(struct UcganGenerator *generator);

// Fuse with a classical method. `guarded_pixels` (may be NULL) receives the
// number of pixels that fell back to the upsampled MS.
//
// # Safety
// Handles must come from this library; `out` must be writable.
enum UcganStatus ucgan_baseline(enum UcganBaseline method,
                                const struct UcganRaster *pan,
                                const struct UcganRaster *ms,
                                struct UcganRaster **out,
                                size_t *guarded_pixels);

// QNR of a fused image against its source pair.
//
// # Safety
// Handles must come from this library; `out` must be writable.
enum UcganStatus ucgan_qnr(const struct UcganRaster *fused,
                           const struct UcganRaster *ms,
                           const struct UcganRaster *pan,
                           struct UcganQnr *out);

// SAM, ERGAS and SSIM of a fused image against a same-size reference.
//
// # Safety
// Handles must come from this library; `out` must be writable.
enum UcganStatus ucgan_reference_metrics(const struct UcganRaster *reference,
                                         const struct UcganRaster *fused,
                                         struct UcganReferenceMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UCGAN_H */
