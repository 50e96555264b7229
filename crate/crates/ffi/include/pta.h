#ifndef PTA_H
#define PTA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PtaStatus {
  PTA_STATUS_OK = 0,
  PTA_STATUS_NULL_POINTER = 1,
  PTA_STATUS_INVALID_ARGUMENT = 2,
  PTA_STATUS_EMPTY_REGION = 3,
  PTA_STATUS_DIMENSION_MISMATCH = 4,
  PTA_STATUS_INSUFFICIENT_SAMPLE = 5,
  PTA_STATUS_DEGENERATE_BANDS = 6,
  PTA_STATUS_OUT_OF_BOUNDS = 7,
  PTA_STATUS_MALFORMED = 8,
  PTA_STATUS_IO = 9,
  PTA_STATUS_BUFFER_TOO_SMALL = 10,
  PTA_STATUS_PANIC = 11,
} PtaStatus;

typedef enum PtaMode {
  PTA_MODE_T_TEST = 0,
  PTA_MODE_MEAN_DIFF = 1,
} PtaMode;

/*
 Opaque grayscale image.
 */
typedef struct PtaImage PtaImage;

/*
 Opaque binary mask.
 */
typedef struct PtaMask PtaMask;

/*
 Band-loss parameters; obtain defaults from `pta_config_default`.
 */
typedef struct PtaConfig {
  double lambda;
  size_t sectors;
  double band_width;
  double threshold;
  double epsilon;
  /*
   A `PtaMode` value.
   */
  uint32_t mode;
} PtaConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failing call on this thread, or null. Valid until the next failing call.
 */
const char *pta_last_error_message(void);

struct PtaConfig pta_config_default(void);

/*
 Copies `width * height` row-major intensities into a new image.

 # Safety
 `values` must point to `width * height` doubles; `out` must be writable.
 */
enum PtaStatus pta_image_new(size_t width,
                             size_t height,
                             const double *values,
                             struct PtaImage **out);

/*
 Reads a PGM, PNG or PFM image.

 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum PtaStatus pta_image_read(const char *path, struct PtaImage **out);

/*
 # Safety
 `image` must come from this library and not be freed twice; null is ignored.
 */
void pta_image_free(struct PtaImage *image);

/*
 Builds a mask from `width * height` row-major bytes; non-zero is foreground.

 # Safety
 `bits` must point to `width * height` bytes; `out` must be writable.
 */
enum PtaStatus pta_mask_new(size_t width, size_t height, const uint8_t *bits, struct PtaMask **out);

/*
 # Safety
 `path` must be a nul-terminated string; `out` must be writable.
 */
enum PtaStatus pta_mask_read(const char *path, struct PtaMask **out);

/*
 Writes foreground as 255; the format follows the extension.

 # Safety
 `mask` must be a live handle; `path` a nul-terminated string.
 */
enum PtaStatus pta_mask_write(const struct PtaMask *mask, const char *path);

/*
 Copies the mask into `bits` (0 or 1 per pixel, row-major).

 # Safety
 `mask` must be a live handle; `bits` must hold `len` bytes.
 */
enum PtaStatus pta_mask_bits(const struct PtaMask *mask, uint8_t *bits, size_t len);

/*
 # Safety
 `mask` must be a live handle; the outputs must be writable.
 */
enum PtaStatus pta_mask_dims(const struct PtaMask *mask,
                             size_t *width,
                             size_t *height,
                             size_t *count);

/*
 # Safety
 `mask` must come from this library and not be freed twice; null is ignored.
 */
void pta_mask_free(struct PtaMask *mask);

/*
 Piecewise band loss of `mask` on `image`. When `sector_losses` is non-null it
 receives `config.sectors` values, NaN for sectors without enough pixels.

 # Safety
 Handles must be live; `config` and `aggregate` valid; `sector_losses` null or `len` doubles.
 */
enum PtaStatus pta_piecewise_loss(const struct PtaImage *image,
                                  const struct PtaMask *mask,
                                  const struct PtaConfig *config,
                                  double *aggregate,
                                  double *sector_losses,
                                  size_t len);

/*
 # Safety
 Handles must be live; `out` writable.
 */
enum PtaStatus pta_dsc(const struct PtaMask *gt, const struct PtaMask *seg, double *out);

/*
 # Safety
 Handles must be live; `out` writable.
 */
enum PtaStatus pta_dsc_loss(const struct PtaMask *gt, const struct PtaMask *seg, double *out);

/*
 # Safety
 Handles must be live; `out` writable.
 */
enum PtaStatus pta_hausdorff(const struct PtaMask *gt, const struct PtaMask *seg, double *out);

/*
 # Safety
 Handles must be live; `out` writable.
 */
enum PtaStatus pta_assd(const struct PtaMask *gt, const struct PtaMask *seg, double *out);

/*
 # Safety
 Handles must be live; outputs writable.
 */
enum PtaStatus pta_precision_recall(const struct PtaMask *gt,
                                    const struct PtaMask *seg,
                                    double *precision,
                                    double *recall);

/*
 Greedy refinement of `init`; the refined mask is returned as a new handle.

 # Safety
 Handles must be live; `config` valid; outputs writable.
 */
enum PtaStatus pta_refine(const struct PtaImage *image,
                          const struct PtaMask *init,
                          const struct PtaConfig *config,
                          double mu,
                          size_t max_iters,
                          size_t moves_per_iter,
                          uint64_t seed,
                          struct PtaMask **out,
                          double *final_objective);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTA_H */
