#ifndef GEOPATCH_H
#define GEOPATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Sampler kinds accepted by [`gp_sampler_new`].
 */
typedef enum {
  GP_SAMPLER_KIND_RANDOM = 0,
  GP_SAMPLER_KIND_RANDOM_BATCH = 1,
  GP_SAMPLER_KIND_GRID = 2,
} GpSamplerKind;

/**
 * Result of a fallible call. Values 1 to 14 mirror the engine's error kinds.
 */
typedef enum {
  GP_STATUS_OK = 0,
  GP_STATUS_EMPTY_INTERSECTION = 1,
  GP_STATUS_OUT_OF_DOMAIN = 2,
  GP_STATUS_UNKNOWN_CRS = 3,
  GP_STATUS_UNSUPPORTED_FORMAT = 4,
  GP_STATUS_CORRUPT_FILE = 5,
  GP_STATUS_IO = 6,
  GP_STATUS_PARSE = 7,
  GP_STATUS_UNSUPPORTED_GEOMETRY = 8,
  GP_STATUS_NO_SCENES_FOUND = 9,
  GP_STATUS_QUERY_OUTSIDE_BOUNDS = 10,
  GP_STATUS_PATCH_LARGER_THAN_EXTENT = 11,
  GP_STATUS_PATCH_LARGER_THAN_SCENE = 12,
  GP_STATUS_INVALID_ARGUMENT = 13,
  GP_STATUS_CONFIG = 14,
  /**
   * A required pointer argument was null.
   */
  GP_STATUS_NULL_POINTER = 100,
  /**
   * A string argument was not valid UTF-8.
   */
  GP_STATUS_INVALID_UTF8 = 101,
  /**
   * The caller's buffer is too small; the required size was reported.
   */
  GP_STATUS_BUFFER_TOO_SMALL = 102,
  /**
   * The sampler has no more batches in this epoch.
   */
  GP_STATUS_END_OF_EPOCH = 103,
  /**
   * The engine panicked; the handle involved should be freed.
   */
  GP_STATUS_PANIC = 199,
} GpStatus;

/**
 * An opened (possibly composed) dataset.
 */
typedef struct GpDataset GpDataset;

/**
 * The result of one query: one patch per role.
 */
typedef struct GpSample GpSample;

/**
 * A sampler with an epoch cursor.
 */
typedef struct GpSampler GpSampler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *gp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Open the dataset described by the TOML config at `config_path`. Relative
 * layer roots resolve against the config's directory. The block cache size
 * comes from `GEOPATCH_CACHE_BYTES` when set.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
GpStatus gp_dataset_open(const char *config_path, GpDataset **out);

/**
 * Intersection of two datasets on the grid of `a`. Both inputs stay owned
 * by the caller.
 *
 * # Safety
 * `a` and `b` must be live dataset handles; `out` must be writable.
 */
GpStatus gp_dataset_intersect(const GpDataset *a, const GpDataset *b, GpDataset **out);

/**
 * Union of two datasets on the grid of `a`.
 *
 * # Safety
 * As for [`gp_dataset_intersect`].
 */
GpStatus gp_dataset_union(const GpDataset *a, const GpDataset *b, GpDataset **out);

/**
 * Bounds as `[minx, miny, maxx, maxy]` in the dataset CRS.
 *
 * # Safety
 * `ds` must be a live handle; `bbox` must point to 4 doubles.
 */
GpStatus gp_dataset_bounds(const GpDataset *ds, double *bbox);

/**
 * Pixel size of the dataset grid.
 *
 * # Safety
 * `ds` must be a live handle; `x` and `y` must be writable.
 */
GpStatus gp_dataset_res(const GpDataset *ds, double *x, double *y);

/**
 * CRS of the dataset as text (e.g. `EPSG:5070`). Writes at most `len`
 * bytes; `needed` (optional) receives the size including the NUL.
 *
 * # Safety
 * `ds` must be a live handle; `buf` must hold `len` bytes.
 */
GpStatus gp_dataset_crs(const GpDataset *ds, char *buf, size_t len, size_t *needed);

/**
 * Query the patch covering `[minx, miny, maxx, maxy]` in the dataset CRS.
 *
 * # Safety
 * `ds` must be a live handle; `bbox` must point to 4 doubles; `out` must be
 * writable.
 */
GpStatus gp_dataset_query(const GpDataset *ds, const double *bbox, GpSample **out);

/**
 * Release a dataset. Null is ignored.
 *
 * # Safety
 * `ds` must come from this library and not be used afterwards.
 */
void gp_dataset_free(GpDataset *ds);

/**
 * Create a sampler over `ds`. `patch_px` and `stride_px` are in pixels;
 * `stride_px` = 0 means stride = patch. `length` is the number of boxes per
 * epoch for the random samplers.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
GpStatus gp_sampler_new(const GpDataset *ds,
                        GpSamplerKind kind,
                        double patch_px,
                        double stride_px,
                        size_t length,
                        size_t batch_size,
                        uint64_t seed,
                        GpSampler **out);

/**
 * Number of boxes in one epoch.
 *
 * # Safety
 * `s` must be a live handle.
 */
size_t gp_sampler_len(const GpSampler *s);

/**
 * Copy the next batch of boxes into `boxes` as consecutive
 * `[minx, miny, maxx, maxy]` quadruples; `*count` receives the number of
 * boxes. Returns `EndOfEpoch` when the epoch is exhausted and
 * `BufferTooSmall` (with `*count` set) when `capacity` boxes do not suffice.
 *
 * # Safety
 * `s` must be a live handle; `boxes` must hold `4 * capacity` doubles.
 */
GpStatus gp_sampler_next_batch(GpSampler *s, double *boxes, size_t capacity, size_t *count);

/**
 * Rewind to the start of the epoch (epochs repeat identically).
 *
 * # Safety
 * `s` must be a live handle or null.
 */
void gp_sampler_reset(GpSampler *s);

/**
 * Release a sampler. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void gp_sampler_free(GpSampler *s);

/**
 * Number of roles (layers) in a sample.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
size_t gp_sample_role_count(const GpSample *s);

/**
 * Name of role `i` (roles are sorted), valid while the sample lives; null
 * when out of range.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
const char *gp_sample_role_name(const GpSample *s, size_t i);

/**
 * Shape of the patch for `role`.
 *
 * # Safety
 * `s` must be a live handle; `role` NUL-terminated; outputs writable.
 */
GpStatus gp_sample_shape(const GpSample *s,
                         const char *role,
                         size_t *bands,
                         size_t *rows,
                         size_t *cols);

/**
 * Copy the band-major samples (`bands * rows * cols` floats) and,
 * if `valid` is non-null, the `rows * cols` validity flags (0 or 1) of
 * `role`.
 *
 * # Safety
 * `s` must be a live handle; `data` must hold `len` floats and `valid`
 * `rows * cols` bytes.
 */
GpStatus gp_sample_copy(const GpSample *s,
                        const char *role,
                        float *data,
                        size_t len,
                        uint8_t *valid);

/**
 * Release a sample. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void gp_sample_free(GpSample *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOPATCH_H */
