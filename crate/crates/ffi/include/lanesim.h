#ifndef LANESIM_H
#define LANESIM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_POINTER = 1,
  LS_STATUS_INVALID_INPUT = 2,
  LS_STATUS_CONFIG = 3,
  LS_STATUS_SINGULAR = 4,
  LS_STATUS_PARSE = 5,
  LS_STATUS_INFERENCE = 6,
  LS_STATUS_IO = 7,
  // A statistic is undefined for the input, e.g. correlation of a
  // constant series.
  LS_STATUS_UNDEFINED = 8,
  LS_STATUS_PANIC = 9,
} LsStatus;

// A configured perception and control chain with its own controller state.
typedef struct LsPipeline LsPipeline;

// Lane measurement and steering command for one frame.
typedef struct LsFrameResult {
  bool valid;
  // Near band found both lines but the far band did not.
  bool degraded;
  bool lane_lost;
  // Bird's-eye columns of the near-band lines, -1 when not found.
  int64_t left_x;
  int64_t right_x;
  // NaN when `valid` is false.
  double offset_px;
  double curvature;
  double raw_deg;
  double smoothed_deg;
  double coverage;
} LsFrameResult;

// Tracking summary of a run log.
typedef struct LsMetrics {
  uint64_t sample_count;
  uint64_t lane_valid_count;
  double offset_rmse_px;
  double normalized_rmse_pct;
  // NaN when the correlation is undefined.
  double curvature_steering_r;
  uint64_t correlation_samples;
  double jitter_deg;
  double mean_proc_ms;
  double mean_fps;
  uint64_t class_events;
} LsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *ls_last_error(void);

// Library version as a static NUL-terminated string.
const char *ls_version(void);

// Creates a pipeline from an application config in JSON. NULL or `"{}"`
// selects the defaults. The thresholds come from the config's active
// illumination preset.
//
// # Safety
// `config_json` must be NULL or a NUL-terminated string; `out` must be a
// valid pointer.
enum LsStatus ls_pipeline_new(const char *config_json, struct LsPipeline **out);

// Releases a pipeline. NULL is ignored.
//
// # Safety
// `p` must be NULL or a handle from [`ls_pipeline_new`] not yet freed.
void ls_pipeline_free(struct LsPipeline *p);

// Expected input frame size.
//
// # Safety
// `p` must be a live handle; `width` and `height` valid pointers.
enum LsStatus ls_pipeline_frame_size(const struct LsPipeline *p, size_t *width, size_t *height);

// Forgets the controller history.
//
// # Safety
// `p` must be a live handle.
enum LsStatus ls_pipeline_reset(struct LsPipeline *p);

// Runs one interleaved RGB8 frame (`width * height * 3` bytes, row-major)
// through the pipeline.
//
// # Safety
// `p` must be a live handle, `rgb` must point to `len` readable bytes and
// `out` must be a valid pointer.
enum LsStatus ls_pipeline_process_rgb(struct LsPipeline *p,
                                      const uint8_t *rgb,
                                      size_t len,
                                      size_t width,
                                      size_t height,
                                      struct LsFrameResult *out);

// Root mean square of `n` values.
//
// # Safety
// `series` must point to `n` doubles; `out` must be valid.
enum LsStatus ls_rmse(const double *series, size_t n, double *out);

// RMSE in pixels as a percentage of the image width.
double ls_normalized_rmse(double rmse_px, size_t image_width_px);

// Sample Pearson correlation of two length-`n` series. Returns
// `Undefined` for fewer than two samples or a constant series.
//
// # Safety
// `x` and `y` must each point to `n` doubles; `out` must be valid.
enum LsStatus ls_pearson(const double *x, const double *y, size_t n, double *out);

// Parses a run-log CSV and summarizes it.
//
// # Safety
// `csv` must be a NUL-terminated string; `out` must be valid.
enum LsStatus ls_metrics_from_csv(const char *csv, struct LsMetrics *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LANESIM_H */
