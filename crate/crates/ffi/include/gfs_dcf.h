#ifndef GFS_DCF_H
#define GFS_DCF_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a library call.
typedef enum GfsStatus {
  GFS_STATUS_OK = 0,
  GFS_STATUS_NULL_POINTER = 1,
  // Bad frame data, box, value text or shape.
  GFS_STATUS_INVALID_ARGUMENT = 2,
  // Unknown key or out-of-range setting.
  GFS_STATUS_CONFIG = 3,
  GFS_STATUS_IO = 4,
  // The solver objective kept rising.
  GFS_STATUS_DIVERGENCE = 5,
  // A singular or non-finite computation.
  GFS_STATUS_NUMERIC = 6,
  // An internal panic was caught.
  GFS_STATUS_INTERNAL = 7,
} GfsStatus;

// Tracker settings.
typedef struct GfsConfig GfsConfig;

// A running tracker.
typedef struct GfsTracker GfsTracker;

// One video frame.
//
// `pixels` holds `width * height * channels` interleaved bytes with 1 (gray)
// or 3 (RGB) channels. `features` is optional (NULL when unused) and holds
// `feature_channels` planes of `feature_side * feature_side` row-major values.
typedef struct GfsFrame {
  const uint8_t *pixels;
  size_t width;
  size_t height;
  size_t channels;
  const double *features;
  size_t feature_side;
  size_t feature_channels;
} GfsFrame;

// Axis-aligned box, top-left corner and size in 0-indexed pixels.
typedef struct GfsBox {
  double x;
  double y;
  double w;
  double h;
} GfsBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gfs_version(void);

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next failing call on the same thread.
const char *gfs_last_error(void);

// New configuration holding the default settings. Never NULL.
struct GfsConfig *gfs_config_new(void);

// # Safety
// `config` is NULL or a handle from [`gfs_config_new`] not yet freed.
void gfs_config_free(struct GfsConfig *config);

// Sets one key using the configuration-file key names and value syntax.
// The key `preset` resets every setting to a named preset.
//
// # Safety
// `config` is a live handle; `key` and `value` are NUL-terminated strings.
enum GfsStatus gfs_config_set(struct GfsConfig *config, const char *key, const char *value);

// Replaces the settings with those of a `key = value` file.
//
// # Safety
// `config` is a live handle; `path` is a NUL-terminated string.
enum GfsStatus gfs_config_load(struct GfsConfig *config, const char *path);

// Checks the settings as a whole; [`gfs_tracker_new`] does the same.
//
// # Safety
// `config` is a live handle.
enum GfsStatus gfs_config_validate(const struct GfsConfig *config);

// Starts tracking `init_box` in the first frame. On success `*out` receives
// a new handle; it is left untouched on failure. The config is copied.
//
// # Safety
// `config` and `frame` point to valid values, `frame` describes readable
// buffers of the stated sizes, and `out` is writable.
enum GfsStatus gfs_tracker_new(const struct GfsConfig *config,
                               const struct GfsFrame *frame,
                               struct GfsBox init_box,
                               struct GfsTracker **out);

// Locates the target in the next frame, writes the box to `*out_box` and
// updates the model. After a failure the tracker keeps its previous model
// but its box may have moved.
//
// # Safety
// `tracker` is a live handle, `frame` as for [`gfs_tracker_new`], and
// `out_box` is writable.
enum GfsStatus gfs_tracker_update(struct GfsTracker *tracker,
                                  const struct GfsFrame *frame,
                                  struct GfsBox *out_box);

// Current box.
//
// # Safety
// `tracker` is a live handle and `out_box` is writable.
enum GfsStatus gfs_tracker_box(const struct GfsTracker *tracker, struct GfsBox *out_box);

// Number of frames learned so far, 0 for NULL.
//
// # Safety
// `tracker` is NULL or a live handle.
size_t gfs_tracker_frames(const struct GfsTracker *tracker);

// Side of the filter grid and number of kept channels of the last learned
// filter. Either output pointer may be NULL.
//
// # Safety
// `tracker` is a live handle; non-NULL outputs are writable.
enum GfsStatus gfs_tracker_selection(const struct GfsTracker *tracker,
                                     size_t *out_side,
                                     size_t *out_kept_channels);

// # Safety
// `tracker` is NULL or a handle from [`gfs_tracker_new`] not yet freed.
void gfs_tracker_free(struct GfsTracker *tracker);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GFS_DCF_H */
