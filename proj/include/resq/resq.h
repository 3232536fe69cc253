/**
 * Copyright 2026 The resq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the resq simulator.
 *
 * Every call returns a resq_status. On failure, resq_last_error() returns a
 * thread-local message describing the most recent error on the calling
 * thread. Objects are opaque handles released with their *_free function;
 * free functions accept NULL.
 */

#ifndef RESQ_RESQ_H_
#define RESQ_RESQ_H_

#include <stddef.h>
#include <stdint.h>

#if defined(RESQ_BUILDING_LIBRARY)
#define RESQ_API __attribute__((visibility("default")))
#else
#define RESQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum resq_status {
  RESQ_OK = 0,
  RESQ_ERR_INVALID_ARGUMENT = 1,
  RESQ_ERR_DIMENSION = 2,
  RESQ_ERR_DEGENERATE_RANGE = 3,
  RESQ_ERR_SEQUENCING = 4,
  RESQ_ERR_IO = 5,
  RESQ_ERR_PARSE = 6,
  RESQ_ERR_INTERNAL = 7
} resq_status;

RESQ_API const char *resq_version(void);
RESQ_API const char *resq_status_string(resq_status status);
RESQ_API const char *resq_last_error(void);

typedef struct resq_clip resq_clip;
typedef struct resq_model resq_model;
typedef struct resq_run resq_run;
typedef struct resq_session resq_session;

/* ------------------------------------------------------------------------ */
/* Clips: T frames of (C, H, W), stored on disk as a rank-4 RTF tensor.      */

typedef struct resq_clip_options {
  size_t height;
  size_t width;
  size_t channels;
  size_t length;
  const char *pattern; /* translating-square | translating-texture | rotating-bars | white-noise */
  double motion;       /* pixels per frame */
  double noise_sigma;
  uint64_t seed;
} resq_clip_options;

RESQ_API void resq_clip_options_init(resq_clip_options *options);
RESQ_API resq_status resq_clip_generate(const resq_clip_options *options, resq_clip **out);
RESQ_API resq_status resq_clip_create(const float *data, size_t frames, size_t channels, size_t height, size_t width,
                                      resq_clip **out);
RESQ_API resq_status resq_clip_load(const char *path, resq_clip **out);
RESQ_API resq_status resq_clip_save(const resq_clip *clip, const char *path);
RESQ_API resq_status resq_clip_shape(const resq_clip *clip, size_t *frames, size_t *channels, size_t *height,
                                     size_t *width);
/* Copies frame t into buffer (capacity in floats). */
RESQ_API resq_status resq_clip_frame(const resq_clip *clip, size_t t, float *buffer, size_t capacity);
RESQ_API void resq_clip_free(resq_clip *clip);

/* ------------------------------------------------------------------------ */
/* Models                                                                    */

typedef struct resq_model_options {
  size_t depth;
  size_t in_channels;
  size_t channels;
  size_t kernel;
  uint64_t seed;
  int identity; /* nonzero: 1x1 identity layers */
} resq_model_options;

RESQ_API void resq_model_options_init(resq_model_options *options);
RESQ_API resq_status resq_model_build(const resq_model_options *options, resq_model **out);
RESQ_API resq_status resq_model_load(const char *path, resq_model **out);
RESQ_API resq_status resq_model_save(const resq_model *model, const char *path);
RESQ_API resq_status resq_model_layer_count(const resq_model *model, size_t *count);
RESQ_API void resq_model_free(resq_model *model);

typedef struct resq_calibration_options {
  const char *keyframe_bits; /* "W8A8" */
  const char *residual_bits; /* "W4A4" or a pool "W4A{0,4,8}"; NULL means frame-only */
  size_t period;
  size_t samples;
  size_t grid;
  int per_channel_weights;
} resq_calibration_options;

RESQ_API void resq_calibration_options_init(resq_calibration_options *options);
/* Fills every quantizer slot of the model from the given clips. */
RESQ_API resq_status resq_model_calibrate(resq_model *model, const resq_clip *const *clips, size_t n_clips,
                                          const resq_calibration_options *options);
RESQ_API resq_status resq_model_save_calibration(const resq_model *model, const char *path);
RESQ_API resq_status resq_model_load_calibration(resq_model *model, const char *path);
/*
 * Residual activation pool bit-widths of a layer. count receives the pool
 * size (0 when the layer has a single static quantizer); at most capacity
 * entries are written.
 */
RESQ_API resq_status resq_model_residual_pool(const resq_model *model, size_t layer, int *bits, size_t capacity,
                                              size_t *count);

/* ------------------------------------------------------------------------ */
/* Runs                                                                      */

typedef struct resq_run_options {
  const char *mode; /* frame | resq-pairwise | resq-recurrent | resq-dynamic */
  size_t period;
  double tau;
} resq_run_options;

RESQ_API void resq_run_options_init(resq_run_options *options);
RESQ_API resq_status resq_run_sequence(const resq_model *model, const resq_clip *clip, const resq_run_options *options,
                                       resq_run **out);
RESQ_API resq_status resq_run_frame_count(const resq_run *run, size_t *frames);
/* Amortized per-frame BOPs: convolution only and convolution plus policy. */
RESQ_API resq_status resq_run_amortized_bops(const resq_run *run, double *conv, double *total);
/* Mean over frames of the output MSE against the full-precision model. */
RESQ_API resq_status resq_run_output_mse(const resq_run *run, double *mse);
/* Copies the model output of frame t; size receives the element count. */
RESQ_API resq_status resq_run_output(const resq_run *run, size_t t, float *buffer, size_t capacity, size_t *size);
RESQ_API resq_status resq_run_write_report(const resq_run *run, const char *path, int giga);
/* One RTF per frame: frame_0000.rtf, ... */
RESQ_API resq_status resq_run_dump_outputs(const resq_run *run, const char *dir);
/* One PGM per residual frame and layer; dynamic runs only. */
RESQ_API resq_status resq_run_dump_policy(const resq_run *run, const char *dir);
RESQ_API void resq_run_free(resq_run *run);

/* ------------------------------------------------------------------------ */
/* Streaming sessions                                                        */

/* The session keeps its own copy of the model. */
RESQ_API resq_status resq_session_create(const resq_model *model, const resq_run_options *options, resq_session **out);
/*
 * Processes the next frame (channels x height x width floats). The output is
 * copied to out (capacity in floats, size receives the element count) and
 * bops receives the frame's total cost; either may be NULL.
 */
RESQ_API resq_status resq_session_push(resq_session *session, const float *frame, size_t channels, size_t height,
                                       size_t width, float *out, size_t capacity, size_t *size, uint64_t *bops);
RESQ_API void resq_session_free(resq_session *session);

/* ------------------------------------------------------------------------ */
/* Experiments driven by a JSON config string; results go to out_dir.       */

/* tradeoff.csv, stability.csv and the resolved config.json */
RESQ_API resq_status resq_experiment_sweep(const char *config_json, const char *out_dir);
/* policy_summary.csv and one PGM per map under maps/ */
RESQ_API resq_status resq_experiment_policy_map(const char *config_json, const char *out_dir);
/* variance.csv */
RESQ_API resq_status resq_experiment_variance(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}
#endif

#endif /* RESQ_RESQ_H_ */
