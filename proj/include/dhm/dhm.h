/* Copyright 2026 The dhmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the dhm compiler library.
 *
 * Every function returns a dhm_status. On failure the thread-local message
 * from dhm_last_error() describes the problem. Objects are opaque handles
 * released with their _free function; strings returned through char** are
 * released with dhm_string_free. Handles are immutable once created and may
 * be shared between threads.
 */

#ifndef DHM_DHM_H_
#define DHM_DHM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DHM_BUILDING_LIBRARY)
#define DHM_API __attribute__((visibility("default")))
#else
#define DHM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dhm_status {
  DHM_OK = 0,
  DHM_ERR_INVALID_ARGUMENT = 1,
  DHM_ERR_PARSE = 2,
  DHM_ERR_SHAPE = 3,
  DHM_ERR_WEIGHTS = 4,
  DHM_ERR_QUANTIZE = 5,
  DHM_ERR_UNSUPPORTED = 6,
  DHM_ERR_IO = 7,
  DHM_ERR_SIMULATION = 8,
  DHM_ERR_INTERNAL = 9
} dhm_status;

typedef enum dhm_schedule {
  DHM_SCHEDULE_ROUND_ROBIN = 0,
  DHM_SCHEDULE_REVERSE = 1,
  DHM_SCHEDULE_RANDOM = 2
} dhm_schedule;

typedef enum dhm_footprint_mode {
  DHM_FOOTPRINT_WINDOW = 0,        /* K*K words per extractor */
  DHM_FOOTPRINT_ARCHITECTURAL = 1  /* (K-1) padded lines plus K*K words */
} dhm_footprint_mode;

typedef struct dhm_model dhm_model;
typedef struct dhm_quant_options dhm_quant_options;
typedef struct dhm_qmodel dhm_qmodel;
typedef struct dhm_graph dhm_graph;
typedef struct dhm_calibration dhm_calibration;
typedef struct dhm_image dhm_image;

DHM_API const char *dhm_version(void);
DHM_API const char *dhm_status_string(dhm_status status);
/* Message of the last failed call on this thread; "" if none. */
DHM_API const char *dhm_last_error(void);
DHM_API void dhm_string_free(char *s);

/* Model: topology, optionally with float weights. */
DHM_API dhm_status dhm_model_parse(const char *text, size_t length, dhm_model **out);
DHM_API dhm_status dhm_model_parse_file(const char *path, dhm_model **out);
/* Returns a new model with weights; `model` is unchanged. */
DHM_API dhm_status dhm_model_load_weights(const dhm_model *model, const uint8_t *data, size_t length, dhm_model **out);
DHM_API dhm_status dhm_model_load_weights_file(const dhm_model *model, const char *path, dhm_model **out);
/* JSON: name, input shape, per-layer shapes and parse/load warnings plus validation diagnostics. */
DHM_API dhm_status dhm_model_summary_json(const dhm_model *model, char **out);
/* Warnings collected while parsing and loading, rendered as text. */
DHM_API size_t dhm_model_warning_count(const dhm_model *model);
DHM_API const char *dhm_model_warning(const dhm_model *model, size_t index);
/* Number of error-severity diagnostics from validation. */
DHM_API dhm_status dhm_model_error_count(const dhm_model *model, int *out);
DHM_API dhm_status dhm_model_serialize(const dhm_model *model, char **out);
DHM_API dhm_status dhm_model_ops_per_pixel(const dhm_model *model, double *out);
DHM_API void dhm_model_free(dhm_model *model);

DHM_API double dhm_throughput_gops(double ops_per_pixel, double fmax_hz);

/* Quantization. */
DHM_API dhm_status dhm_quant_options_create(int total_bits, dhm_quant_options **out);
DHM_API dhm_status dhm_quant_options_set_weight_frac(dhm_quant_options *options, const char *layer, int frac_bits);
DHM_API dhm_status dhm_quant_options_set_data_frac(dhm_quant_options *options, const char *layer, int frac_bits);
DHM_API dhm_status dhm_quant_options_set_input_frac(dhm_quant_options *options, int frac_bits);
DHM_API void dhm_quant_options_free(dhm_quant_options *options);

DHM_API dhm_status dhm_quantize(const dhm_model *model, const dhm_quant_options *options, dhm_qmodel **out);
/* JSON: per-layer formats and saturation counts. */
DHM_API dhm_status dhm_qmodel_summary_json(const dhm_qmodel *qm, char **out);
DHM_API dhm_status dhm_kernel_stats_json(const dhm_qmodel *qm, char **out);
DHM_API dhm_status dhm_kernel_stats_table(const dhm_qmodel *qm, char **out);
DHM_API void dhm_qmodel_free(dhm_qmodel *qm);

/* Actor graph. */
DHM_API dhm_status dhm_graph_build(const dhm_qmodel *qm, int nef, dhm_graph **out);
DHM_API dhm_status dhm_graph_specialize(const dhm_graph *graph, dhm_graph **out);
DHM_API dhm_status dhm_graph_census_json(const dhm_graph *graph, char **out);
DHM_API dhm_status dhm_graph_footprint_json(const dhm_graph *graph, dhm_footprint_mode mode, int word_bits, char **out);
DHM_API dhm_status dhm_graph_dot(const dhm_graph *graph, char **out);
DHM_API void dhm_graph_free(dhm_graph *graph);

/* Resource estimation. A NULL calibration means the built-in default.
 * fmax_hz <= 0 leaves throughput out of the report. */
DHM_API dhm_status dhm_calibration_load_file(const char *path, dhm_calibration **out);
DHM_API void dhm_calibration_free(dhm_calibration *calibration);
DHM_API dhm_status dhm_estimate(const dhm_qmodel *qm, const dhm_graph *graph, const dhm_calibration *calibration,
                                double fmax_hz, int as_table, char **out);

/* HDL emission. With out_dir == NULL nothing is written (dry run). The
 * manifest JSON is returned either way; `files`, if non-NULL, receives a
 * newline-separated list of written paths. */
DHM_API dhm_status dhm_emit(const dhm_graph *graph, const dhm_qmodel *qm, const char *topology_source,
                            const char *weights_source, const char *out_dir, char **manifest, char **files);

/* Images and feature maps. */
DHM_API dhm_status dhm_image_load(const char *path, const dhm_qmodel *qm, dhm_image **out);
DHM_API dhm_status dhm_image_random(const dhm_qmodel *qm, uint64_t seed, dhm_image **out);
DHM_API dhm_status dhm_image_save_raw(const dhm_image *image, const char *path);
DHM_API dhm_status dhm_image_shape(const dhm_image *image, int *channels, int *height, int *width);
DHM_API dhm_status dhm_image_values(const dhm_image *image, const int64_t **values, size_t *count);
DHM_API void dhm_image_free(dhm_image *image);

/* Simulation and reference inference. `stats` receives firing counts,
 * queue high-water mark and extractor warm-up positions as JSON. */
DHM_API dhm_status dhm_simulate(const dhm_graph *graph, const dhm_image *image, dhm_schedule schedule, uint64_t seed,
                                dhm_image **output, char **stats);
/* Output of the last layer. */
DHM_API dhm_status dhm_golden(const dhm_qmodel *qm, const dhm_image *image, dhm_image **output);
/* `exact` receives 1 on an exact match; `report` (optional) a JSON diff. */
DHM_API dhm_status dhm_compare(const dhm_image *a, const dhm_image *b, int *exact, char **report);

#ifdef __cplusplus
}
#endif

#endif /* DHM_DHM_H_ */
