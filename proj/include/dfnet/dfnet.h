/* C interface to the dfnet depth-estimation library. */
#ifndef DFNET_DFNET_H
#define DFNET_DFNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(DFNET_BUILDING_LIBRARY)
#define DFNET_API __attribute__((visibility("default")))
#else
#define DFNET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; also the CLI exit codes. */
typedef enum df_status {
  DF_OK = 0,
  DF_ERR_USAGE = 1,
  DF_ERR_DATA = 2,
  DF_ERR_DIVERGED = 3,
  DF_ERR_INTERNAL = 4
} df_status;

/* Message for the last failure on the calling thread; empty after success. */
DFNET_API const char* df_last_error(void);
DFNET_API const char* df_version(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct df_config df_config;

DFNET_API df_config* df_config_create(void);
DFNET_API void df_config_destroy(df_config* cfg);
/* Keys as in config files; '-' and '_' are interchangeable. */
DFNET_API df_status df_config_set(df_config* cfg, const char* key, const char* value);
DFNET_API df_status df_config_load_file(df_config* cfg, const char* path);
DFNET_API size_t df_config_key_count(void);
DFNET_API const char* df_config_key_name(size_t i);
/* Hash of the non-path settings, 16 hex digits plus NUL. */
DFNET_API df_status df_config_hash(const df_config* cfg, char out[17]);

/* ---- commands ---------------------------------------------------------- */

typedef struct df_metrics {
  double delta_1;
  double delta_2;
  double delta_3;
  double rmse;
  double log_rmse;
  double scale_inv_mse;
  uint64_t n_pixels;
} df_metrics;

typedef struct df_train_summary {
  int epochs;
  int steps;
  double first_loss;
  double final_loss;
} df_train_summary;

DFNET_API df_status df_cmd_generate(const df_config* cfg, int* frames_written);
DFNET_API df_status df_cmd_flow(const df_config* cfg, int* flows_written);
/* Progress lines go to stderr unless the config sets quiet. */
DFNET_API df_status df_cmd_train(const df_config* cfg, df_train_summary* summary);
DFNET_API df_status df_cmd_eval(const df_config* cfg, df_metrics* report);
DFNET_API df_status df_cmd_infer(const df_config* cfg);
DFNET_API df_status df_cmd_perturb(const df_config* cfg);
/* reports receives the plain, blur3, blur10 and darkened columns in order. */
DFNET_API df_status df_cmd_robustness(const df_config* cfg, df_metrics reports[4]);

/* ---- models ------------------------------------------------------------ */

typedef struct df_model df_model;

DFNET_API df_status df_model_load(const char* path, df_model** out);
DFNET_API void df_model_destroy(df_model* model);
DFNET_API int df_model_input_channels(const df_model* model);
/* rgb and prev_rgb: interleaved 8-bit RGB, width*height*3 bytes. prev_rgb is
   required for 5-channel models and must be NULL for 3-channel ones.
   depth: width*height metric depths (metres). */
DFNET_API df_status df_model_predict(const df_model* model, const uint8_t* rgb, const uint8_t* prev_rgb, int width,
                                     int height, double* depth);

/* ---- flow -------------------------------------------------------------- */

/* Grayscale [0,1] frames; u, v: width*height displacements in pixels, prev(x) ~ curr(x + flow). */
DFNET_API df_status df_flow_estimate(const float* prev, const float* curr, int width, int height, float* u, float* v);
DFNET_API df_status df_flo_write(const char* path, const float* u, const float* v, int width, int height);
/* Call with u = v = NULL to query the extents. */
DFNET_API df_status df_flo_read(const char* path, float* u, float* v, int* width, int* height);

/* ---- metrics ----------------------------------------------------------- */

/* mask may be NULL (all pixels). min_depth/max_range clamp predictions and bound the mask. */
DFNET_API df_status df_metrics_compute(const double* pred, const double* gt, const uint8_t* mask, size_t n,
                                       double min_depth, double max_range, df_metrics* out);

#ifdef __cplusplus
}
#endif

#endif /* DFNET_DFNET_H */
