/*
 * groundlab C API.
 *
 * A shared-library surface over the grounding lab: synthetic data
 * generation, two-stage training with adversarial contrastive learning and
 * the backdoor-adjusted second stage, evaluation, and the ablation grid.
 * Handles are opaque; every entry point returns a status code and the last
 * error message is retrievable per thread.
 */
#ifndef GROUNDLAB_GROUNDLAB_H_
#define GROUNDLAB_GROUNDLAB_H_

#include <stdint.h>

#if defined(_WIN32)
#define GRD_API __declspec(dllexport)
#else
#define GRD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum grd_status {
  GRD_OK = 0,
  GRD_ERR_INVALID_ARGUMENT = 1, /* bad flag/config value (usage error) */
  GRD_ERR_IO = 2,               /* file missing or unwritable */
  GRD_ERR_SCHEMA = 3,           /* malformed file or shape mismatch */
  GRD_ERR_NUMERIC = 4,          /* training diverged / non-finite values */
  GRD_ERR_REFUSED = 5,          /* output exists and force not given */
  GRD_ERR_INTERNAL = 6
} grd_status;

typedef struct grd_config grd_config;

GRD_API const char* grd_version(void);

/* Thread-local message describing the most recent failure. */
GRD_API const char* grd_last_error(void);

/* Frees strings returned through out-parameters. */
GRD_API void grd_string_free(char* s);

/* ---- configuration ---- */

/* name: "desk", "paper", or "tiny" */
GRD_API grd_status grd_config_preset(const char* name, grd_config** out);
GRD_API grd_status grd_config_load(const char* path, grd_config** out);
GRD_API grd_status grd_config_to_json(const grd_config* cfg, char** json_out);
GRD_API void grd_config_free(grd_config* cfg);

/* ---- pipeline commands ----
 *
 * Deterministic: identical arguments produce byte-identical output files.
 * threads <= 0 consults GROUND_LAB_THREADS, then hardware concurrency.
 */

GRD_API grd_status grd_generate_dataset(const grd_config* cfg, const char* out_dir,
                                        long long pairs, const char* split,
                                        uint64_t seed, int force, int threads);

GRD_API grd_status grd_train(const grd_config* cfg, const char* data_dir,
                             const char* variant, const char* out_dir, uint64_t seed,
                             int force, int threads, int checkpoint_every);

GRD_API grd_status grd_evaluate(const char* ckpt_path, const char* data_dir,
                                const char* out_dir, int force, int plot,
                                int threads);

/* variants_csv: comma-separated subset of
 * baseline,acl_spatial,acl_temporal,acl,bda,full; NULL or "" runs all six. */
GRD_API grd_status grd_ablate(const grd_config* cfg, const char* out_dir, int seeds,
                              const char* variants_csv, long long train_pairs,
                              long long eval_pairs, int with_ie, int force,
                              int threads);

/* Finite-difference gradient verification; *report_json receives a JSON
 * summary (free with grd_string_free). */
GRD_API grd_status grd_verify_gradients(const grd_config* cfg, uint64_t seed,
                                        char** report_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GROUNDLAB_GROUNDLAB_H_ */
