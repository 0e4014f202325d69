#ifndef SPMKD_H
#define SPMKD_H

/*
 * C interface to the pressure-map keypoint pipeline. Every entry point
 * returns a status code; on failure spmkd_last_error() holds a thread-local
 * message describing what went wrong. Handles are opaque and must be
 * released with their destroy function; strings returned through char**
 * outputs are heap-allocated and released with spmkd_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spmkd_status {
  SPMKD_OK = 0,
  SPMKD_ERR_DIMENSION = 1, /* tensor/shape mismatch */
  SPMKD_ERR_CONFIG = 2,    /* invalid configuration value */
  SPMKD_ERR_IO = 3,        /* file missing or unwritable */
  SPMKD_ERR_PARSE = 4,     /* malformed file contents */
  SPMKD_ERR_NUMERIC = 5,   /* divergence or non-finite values */
  SPMKD_ERR_TRANSFER = 6,  /* checkpoint/model parameter mismatch */
  SPMKD_ERR_STATE = 7,     /* operation not valid in the current state */
  SPMKD_ERR_ARGUMENT = 8,  /* null or out-of-domain argument */
  SPMKD_ERR_UNKNOWN = 9,
} spmkd_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* spmkd_last_error(void);

const char* spmkd_version(void);

void spmkd_string_free(char* s);

/*
 * Run configuration. spmkd_config_create starts from defaults,
 * spmkd_config_load parses a key=value file, spmkd_config_set applies one
 * "key=value" override. Canonical text is a fixed-order serialization whose
 * FNV-1a hash identifies the run; checkpoints embed it.
 */
typedef struct spmkd_config spmkd_config;

spmkd_status spmkd_config_create(spmkd_config** out);
spmkd_status spmkd_config_load(const char* path, spmkd_config** out);
spmkd_status spmkd_config_set(spmkd_config* cfg, const char* assignment);
spmkd_status spmkd_config_canonical(const spmkd_config* cfg, char** out_text);
spmkd_status spmkd_config_hash(const spmkd_config* cfg, uint64_t* out_hash);
void spmkd_config_destroy(spmkd_config* cfg);

/*
 * Writes a synthetic pressure-map dataset (manifest, 16-bit PNGs, pose
 * sidecars) under dir. map_size <= 0 selects the default resolution (256).
 */
spmkd_status spmkd_generate_dataset(const char* dir, int64_t count, uint64_t seed,
                                    double noise_sigma, int64_t map_size);

/*
 * Two-phase training run (or the single-phase ablation when crwt.enabled is
 * false). Reads the dataset at data.path, writes checkpoints, metrics CSVs,
 * and a config snapshot under out.dir. final_loss may be NULL.
 */
spmkd_status spmkd_train(const spmkd_config* cfg, double* final_loss);

/*
 * Fits a linear posture probe on frozen descriptors from the checkpointed
 * model over data_dir's training split, then scores the training and
 * held-out splits (and, when shifted_dir is non-NULL, every labeled sample
 * of that dataset). Rows tagged train/val/shifted are appended to
 * results_csv. config_path NULL means "config.txt next to the checkpoint";
 * results_csv NULL means "probe_results.csv next to the checkpoint".
 * Accuracy outputs may be NULL; *shifted_acc is written only when
 * shifted_dir is given.
 */
spmkd_status spmkd_eval_probe(const char* ckpt_path, const char* config_path, const char* data_dir,
                              const char* shifted_dir, const char* results_csv, double* train_acc,
                              double* val_acc, double* shifted_acc);

/*
 * Runs the checkpointed model on one 16-bit grayscale pressure PNG and
 * writes a side-by-side original/reconstruction image. palette is "binary"
 * or "intensity". Phase-1 checkpoints render the presence probability;
 * phase-2 checkpoints render the reconstructed map. config_path as above.
 */
spmkd_status spmkd_reconstruct(const char* ckpt_path, const char* config_path,
                               const char* input_png, const char* out_png, const char* palette);

/*
 * Central finite-difference audit of the analytic gradients on a model
 * built from cfg (double precision, regression head, one synthetic sample
 * under the configured loss). Audited tensors: the input map and every
 * parameter tensor of at most 128 elements, so the whole graph is exercised
 * at micro-config cost. step <= 0 selects 1e-5.
 */
spmkd_status spmkd_gradcheck(const spmkd_config* cfg, double step, double tolerance,
                             double* max_rel_err, int* passed);

/*
 * Analytic per-layer FLOP/parameter table for the configured model,
 * including module subtotals and the encoder/decoder parameter ratio.
 */
spmkd_status spmkd_count_ops(const spmkd_config* cfg, char** out_table);

/* Renders a metrics CSV (epoch-indexed columns) as a line-plot PNG. */
spmkd_status spmkd_export_curves(const char* metrics_csv, const char* out_png);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPMKD_H */
