/* skelfall C API: skeleton-based fall detection training and evaluation.
 *
 * All functions return SF_OK (0) on success or an sf_status error code;
 * sf_last_error() holds the message for the most recent failure on the
 * calling thread. Strings handed out through char** parameters are owned by
 * the caller and must be released with sf_string_free().
 */
#ifndef SKELFALL_SKELFALL_H
#define SKELFALL_SKELFALL_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
  SF_OK = 0,
  SF_ERR_INVALID_ARGUMENT = 1,
  SF_ERR_DIMENSION = 2,
  SF_ERR_FORMAT = 3,
  SF_ERR_IO = 4,
  SF_ERR_CONFIG = 5,
  SF_ERR_TOPOLOGY_MISMATCH = 6,
  SF_ERR_LABEL = 7,
  SF_ERR_EMPTY_SAMPLE = 8,
  SF_ERR_NUMERIC = 9,
  SF_ERR_TRAINING = 10,
  SF_ERR_INTERNAL = 11
} sf_status;

const char* sf_version(void);
const char* sf_status_name(sf_status status);
const char* sf_last_error(void);
void sf_string_free(char* s);

/* Writes a deterministic NTU-format synthetic corpus under out_dir.
 * config_json may be NULL or a full run-config document. */
sf_status sf_synth(const char* config_json, const char* out_dir, char** out_summary_json);

/* Trains per the config on .skeleton files under data_dir; writes effective
 * config, per-epoch JSONL history, split id lists and checkpoints (last.ckpt,
 * best.ckpt) under out_dir. The callback, when non-NULL, receives one JSON
 * record per epoch. */
typedef void (*sf_epoch_callback)(const char* epoch_json, void* user);
sf_status sf_train(const char* config_json, const char* data_dir, const char* out_dir,
                   sf_epoch_callback callback, void* user, char** out_summary_json);

/* Evaluates the checkpoint on the test side of the split (checkpoint's split
 * when split is NULL). topology, when non-NULL, must agree with the
 * checkpoint's joint count. transfer != 0 additionally verifies that no
 * parameter or batch-norm statistic changed. */
sf_status sf_evaluate(const char* checkpoint_path, const char* data_dir, const char* split,
                      const char* topology, int transfer, const char* report_path,
                      char** out_report_json);

/* Parameter/FLOP accounting plus wall-clock forward timing. Exactly one of
 * checkpoint_path / config_json must be non-NULL. */
sf_status sf_profile(const char* checkpoint_path, const char* config_json, int runs,
                     int epoch_samples, const char* out_path, char** out_json);

/* Plain-text summary of one .skeleton file. */
sf_status sf_inspect(const char* skeleton_path, char** out_text);

/* Opaque model handle for embedders. */
typedef struct sf_model_s sf_model;
sf_status sf_model_create(const char* config_json, sf_model** out);
sf_status sf_model_load(const char* checkpoint_path, sf_model** out);
sf_status sf_model_save(sf_model* model, const char* checkpoint_path);
/* JSON: parameter count, FLOP estimate and the config echo. */
sf_status sf_model_info(sf_model* model, char** out_json);
void sf_model_free(sf_model* model);

#ifdef __cplusplus
}
#endif

#endif /* SKELFALL_SKELFALL_H */
