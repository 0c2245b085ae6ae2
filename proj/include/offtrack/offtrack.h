#ifndef OFFTRACK_OFFTRACK_H
#define OFFTRACK_OFFTRACK_H

#include <stddef.h>
#include <stdint.h>

#if defined(OFFTRACK_BUILDING)
#define OT_API __attribute__((visibility("default")))
#else
#define OT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure ot_last_error() and
 * ot_last_error_code() describe it for the calling thread until its next call. */
typedef enum ot_status {
  OT_OK = 0,
  OT_ERR_INVALID_ARGUMENT = 1,
  OT_ERR_IO = 2,
  OT_ERR_SCHEMA = 3,
  OT_ERR_COMPUTE = 4,
  OT_ERR_INTERNAL = 5
} ot_status;

typedef enum ot_track_mode {
  OT_MODE_NONE = 0,
  OT_MODE_FORWARD = 1,
  OT_MODE_BIDIRECTIONAL = 2
} ot_track_mode;

typedef enum ot_format { OT_FORMAT_TEXT = 0, OT_FORMAT_CSV = 1, OT_FORMAT_JSON = 2 } ot_format;

typedef struct ot_config ot_config;
typedef struct ot_corpus ot_corpus;
typedef struct ot_tracks ot_tracks;
typedef struct ot_report ot_report;

OT_API const char* ot_version(void);
OT_API const char* ot_last_error(void);
/* Stable machine-readable code such as "schema_error" or "empty_track". */
OT_API const char* ot_last_error_code(void);
/* Frees strings returned through char** out parameters. */
OT_API void ot_string_free(char* s);

OT_API ot_status ot_config_new_default(ot_config** out);
OT_API ot_status ot_config_load(const char* path, ot_config** out);
OT_API ot_status ot_config_parse(const char* json_text, ot_config** out);
OT_API ot_status ot_config_set_seed(ot_config* cfg, uint64_t seed);
OT_API ot_status ot_config_set_threads(ot_config* cfg, int threads);
OT_API ot_status ot_config_set_num_sequences(ot_config* cfg, int num_sequences);
OT_API ot_status ot_config_dump(const ot_config* cfg, char** out_json);
OT_API void ot_config_free(ot_config* cfg);

/* Writes a corpus directory. out_scorecard_json may be NULL. */
OT_API ot_status ot_simulate(const ot_config* cfg, const char* out_dir, char** out_scorecard_json);

OT_API ot_status ot_corpus_open(const char* dir, ot_corpus** out);
OT_API ot_status ot_corpus_info(const ot_corpus* corpus, size_t* sequences, size_t* detections, size_t* gt_boxes);
OT_API void ot_corpus_free(ot_corpus* corpus);

OT_API ot_status ot_track(const ot_corpus* corpus, const ot_config* cfg, ot_track_mode mode, ot_tracks** out);
OT_API ot_status ot_tracks_load(const char* path, ot_tracks** out);
OT_API ot_status ot_tracks_save(const ot_tracks* tracks, const ot_corpus* corpus, const char* path);
OT_API ot_status ot_tracks_count(const ot_tracks* tracks, size_t* num_tracks, size_t* num_boxes);
OT_API void ot_tracks_free(ot_tracks* tracks);

/* Post-processing: drops boxes without points. Counters may be NULL. */
OT_API ot_status ot_remove_empty(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* in, ot_tracks** out,
                                 size_t* entries_removed, size_t* tracks_removed);
/* base_annotations (JSON list) and out_summary may be NULL. */
OT_API ot_status ot_tco(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* in,
                        const char* base_annotations, ot_tracks** out, char** out_summary);
OT_API ot_status ot_tta_merge(const ot_tracks* const* variants, const char* const* tags, size_t count,
                              ot_tracks** out);
OT_API ot_status ot_assign(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* tracks,
                           const char* out_path, size_t* num_tracks, size_t* num_matched);
OT_API ot_status ot_build_dataset(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* tracks,
                                  const char* out_path, int with_tta, size_t* num_samples);

OT_API ot_status ot_evaluate(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* tracks,
                             ot_report** out);
/* Predictions from a records file; records without track_id are scored as singletons. */
OT_API ot_status ot_evaluate_file(const ot_corpus* corpus, const ot_config* cfg, const char* predictions_path,
                                  ot_report** out);
OT_API ot_status ot_report_render(const ot_report* report, ot_format format, char** out);
OT_API ot_status ot_report_metric(const ot_report* report, const char* name, double* out);
OT_API ot_status ot_report_lifecycle_svg(const ot_report* report, char** out);
OT_API void ot_report_free(ot_report* report);

#ifdef __cplusplus
}
#endif

#endif
