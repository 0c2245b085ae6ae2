#include "offtrack/offtrack.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "config.hpp"
#include "error.hpp"
#include "pipeline.hpp"

struct ot_config {
  offtrack::PipelineConfig cfg;
};

struct ot_corpus {
  offtrack::pipeline::Corpus corpus;
};

struct ot_tracks {
  offtrack::pipeline::TrackSet tracks;
};

struct ot_report {
  offtrack::evaluation::EvalReport report;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_code;

ot_status fail(ot_status status, const std::string& code, const std::string& message) {
  g_code = code;
  g_error = message;
  return status;
}

ot_status null_arg(const char* what) { return fail(OT_ERR_INVALID_ARGUMENT, "invalid_argument", std::string(what) + " is null"); }

// Codes raised by the numeric core rather than by bad input.
bool is_compute_code(const std::string& code) {
  return code == "degenerate_innovation" || code == "no_overlap" || code == "empty_cloud" ||
         code == "insufficient_shapes";
}

template <typename F>
ot_status guarded(F&& fn) {
  g_error.clear();
  g_code.clear();
  try {
    fn();
    return OT_OK;
  } catch (const offtrack::SchemaError& e) {
    return fail(OT_ERR_SCHEMA, e.code(), e.what());
  } catch (const offtrack::IoError& e) {
    return fail(OT_ERR_IO, e.code(), e.what());
  } catch (const offtrack::Error& e) {
    return fail(is_compute_code(e.code()) ? OT_ERR_COMPUTE : OT_ERR_INVALID_ARGUMENT, e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(OT_ERR_INTERNAL, "out_of_memory", "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(OT_ERR_IO, "io_error", e.what());
  } catch (const std::exception& e) {
    return fail(OT_ERR_INTERNAL, "internal", e.what());
  } catch (...) {
    return fail(OT_ERR_INTERNAL, "internal", "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ot_version(void) { return "0.1.0"; }
const char* ot_last_error(void) { return g_error.c_str(); }
const char* ot_last_error_code(void) { return g_code.c_str(); }
void ot_string_free(char* s) { std::free(s); }

ot_status ot_config_new_default(ot_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ot_config{}; });
}

ot_status ot_config_load(const char* path, ot_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ot_config{offtrack::load_config(path)}; });
}

ot_status ot_config_parse(const char* json_text, ot_config** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ot_config{offtrack::parse_config(json_text)}; });
}

ot_status ot_config_set_seed(ot_config* cfg, uint64_t seed) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] { cfg->cfg.seed = seed; });
}

ot_status ot_config_set_threads(ot_config* cfg, int threads) {
  if (!cfg) return null_arg("cfg");
  if (threads < 0) return fail(OT_ERR_INVALID_ARGUMENT, "invalid_argument", "threads must be >= 0");
  return guarded([&] { cfg->cfg.threads = threads; });
}

ot_status ot_config_set_num_sequences(ot_config* cfg, int num_sequences) {
  if (!cfg) return null_arg("cfg");
  if (num_sequences < 1) return fail(OT_ERR_INVALID_ARGUMENT, "invalid_argument", "num_sequences must be >= 1");
  return guarded([&] { cfg->cfg.sim.num_sequences = num_sequences; });
}

ot_status ot_config_dump(const ot_config* cfg, char** out_json) {
  if (!cfg) return null_arg("cfg");
  if (!out_json) return null_arg("out_json");
  return guarded([&] { *out_json = dup_string(offtrack::dump_config(cfg->cfg)); });
}

void ot_config_free(ot_config* cfg) { delete cfg; }

ot_status ot_simulate(const ot_config* cfg, const char* out_dir, char** out_scorecard_json) {
  if (!cfg) return null_arg("cfg");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] {
    const auto card = offtrack::pipeline::simulate(cfg->cfg, out_dir);
    if (out_scorecard_json) *out_scorecard_json = dup_string(card.render_json());
  });
}

ot_status ot_corpus_open(const char* dir, ot_corpus** out) {
  if (!dir) return null_arg("dir");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ot_corpus{offtrack::pipeline::Corpus::open(dir)}; });
}

ot_status ot_corpus_info(const ot_corpus* corpus, size_t* sequences, size_t* detections, size_t* gt_boxes) {
  if (!corpus) return null_arg("corpus");
  return guarded([&] {
    if (sequences) *sequences = corpus->corpus.manifest().sequences.size();
    if (detections) *detections = corpus->corpus.num_detections();
    if (gt_boxes) *gt_boxes = corpus->corpus.num_gt_boxes();
  });
}

void ot_corpus_free(ot_corpus* corpus) { delete corpus; }

ot_status ot_track(const ot_corpus* corpus, const ot_config* cfg, ot_track_mode mode, ot_tracks** out) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!out) return null_arg("out");
  offtrack::tracking::Mode m;
  switch (mode) {
    case OT_MODE_NONE: m = offtrack::tracking::Mode::None; break;
    case OT_MODE_FORWARD: m = offtrack::tracking::Mode::Forward; break;
    case OT_MODE_BIDIRECTIONAL: m = offtrack::tracking::Mode::Bidirectional; break;
    default: return fail(OT_ERR_INVALID_ARGUMENT, "invalid_argument", "unknown tracking mode");
  }
  return guarded([&] { *out = new ot_tracks{offtrack::pipeline::track(corpus->corpus, cfg->cfg, m)}; });
}

ot_status ot_tracks_load(const char* path, ot_tracks** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ot_tracks{offtrack::pipeline::load_tracks(path)}; });
}

ot_status ot_tracks_save(const ot_tracks* tracks, const ot_corpus* corpus, const char* path) {
  if (!tracks) return null_arg("tracks");
  if (!corpus) return null_arg("corpus");
  if (!path) return null_arg("path");
  return guarded([&] { offtrack::pipeline::save_tracks(path, corpus->corpus.manifest(), tracks->tracks); });
}

ot_status ot_tracks_count(const ot_tracks* tracks, size_t* num_tracks, size_t* num_boxes) {
  if (!tracks) return null_arg("tracks");
  return guarded([&] {
    if (num_tracks) *num_tracks = offtrack::pipeline::count_tracks(tracks->tracks);
    if (num_boxes) *num_boxes = offtrack::pipeline::count_boxes(tracks->tracks);
  });
}

void ot_tracks_free(ot_tracks* tracks) { delete tracks; }

ot_status ot_remove_empty(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* in, ot_tracks** out,
                          size_t* entries_removed, size_t* tracks_removed) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!in) return null_arg("in");
  if (!out) return null_arg("out");
  return guarded([&] {
    offtrack::postprocess::RemovalStats stats;
    *out = new ot_tracks{offtrack::pipeline::remove_empty(corpus->corpus, in->tracks, cfg->cfg, &stats)};
    if (entries_removed) *entries_removed = stats.entries_removed;
    if (tracks_removed) *tracks_removed = stats.tracks_removed;
  });
}

ot_status ot_tco(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* in, const char* base_annotations,
                 ot_tracks** out, char** out_summary) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!in) return null_arg("in");
  if (!out) return null_arg("out");
  return guarded([&] {
    std::map<offtrack::pipeline::TrackKey, offtrack::tco::BaseOverride> bases;
    if (base_annotations) bases = offtrack::pipeline::load_base_annotations(base_annotations);
    offtrack::pipeline::TcoSummary summary;
    auto result = offtrack::pipeline::run_tco(corpus->corpus, in->tracks, cfg->cfg,
                                              base_annotations ? &bases : nullptr, &summary);
    *out = new ot_tracks{std::move(result)};
    if (out_summary) *out_summary = dup_string(summary.render_text());
  });
}

ot_status ot_tta_merge(const ot_tracks* const* variants, const char* const* tags, size_t count, ot_tracks** out) {
  if (!variants) return null_arg("variants");
  if (!tags) return null_arg("tags");
  if (!out) return null_arg("out");
  for (size_t i = 0; i < count; ++i) {
    if (!variants[i]) return null_arg("variant");
    if (!tags[i]) return null_arg("tag");
  }
  return guarded([&] {
    std::vector<offtrack::pipeline::TrackSet> sets;
    std::vector<std::string> names;
    for (size_t i = 0; i < count; ++i) {
      sets.push_back(variants[i]->tracks);
      names.emplace_back(tags[i]);
    }
    *out = new ot_tracks{offtrack::pipeline::tta_merge(sets, names)};
  });
}

ot_status ot_assign(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* tracks, const char* out_path,
                    size_t* num_tracks, size_t* num_matched) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!tracks) return null_arg("tracks");
  if (!out_path) return null_arg("out_path");
  return guarded([&] {
    const auto s = offtrack::pipeline::assign(corpus->corpus, tracks->tracks, cfg->cfg, out_path);
    if (num_tracks) *num_tracks = s.tracks;
    if (num_matched) *num_matched = s.matched;
  });
}

ot_status ot_build_dataset(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* tracks,
                           const char* out_path, int with_tta, size_t* num_samples) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!tracks) return null_arg("tracks");
  if (!out_path) return null_arg("out_path");
  return guarded([&] {
    const auto n = offtrack::pipeline::build_dataset(corpus->corpus, tracks->tracks, cfg->cfg, out_path, with_tta != 0);
    if (num_samples) *num_samples = n;
  });
}

ot_status ot_evaluate(const ot_corpus* corpus, const ot_config* cfg, const ot_tracks* tracks, ot_report** out) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!tracks) return null_arg("tracks");
  if (!out) return null_arg("out");
  return guarded([&] { *out = new ot_report{offtrack::pipeline::evaluate(corpus->corpus, tracks->tracks, cfg->cfg)}; });
}

ot_status ot_evaluate_file(const ot_corpus* corpus, const ot_config* cfg, const char* predictions_path,
                           ot_report** out) {
  if (!corpus) return null_arg("corpus");
  if (!cfg) return null_arg("cfg");
  if (!predictions_path) return null_arg("predictions_path");
  if (!out) return null_arg("out");
  return guarded([&] {
    if (!corpus->corpus.has_gt()) throw offtrack::Error("missing_gt", "evaluation needs gt.jsonl in the corpus");
    const auto records = offtrack::io::read_records(predictions_path);
    *out = new ot_report{offtrack::evaluation::evaluate(offtrack::pipeline::eval_boxes(records),
                                                        offtrack::pipeline::gt_eval_boxes(corpus->corpus),
                                                        cfg->cfg.evaluation)};
  });
}

ot_status ot_report_render(const ot_report* report, ot_format format, char** out) {
  if (!report) return null_arg("report");
  if (!out) return null_arg("out");
  return guarded([&] {
    switch (format) {
      case OT_FORMAT_TEXT: *out = dup_string(report->report.render_text()); return;
      case OT_FORMAT_CSV: *out = dup_string(report->report.render_csv()); return;
      case OT_FORMAT_JSON: *out = dup_string(report->report.render_json()); return;
    }
    throw offtrack::Error("invalid_argument", "unknown report format");
  });
}

ot_status ot_report_metric(const ot_report* report, const char* name, double* out) {
  if (!report) return null_arg("report");
  if (!name) return null_arg("name");
  if (!out) return null_arg("out");
  return guarded([&] { *out = report->report.metric(name); });
}

ot_status ot_report_lifecycle_svg(const ot_report* report, char** out) {
  if (!report) return null_arg("report");
  if (!out) return null_arg("out");
  return guarded([&] { *out = dup_string(report->report.render_life_cycle_svg()); });
}

void ot_report_free(ot_report* report) { delete report; }

}  // extern "C"
