// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "offtrack/offtrack.h"

namespace {

struct Failure {
  ot_status status;
};

void check(ot_status s) {
  if (s != OT_OK) throw Failure{s};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Config = Handle<ot_config, ot_config_free>;
using Corpus = Handle<ot_corpus, ot_corpus_free>;
using Tracks = Handle<ot_tracks, ot_tracks_free>;
using Report = Handle<ot_report, ot_report_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  ot_string_free(s);
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out_path);
  f << text;
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = -1;
};

Config load_config(const Globals& g) {
  Config cfg;
  if (g.config_path.empty()) {
    check(ot_config_new_default(cfg.out()));
  } else {
    check(ot_config_load(g.config_path.c_str(), cfg.out()));
  }
  if (g.seed) check(ot_config_set_seed(cfg.get(), *g.seed));
  if (g.threads >= 0) check(ot_config_set_threads(cfg.get(), g.threads));
  return cfg;
}

Corpus open_corpus(const std::string& dir) {
  Corpus c;
  check(ot_corpus_open(dir.c_str(), c.out()));
  return c;
}

Tracks load_tracks(const std::string& path) {
  Tracks t;
  check(ot_tracks_load(path.c_str(), t.out()));
  return t;
}

void print_counts(const char* label, const ot_tracks* t) {
  size_t n = 0, boxes = 0;
  check(ot_tracks_count(t, &n, &boxes));
  std::cerr << label << ": " << n << " tracks, " << boxes << " boxes\n";
}

Report evaluate_predictions(const Globals& g, const std::string& corpus_dir, const std::string& predictions) {
  const Config cfg = load_config(g);
  const Corpus corpus = open_corpus(corpus_dir);
  Report r;
  check(ot_evaluate_file(corpus.get(), cfg.get(), predictions.c_str(), r.out()));
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offtrack: offboard 3D tracking, track refinement and evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag_callback("--version", [] {
    std::cout << ot_version() << "\n";
    std::exit(0);
  });

  std::string corpus_dir, tracks_path, out_path, bases_path, predictions, format = "text", mode = "bidirectional";
  std::vector<std::string> inputs;
  int sequences = 0;
  bool with_tta = false;
  std::uint64_t seed_value = 0;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed_value, "random seed")->each([&](const std::string&) { g.seed = seed_value; });
  };

  auto* sim = app.add_subcommand("simulate", "generate a synthetic corpus");
  sim->add_option("--out", out_path, "corpus directory")->required();
  sim->add_option("--sequences", sequences, "number of sequences")->check(CLI::PositiveNumber);
  add_seed(sim);

  auto* trk = app.add_subcommand("track", "run the offboard tracker");
  trk->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  trk->add_option("--mode", mode)->check(CLI::IsMember({"none", "forward", "bidirectional"}));
  trk->add_option("--out", out_path, "track JSONL")->required();

  auto* post = app.add_subcommand("postprocess", "drop boxes without points");
  post->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  post->add_option("--tracks", tracks_path)->required()->check(CLI::ExistingFile);
  post->add_option("--out", out_path)->required();

  auto* tco = app.add_subcommand("tco", "track coherence optimization for rigid objects");
  tco->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  tco->add_option("--tracks", tracks_path)->required()->check(CLI::ExistingFile);
  tco->add_option("--bases", bases_path, "JSON list of base-frame annotations")->check(CLI::ExistingFile);
  tco->add_option("--out", out_path)->required();

  auto* tta = app.add_subcommand("tta-merge", "merge refined tracks of several TTA variants");
  tta->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  tta->add_option("inputs", inputs, "track files, one per variant (tag = file stem)")
      ->required()
      ->check(CLI::ExistingFile);
  tta->add_option("--out", out_path)->required();

  auto* asg = app.add_subcommand("assign", "track-centric label assignment against GT");
  asg->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  asg->add_option("--tracks", tracks_path)->required()->check(CLI::ExistingFile);
  asg->add_option("--out", out_path, "assignment JSONL")->required();

  auto* ds = app.add_subcommand("build-dataset", "write per-track samples");
  ds->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  ds->add_option("--tracks", tracks_path)->required()->check(CLI::ExistingFile);
  ds->add_option("--out", out_path, "sample container")->required();
  ds->add_flag("--tta", with_tta, "also write the TTA variants of every sample");
  add_seed(ds);

  auto* ev = app.add_subcommand("eval", "AP, CLEAR-MOT and inspection metrics");
  ev->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--predictions", predictions, "tracks or detections JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--format", format)->check(CLI::IsMember({"text", "csv", "json", "svg"}));
  ev->add_option("--out", out_path);

  auto* insp = app.add_subcommand("inspect", "T-FN / H-FP / H-TP table");
  insp->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  insp->add_option("--predictions", predictions)->required()->check(CLI::ExistingFile);
  insp->add_option("--out", out_path);

  auto* plot = app.add_subcommand("plot", "GT life-cycle histogram as SVG");
  plot->add_option("--corpus", corpus_dir)->required()->check(CLI::ExistingDirectory);
  plot->add_option("--predictions", predictions)->required()->check(CLI::ExistingFile);
  plot->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      Config cfg = load_config(g);
      if (sequences > 0) check(ot_config_set_num_sequences(cfg.get(), sequences));
      char* card = nullptr;
      check(ot_simulate(cfg.get(), out_path.c_str(), &card));
      std::cout << take(card);
    } else if (trk->parsed()) {
      const Config cfg = load_config(g);
      const Corpus corpus = open_corpus(corpus_dir);
      const ot_track_mode m = mode == "none" ? OT_MODE_NONE : mode == "forward" ? OT_MODE_FORWARD : OT_MODE_BIDIRECTIONAL;
      Tracks t;
      check(ot_track(corpus.get(), cfg.get(), m, t.out()));
      check(ot_tracks_save(t.get(), corpus.get(), out_path.c_str()));
      print_counts("tracked", t.get());
    } else if (post->parsed()) {
      const Config cfg = load_config(g);
      const Corpus corpus = open_corpus(corpus_dir);
      const Tracks in = load_tracks(tracks_path);
      Tracks out;
      size_t entries = 0, tracks = 0;
      check(ot_remove_empty(corpus.get(), cfg.get(), in.get(), out.out(), &entries, &tracks));
      check(ot_tracks_save(out.get(), corpus.get(), out_path.c_str()));
      std::cerr << "removed " << entries << " empty boxes, " << tracks << " tracks\n";
    } else if (tco->parsed()) {
      const Config cfg = load_config(g);
      const Corpus corpus = open_corpus(corpus_dir);
      const Tracks in = load_tracks(tracks_path);
      Tracks out;
      char* summary = nullptr;
      check(ot_tco(corpus.get(), cfg.get(), in.get(), bases_path.empty() ? nullptr : bases_path.c_str(), out.out(),
                   &summary));
      check(ot_tracks_save(out.get(), corpus.get(), out_path.c_str()));
      std::cout << take(summary);
    } else if (tta->parsed()) {
      const Corpus corpus = open_corpus(corpus_dir);
      std::vector<Tracks> sets;
      std::vector<std::string> tags;
      for (const auto& path : inputs) {
        sets.push_back(load_tracks(path));
        tags.push_back(std::filesystem::path(path).stem().string());
      }
      std::vector<const ot_tracks*> ptrs;
      std::vector<const char*> tag_ptrs;
      for (std::size_t i = 0; i < sets.size(); ++i) {
        ptrs.push_back(sets[i].get());
        tag_ptrs.push_back(tags[i].c_str());
      }
      Tracks merged;
      check(ot_tta_merge(ptrs.data(), tag_ptrs.data(), ptrs.size(), merged.out()));
      check(ot_tracks_save(merged.get(), corpus.get(), out_path.c_str()));
      print_counts("merged", merged.get());
    } else if (asg->parsed()) {
      const Config cfg = load_config(g);
      const Corpus corpus = open_corpus(corpus_dir);
      const Tracks in = load_tracks(tracks_path);
      size_t n = 0, matched = 0;
      check(ot_assign(corpus.get(), cfg.get(), in.get(), out_path.c_str(), &n, &matched));
      std::cerr << "assigned " << matched << " of " << n << " tracks\n";
    } else if (ds->parsed()) {
      const Config cfg = load_config(g);
      const Corpus corpus = open_corpus(corpus_dir);
      const Tracks in = load_tracks(tracks_path);
      size_t n = 0;
      check(ot_build_dataset(corpus.get(), cfg.get(), in.get(), out_path.c_str(), with_tta ? 1 : 0, &n));
      std::cerr << "wrote " << n << " samples\n";
    } else if (ev->parsed()) {
      const Report r = evaluate_predictions(g, corpus_dir, predictions);
      char* text = nullptr;
      if (format == "svg") {
        check(ot_report_lifecycle_svg(r.get(), &text));
      } else {
        const ot_format f = format == "csv" ? OT_FORMAT_CSV : format == "json" ? OT_FORMAT_JSON : OT_FORMAT_TEXT;
        check(ot_report_render(r.get(), f, &text));
      }
      emit(take(text), out_path);
    } else if (insp->parsed()) {
      const Report r = evaluate_predictions(g, corpus_dir, predictions);
      std::string table = "class,num_gt,t_fn,t_fn_ratio,h_fp,h_fp_ratio,h_tp,h_tp_ratio,s_t\n";
      for (const char* cls : {"Vehicle", "Pedestrian", "Cyclist"}) {
        double v = 0.0;
        if (ot_report_metric(r.get(), (std::string(cls) + ".num_gt").c_str(), &v) != OT_OK) continue;
        table += cls;
        for (const char* key : {"num_gt", "t_fn", "t_fn_ratio", "h_fp", "h_fp_ratio", "h_tp", "h_tp_ratio", "s_t"}) {
          check(ot_report_metric(r.get(), (std::string(cls) + "." + key).c_str(), &v));
          char buf[64];
          std::snprintf(buf, sizeof(buf), ",%.6g", v);
          table += buf;
        }
        table += "\n";
      }
      emit(table, out_path);
    } else if (plot->parsed()) {
      const Report r = evaluate_predictions(g, corpus_dir, predictions);
      char* svg = nullptr;
      check(ot_report_lifecycle_svg(r.get(), &svg));
      emit(take(svg), out_path);
    }
  } catch (const Failure& f) {
    const nlohmann::json line{{"error", {{"status", static_cast<int>(f.status)},
                                         {"code", ot_last_error_code()},
                                         {"message", ot_last_error()}}}};
    std::cerr << line.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    const nlohmann::json line{{"error", {{"status", static_cast<int>(OT_ERR_IO)}, {"code", "io_error"}, {"message", e.what()}}}};
    std::cerr << line.dump() << "\n";
    return 2;
  }
  return 0;
}
