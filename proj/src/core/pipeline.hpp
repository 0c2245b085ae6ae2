#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "evaluation.hpp"
#include "frames.hpp"
#include "io.hpp"
#include "postprocess.hpp"
#include "sim.hpp"
#include "tco.hpp"
#include "tracking.hpp"

// Corpus-level orchestration: the on-disk corpus, per-sequence parallel work
// and the file outputs of each CLI stage.
namespace offtrack::pipeline {

namespace fs = std::filesystem;

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware threads).
// Callers write results into slot i so the merge order never depends on scheduling.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Point frames of one sequence, read from disk on first access.
class DiskFrames final : public FrameSource {
 public:
  DiskFrames(fs::path corpus_dir, std::string sequence_id, int num_frames)
      : dir_(std::move(corpus_dir)), sequence_(std::move(sequence_id)), cache_(static_cast<std::size_t>(num_frames)) {}

  const PointFrame* frame(int frame_index) const override;

 private:
  fs::path dir_;
  std::string sequence_;
  mutable std::vector<std::unique_ptr<PointFrame>> cache_;
  mutable std::vector<char> missing_ = std::vector<char>(cache_.size(), 0);
};

class Corpus {
 public:
  static Corpus open(const fs::path& dir);

  const fs::path& dir() const { return dir_; }
  const io::Manifest& manifest() const { return manifest_; }
  bool has_gt() const { return has_gt_; }
  std::size_t num_detections() const { return num_detections_; }
  std::size_t num_gt_boxes() const { return num_gt_boxes_; }

  tracking::SequenceDetections detections(const std::string& sequence_id) const;
  std::vector<assignment::GtTrack> gt(const std::string& sequence_id) const;
  std::unique_ptr<FrameSource> frames(const std::string& sequence_id) const;

 private:
  fs::path dir_;
  io::Manifest manifest_;
  std::map<std::string, std::vector<io::DetectionRecord>> detections_;
  std::map<std::string, std::vector<assignment::GtTrack>> gt_;
  bool has_gt_ = false;
  std::size_t num_detections_ = 0;
  std::size_t num_gt_boxes_ = 0;
};

// Tracks keyed by sequence id.
using TrackSet = std::map<std::string, std::vector<tracking::Tracklet>>;

std::size_t count_tracks(const TrackSet& set);
std::size_t count_boxes(const TrackSet& set);

// Writes manifest.json, detections.jsonl, gt.jsonl and points/<seq>/<frame>.lpc.
sim::Scorecard simulate(const PipelineConfig& cfg, const fs::path& out_dir);

TrackSet track(const Corpus& corpus, const PipelineConfig& cfg, tracking::Mode mode);

// Records follow manifest order, then track id, then frame.
void save_tracks(const fs::path& path, const io::Manifest& manifest, const TrackSet& tracks);
TrackSet load_tracks(const fs::path& path);

TrackSet remove_empty(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg,
                      postprocess::RemovalStats* stats = nullptr);

using TrackKey = std::pair<std::string, std::uint64_t>;
// JSON list of {sequence_id, track_id, frame_index, box?}.
std::map<TrackKey, tco::BaseOverride> load_base_annotations(const fs::path& path);

struct TcoSummary {
  std::size_t tracks = 0;
  std::size_t optimized = 0;
  std::size_t nodes = 0;
  std::size_t retained_frames = 0;
  std::map<std::string, std::size_t> skipped;  // reason -> count

  std::string render_text() const;
};

TrackSet run_tco(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg,
                 const std::map<TrackKey, tco::BaseOverride>* bases = nullptr, TcoSummary* summary = nullptr);

TrackSet tta_merge(std::span<const TrackSet> variants, std::span<const std::string> tags);

struct AssignSummary {
  std::size_t tracks = 0;
  std::size_t matched = 0;
  std::size_t proposals = 0;
  std::size_t positives = 0;
};

// One JSON line per predicted track with its candidates and per-proposal targets.
AssignSummary assign(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg, const fs::path& out);

std::vector<assignment::TrackAssignment> assign_sequence(std::span<const tracking::Tracklet> tracks,
                                                         std::span<const assignment::GtTrack> gt,
                                                         const AssignmentConfig& cfg);

// Writes every track sample (and its TTA variants when `with_tta`) to one container.
std::size_t build_dataset(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg,
                          const fs::path& out, bool with_tta);

std::vector<evaluation::EvalBox> eval_boxes(const TrackSet& tracks);
std::vector<evaluation::EvalBox> eval_boxes(std::span<const io::DetectionRecord> records);
std::vector<evaluation::EvalBox> gt_eval_boxes(const Corpus& corpus);

evaluation::EvalReport evaluate(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg);

}  // namespace offtrack::pipeline
