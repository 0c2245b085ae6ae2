#include "pipeline.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace offtrack::pipeline {

using nlohmann::json;

const PointFrame* DiskFrames::frame(int frame_index) const {
  if (frame_index < 0 || static_cast<std::size_t>(frame_index) >= cache_.size()) return nullptr;
  const auto i = static_cast<std::size_t>(frame_index);
  if (cache_[i]) return cache_[i].get();
  if (missing_[i]) return nullptr;
  const fs::path path = io::point_frame_path(dir_, sequence_, frame_index);
  if (!fs::exists(path)) {
    missing_[i] = 1;
    return nullptr;
  }
  cache_[i] = std::make_unique<PointFrame>(io::read_point_frame(path, frame_index));
  return cache_[i].get();
}

Corpus Corpus::open(const fs::path& dir) {
  Corpus c;
  c.dir_ = dir;
  c.manifest_ = io::read_manifest(dir / "manifest.json");
  const auto dets = io::read_records(dir / "detections.jsonl");
  c.num_detections_ = dets.size();
  for (const auto& r : dets) {
    const auto* info = c.manifest_.find(r.sequence_id);
    if (!info) throw SchemaError("detections.jsonl: unknown sequence " + r.sequence_id);
    if (static_cast<int>(r.frame_index) >= info->num_frames()) {
      throw SchemaError("detections.jsonl: frame " + std::to_string(r.frame_index) + " beyond the end of " +
                        r.sequence_id);
    }
    c.detections_[r.sequence_id].push_back(r);
  }
  const fs::path gt_path = dir / "gt.jsonl";
  if (fs::exists(gt_path)) {
    const auto gts = io::read_records(gt_path);
    c.num_gt_boxes_ = gts.size();
    c.gt_ = io::group_gt(gts, gt_path.string());
    c.has_gt_ = true;
  }
  return c;
}

tracking::SequenceDetections Corpus::detections(const std::string& sequence_id) const {
  const auto* info = manifest_.find(sequence_id);
  if (!info) throw Error("unknown_sequence", "no sequence " + sequence_id + " in the manifest");
  auto it = detections_.find(sequence_id);
  if (it == detections_.end()) return io::sequence_detections(*info, {});
  return io::sequence_detections(*info, it->second);
}

std::vector<assignment::GtTrack> Corpus::gt(const std::string& sequence_id) const {
  auto it = gt_.find(sequence_id);
  return it == gt_.end() ? std::vector<assignment::GtTrack>{} : it->second;
}

std::unique_ptr<FrameSource> Corpus::frames(const std::string& sequence_id) const {
  const auto* info = manifest_.find(sequence_id);
  if (!info) throw Error("unknown_sequence", "no sequence " + sequence_id + " in the manifest");
  return std::make_unique<DiskFrames>(dir_, sequence_id, info->num_frames());
}

std::size_t count_tracks(const TrackSet& set) {
  std::size_t n = 0;
  for (const auto& [_, tracks] : set) n += tracks.size();
  return n;
}

std::size_t count_boxes(const TrackSet& set) {
  std::size_t n = 0;
  for (const auto& [_, tracks] : set) {
    for (const auto& t : tracks) n += t.entries.size();
  }
  return n;
}

namespace {

struct SimulatedSequence {
  io::SequenceInfo info;
  std::vector<io::DetectionRecord> detections;
  std::vector<io::DetectionRecord> gt;
  sim::Scorecard card;
};

// Sequences present in the track set, in manifest order.
std::vector<std::string> ordered_sequences(const io::Manifest& manifest, const TrackSet& tracks) {
  std::vector<std::string> out;
  for (const auto& s : manifest.sequences) {
    if (tracks.count(s.id)) out.push_back(s.id);
  }
  for (const auto& [id, _] : tracks) {
    if (!manifest.find(id)) throw SchemaError("tracks reference unknown sequence " + id);
  }
  return out;
}

// Applies fn to every sequence of the set in parallel; results keep the keys.
template <typename F>
TrackSet map_sequences(const io::Manifest& manifest, const TrackSet& tracks, int threads, F&& fn) {
  const auto ids = ordered_sequences(manifest, tracks);
  std::vector<std::vector<tracking::Tracklet>> results(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) { results[i] = fn(ids[i], tracks.at(ids[i])); });
  TrackSet out;
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = std::move(results[i]);
  return out;
}

json box_json(const Box7& b) { return json::array({b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw}); }

Box7 box_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 7) throw SchemaError(where + ": box must hold 7 numbers");
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) {
    if (!j[i].is_number()) throw SchemaError(where + ": box must hold 7 numbers");
    v[i] = j[i].get<double>();
  }
  Box7 b{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  if (!b.valid()) throw SchemaError(where + ": invalid box");
  return b;
}

}  // namespace

sim::Scorecard simulate(const PipelineConfig& cfg, const fs::path& out_dir) {
  sim::SimConfig sc = cfg.sim;
  sc.seed = cfg.seed;
  const auto n = static_cast<std::size_t>(std::max(0, sc.num_sequences));
  std::vector<SimulatedSequence> parts(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    sim::SequenceWorld world = sim::generate_sequence(sc, static_cast<int>(i));
    auto& part = parts[i];
    part.info.id = world.sequence_id;
    part.info.hz = sc.hz;
    for (const auto& fr : world.detections.frames) {
      part.info.timestamps.push_back(fr.timestamp);
      part.info.ego_poses.push_back(fr.ego_pose);
    }
    part.detections = io::detection_records(world.detections);
    part.gt = io::gt_records(part.info, world.gt);
    for (const auto& f : world.frames.frames()) {
      io::write_point_frame(io::point_frame_path(out_dir, world.sequence_id, f.frame_index), f);
    }
    part.card.add(world);
  });

  io::Manifest manifest;
  std::vector<io::DetectionRecord> dets;
  std::vector<io::DetectionRecord> gts;
  sim::Scorecard card;
  for (auto& p : parts) {
    manifest.sequences.push_back(std::move(p.info));
    dets.insert(dets.end(), p.detections.begin(), p.detections.end());
    gts.insert(gts.end(), p.gt.begin(), p.gt.end());
    card.merge(p.card);
  }
  io::write_manifest(out_dir / "manifest.json", manifest);
  io::write_records(out_dir / "detections.jsonl", dets);
  io::write_records(out_dir / "gt.jsonl", gts);
  return card;
}

TrackSet track(const Corpus& corpus, const PipelineConfig& cfg, tracking::Mode mode) {
  const auto& seqs = corpus.manifest().sequences;
  std::vector<std::vector<tracking::Tracklet>> results(seqs.size());
  parallel_for(seqs.size(), cfg.threads, [&](std::size_t i) {
    results[i] = tracking::run(corpus.detections(seqs[i].id), cfg.tracking, mode);
  });
  TrackSet out;
  for (std::size_t i = 0; i < seqs.size(); ++i) out[seqs[i].id] = std::move(results[i]);
  return out;
}

void save_tracks(const fs::path& path, const io::Manifest& manifest, const TrackSet& tracks) {
  std::vector<io::DetectionRecord> records;
  for (const auto& id : ordered_sequences(manifest, tracks)) {
    std::vector<tracking::Tracklet> sorted = tracks.at(id);
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
    auto r = io::track_records(*manifest.find(id), sorted);
    records.insert(records.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  io::write_records(path, records);
}

TrackSet load_tracks(const fs::path& path) {
  const auto records = io::read_records(path);
  return io::group_tracks(records, path.string());
}

TrackSet remove_empty(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg,
                      postprocess::RemovalStats* stats) {
  std::mutex stats_mutex;
  return map_sequences(corpus.manifest(), tracks, cfg.threads,
                       [&](const std::string& id, const std::vector<tracking::Tracklet>& seq_tracks) {
                         const auto frames = corpus.frames(id);
                         postprocess::RemovalStats local;
                         auto kept = postprocess::remove_empty(seq_tracks, *frames, &local);
                         if (stats) {
                           std::lock_guard lock(stats_mutex);
                           stats->entries_removed += local.entries_removed;
                           stats->tracks_removed += local.tracks_removed;
                         }
                         return kept;
                       });
}

std::map<TrackKey, tco::BaseOverride> load_base_annotations(const fs::path& path) {
  const std::string src = path.string();
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(src + ": " + e.what());
  }
  if (!j.is_array()) throw SchemaError(src + ": expected a list of base annotations");
  std::map<TrackKey, tco::BaseOverride> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& a = j[i];
    const std::string where = src + "[" + std::to_string(i) + "]";
    if (!a.is_object()) throw SchemaError(where + ": expected an object");
    for (const auto& [key, _] : a.items()) {
      if (key != "sequence_id" && key != "track_id" && key != "frame_index" && key != "box") {
        throw SchemaError(where + ": unknown field " + key);
      }
    }
    if (!a.contains("sequence_id") || !a["sequence_id"].is_string()) throw SchemaError(where + ": missing sequence_id");
    if (!a.contains("track_id") || !a["track_id"].is_number_unsigned()) throw SchemaError(where + ": missing track_id");
    if (!a.contains("frame_index") || !a["frame_index"].is_number_integer()) {
      throw SchemaError(where + ": missing frame_index");
    }
    tco::BaseOverride b;
    b.frame_index = a["frame_index"].get<int>();
    if (a.contains("box")) b.box = box_from_json(a["box"], where);
    TrackKey key{a["sequence_id"].get<std::string>(), a["track_id"].get<std::uint64_t>()};
    if (!out.emplace(key, b).second) throw SchemaError(where + ": duplicate annotation for the track");
  }
  return out;
}

std::string TcoSummary::render_text() const {
  std::ostringstream os;
  os << "tracks " << tracks << "\noptimized " << optimized << "\nnodes " << nodes << "\nretained_frames "
     << retained_frames << "\n";
  for (const auto& [reason, n] : skipped) os << "skipped." << reason << " " << n << "\n";
  return os.str();
}

TrackSet run_tco(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg,
                 const std::map<TrackKey, tco::BaseOverride>* bases, TcoSummary* summary) {
  std::mutex summary_mutex;
  return map_sequences(
      corpus.manifest(), tracks, cfg.threads,
      [&](const std::string& id, const std::vector<tracking::Tracklet>& seq_tracks) {
        const auto frames = corpus.frames(id);
        TcoSummary local;
        std::vector<tracking::Tracklet> out;
        out.reserve(seq_tracks.size());
        for (const auto& t : seq_tracks) {
          std::optional<tco::BaseOverride> base;
          if (bases) {
            auto it = bases->find({id, t.track_id});
            if (it != bases->end()) base = it->second;
          }
          tco::TcoResult r = tco::run_tco(t, *frames, cfg.tco, base);
          ++local.tracks;
          if (r.skipped) {
            ++local.skipped[*r.skipped];
          } else {
            ++local.optimized;
            local.nodes += r.nodes;
            local.retained_frames += r.retained;
          }
          out.push_back(std::move(r.track));
        }
        if (summary) {
          std::lock_guard lock(summary_mutex);
          summary->tracks += local.tracks;
          summary->optimized += local.optimized;
          summary->nodes += local.nodes;
          summary->retained_frames += local.retained_frames;
          for (const auto& [k, v] : local.skipped) summary->skipped[k] += v;
        }
        return out;
      });
}

TrackSet tta_merge(std::span<const TrackSet> variants, std::span<const std::string> tags) {
  if (variants.empty()) throw Error("empty_variants", "TTA merge needs at least one track set");
  if (tags.size() != variants.size()) throw Error("invalid_argument", "one tag per TTA variant is required");
  std::set<std::string> ids;
  for (const auto& v : variants) {
    for (const auto& [id, _] : v) ids.insert(id);
  }
  TrackSet out;
  for (const auto& id : ids) {
    std::vector<postprocess::TtaVariantTracks> per;
    for (std::size_t k = 0; k < variants.size(); ++k) {
      auto it = variants[k].find(id);
      per.push_back({tags[k], it == variants[k].end() ? std::vector<tracking::Tracklet>{} : it->second});
    }
    out[id] = postprocess::tta_merge(per);
  }
  return out;
}

std::vector<assignment::TrackAssignment> assign_sequence(std::span<const tracking::Tracklet> tracks,
                                                         std::span<const assignment::GtTrack> gt,
                                                         const AssignmentConfig& cfg) {
  if (cfg.method == AssignMethod::ObjectCentric) {
    return assignment::object_centric_assign(tracks, gt, cfg.object_centric);
  }
  return assignment::two_round_assign(tracks, gt, cfg.tiou_threshold);
}

AssignSummary assign(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg, const fs::path& out) {
  if (!corpus.has_gt()) throw Error("missing_gt", "assignment needs gt.jsonl in the corpus");
  const auto ids = ordered_sequences(corpus.manifest(), tracks);
  std::vector<std::string> lines(ids.size());
  std::vector<AssignSummary> sums(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t i) {
    const auto& seq_tracks = tracks.at(ids[i]);
    const auto gt = corpus.gt(ids[i]);
    const auto result = assign_sequence(seq_tracks, gt, cfg.assignment);
    std::string text;
    for (std::size_t k = 0; k < result.size(); ++k) {
      const auto& a = result[k];
      json j;
      j["sequence_id"] = ids[i];
      j["track_id"] = a.track_id;
      j["matched"] = a.matched;
      j["candidates"] = json::array();
      for (const auto& [gid, v] : a.candidates) j["candidates"].push_back({{"gt_track_id", gid}, {"tiou", v}});
      j["proposals"] = json::array();
      for (const auto& p : a.proposals) {
        json pj;
        pj["frame_index"] = p.frame_index;
        pj["gt_track_id"] = p.gt_track_id ? json(*p.gt_track_id) : json(nullptr);
        pj["iou"] = p.iou;
        pj["soft_target"] = p.soft_target;
        if (p.positive()) pj["gt_box"] = box_json(p.gt_box);
        pj["residual"] = p.residual ? json(*p.residual) : json(nullptr);
        j["proposals"].push_back(std::move(pj));
        ++sums[i].proposals;
        if (p.positive()) ++sums[i].positives;
      }
      ++sums[i].tracks;
      if (a.matched) ++sums[i].matched;
      text += j.dump() + "\n";
    }
    lines[i] = std::move(text);
  });
  std::string all;
  AssignSummary total;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    all += lines[i];
    total.tracks += sums[i].tracks;
    total.matched += sums[i].matched;
    total.proposals += sums[i].proposals;
    total.positives += sums[i].positives;
  }
  io::write_text(out, all);
  return total;
}

std::size_t build_dataset(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg,
                          const fs::path& out, bool with_tta) {
  const auto ids = ordered_sequences(corpus.manifest(), tracks);
  std::vector<std::vector<std::vector<std::uint8_t>>> encoded(ids.size());
  parallel_for(ids.size(), cfg.threads, [&](std::size_t i) {
    const auto& seq_tracks = tracks.at(ids[i]);
    const auto frames = corpus.frames(ids[i]);
    std::vector<assignment::TrackAssignment> assigned;
    if (corpus.has_gt()) assigned = assign_sequence(seq_tracks, corpus.gt(ids[i]), cfg.assignment);
    for (std::size_t k = 0; k < seq_tracks.size(); ++k) {
      const auto& t = seq_tracks[k];
      if (t.entries.empty()) continue;
      dataset::TrackSample sample = dataset::build_sample(ids[i], t, *frames, cfg.dataset.build);
      if (!assigned.empty()) dataset::attach_assignment(sample, assigned[k]);
      if (cfg.augment.enabled) sample = dataset::augment(sample, cfg.seed, cfg.augment.params);
      if (with_tta) {
        for (const auto& tf : dataset::tta_transforms(cfg.dataset.tta_rotations)) {
          encoded[i].push_back(io::encode_sample(dataset::apply_tta(sample, tf)));
        }
      } else {
        encoded[i].push_back(io::encode_sample(sample));
      }
    }
  });
  io::SampleWriter writer(out);
  for (const auto& seq : encoded) {
    for (const auto& rec : seq) writer.write_encoded(rec);
  }
  writer.close();
  return writer.count();
}

std::vector<evaluation::EvalBox> eval_boxes(const TrackSet& tracks) {
  std::vector<evaluation::EvalBox> out;
  for (const auto& [id, seq_tracks] : tracks) {
    for (const auto& t : seq_tracks) {
      for (const auto& e : t.entries) out.push_back({id, e.frame_index, t.cls, e.box, e.score, t.track_id});
    }
  }
  return out;
}

std::vector<evaluation::EvalBox> eval_boxes(std::span<const io::DetectionRecord> records) {
  std::vector<evaluation::EvalBox> out;
  out.reserve(records.size());
  // Untracked records get unique identities so tracking metrics stay defined.
  std::uint64_t next_id = 1ull << 40;
  for (const auto& r : records) {
    out.push_back({r.sequence_id, static_cast<int>(r.frame_index), r.cls, r.box, r.score,
                   r.track_id ? *r.track_id : next_id++});
  }
  return out;
}

std::vector<evaluation::EvalBox> gt_eval_boxes(const Corpus& corpus) {
  std::vector<evaluation::EvalBox> out;
  for (const auto& s : corpus.manifest().sequences) {
    for (const auto& g : corpus.gt(s.id)) {
      for (const auto& e : g.entries) out.push_back({s.id, e.frame_index, g.cls, e.box, 1.0, g.gt_track_id});
    }
  }
  return out;
}

evaluation::EvalReport evaluate(const Corpus& corpus, const TrackSet& tracks, const PipelineConfig& cfg) {
  if (!corpus.has_gt()) throw Error("missing_gt", "evaluation needs gt.jsonl in the corpus");
  return evaluation::evaluate(eval_boxes(tracks), gt_eval_boxes(corpus), cfg.evaluation);
}

}  // namespace offtrack::pipeline
