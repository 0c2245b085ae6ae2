#include "postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "error.hpp"

namespace offtrack::postprocess {

std::vector<tracking::Tracklet> remove_empty(std::span<const tracking::Tracklet> tracks, const FrameSource& frames,
                                             RemovalStats* stats) {
  RemovalStats local;
  std::vector<tracking::Tracklet> out;
  out.reserve(tracks.size());
  const Eigen::Vector3d no_margin = Eigen::Vector3d::Zero();
  for (const auto& t : tracks) {
    tracking::Tracklet kept;
    kept.track_id = t.track_id;
    kept.cls = t.cls;
    for (const auto& e : t.entries) {
      const PointFrame* frame = frames.frame(e.frame_index);
      if (frame != nullptr && count_points_in(e.box, no_margin, frame->points) > 0) {
        kept.entries.push_back(e);
      } else {
        ++local.entries_removed;
      }
    }
    if (kept.entries.empty()) {
      ++local.tracks_removed;
      continue;
    }
    out.push_back(std::move(kept));
  }
  if (stats != nullptr) *stats = local;
  return out;
}

double merge_headings(std::span<const double> yaws, std::span<const double> scores) {
  if (yaws.empty()) throw Error("empty_variants", "no headings to merge");
  const std::size_t n = yaws.size();
  auto best_of = [&](auto&& keep) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep(i)) continue;
      if (best == n || scores[i] > scores[best] || (scores[i] == scores[best] && yaws[i] < yaws[best])) best = i;
    }
    return best;
  };

  const std::size_t top = best_of([](std::size_t) { return true; });
  auto same_side = [&](std::size_t i) { return std::abs(normalize_yaw(yaws[i] - yaws[top])) <= kPi / 2.0; };
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) agree += same_side(i) ? 1 : 0;
  std::size_t ref = top;
  if (2 * agree < n) ref = best_of([&](std::size_t i) { return !same_side(i); });

  std::vector<double> offsets;
  offsets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = normalize_yaw(yaws[i] - yaws[ref]);
    if (d > kPi / 2.0) d -= kPi;
    if (d < -kPi / 2.0) d += kPi;
    offsets.push_back(d);
  }
  std::sort(offsets.begin(), offsets.end());
  const double median =
      n % 2 == 1 ? offsets[n / 2] : 0.5 * (offsets[n / 2 - 1] + offsets[n / 2]);
  return normalize_yaw(yaws[ref] + median);
}

std::vector<tracking::Tracklet> tta_merge(std::span<const TtaVariantTracks> variants) {
  if (variants.empty()) throw Error("empty_variants", "TTA merge needs at least one variant");

  struct Slot {
    std::vector<const tracking::TrackEntry*> entries;
  };
  struct TrackSlots {
    ObjectClass cls = ObjectClass::Vehicle;
    std::map<int, Slot> frames;
  };
  std::map<std::uint64_t, TrackSlots> by_track;
  for (const auto& v : variants) {
    for (const auto& t : v.tracks) {
      TrackSlots& ts = by_track.try_emplace(t.track_id, TrackSlots{t.cls, {}}).first->second;
      for (const auto& e : t.entries) ts.frames[e.frame_index].entries.push_back(&e);
    }
  }

  std::vector<tracking::Tracklet> out;
  out.reserve(by_track.size());
  for (const auto& [id, ts] : by_track) {
    tracking::Tracklet t;
    t.track_id = id;
    t.cls = ts.cls;
    for (const auto& [frame, slot] : ts.frames) {
      const auto& es = slot.entries;
      double wsum = 0.0;
      for (const auto* e : es) wsum += e->score;
      const bool uniform = !(wsum > 0.0);

      Eigen::Vector3d center = Eigen::Vector3d::Zero();
      Eigen::Vector3d size = Eigen::Vector3d::Zero();
      std::vector<double> yaws;
      std::vector<double> scores;
      double score_sum = 0.0;
      for (const auto* e : es) {
        const double w = uniform ? 1.0 / static_cast<double>(es.size()) : e->score / wsum;
        center += w * e->box.center();
        size += w * Eigen::Vector3d(e->box.l, e->box.w, e->box.h);
        yaws.push_back(e->box.yaw);
        scores.push_back(e->score);
        score_sum += e->score;
      }
      tracking::TrackEntry merged;
      merged.frame_index = frame;
      merged.box.set_center(center);
      merged.box.l = size.x();
      merged.box.w = size.y();
      merged.box.h = size.z();
      merged.box.yaw = merge_headings(yaws, scores);
      merged.score = score_sum / static_cast<double>(es.size());
      // Lowest origin code wins (Detected first) so variant order does not matter.
      merged.origin = es.front()->origin;
      for (const auto* e : es) merged.origin = std::min(merged.origin, e->origin);
      t.entries.push_back(merged);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace offtrack::postprocess
