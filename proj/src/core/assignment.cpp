#include "assignment.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace offtrack::assignment {

namespace {

ProposalTarget negative(int frame_index) {
  ProposalTarget t;
  t.frame_index = frame_index;
  return t;
}

ProposalTarget positive(int frame_index, std::uint64_t gt_id, const Box7& proposal, const Box7& gt) {
  ProposalTarget t;
  t.frame_index = frame_index;
  t.gt_track_id = gt_id;
  t.gt_box = gt;
  t.iou = iou3d(proposal, gt);
  t.soft_target = soft_target(t.iou);
  t.residual = residual_target(proposal, gt);
  return t;
}

}  // namespace

const GtEntry* GtTrack::find(int frame_index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), frame_index,
                             [](const GtEntry& e, int f) { return e.frame_index < f; });
  return it != entries.end() && it->frame_index == frame_index ? &*it : nullptr;
}

std::vector<FrameBox> frame_boxes(const tracking::Tracklet& track) {
  std::vector<FrameBox> out;
  out.reserve(track.entries.size());
  for (const auto& e : track.entries) out.push_back({e.frame_index, e.box});
  return out;
}

std::vector<FrameBox> frame_boxes(const GtTrack& track) {
  std::vector<FrameBox> out;
  out.reserve(track.entries.size());
  for (const auto& e : track.entries) out.push_back({e.frame_index, e.box});
  return out;
}

double tiou(std::span<const FrameBox> a, std::span<const FrameBox> b) {
  if (a.empty() && b.empty()) throw Error("empty_tracks", "TIoU of two empty tracks is undefined");
  double sum = 0.0;
  std::size_t uni = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    ++uni;
    if (j == b.size() || (i < a.size() && a[i].frame_index < b[j].frame_index)) {
      ++i;
    } else if (i == a.size() || b[j].frame_index < a[i].frame_index) {
      ++j;
    } else {
      sum += iou3d(a[i].box, b[j].box);
      ++i;
      ++j;
    }
  }
  return sum / static_cast<double>(uni);
}

double tiou(const tracking::Tracklet& a, const GtTrack& b) {
  const auto fa = frame_boxes(a);
  const auto fb = frame_boxes(b);
  return tiou(fa, fb);
}

double soft_target(double iou) { return std::min(1.0, std::max(0.0, 2.0 * iou - 0.5)); }

Residual residual_target(const Box7& p, const Box7& g) {
  const double diag = std::hypot(p.l, p.w);
  const double c = std::cos(p.yaw);
  const double s = std::sin(p.yaw);
  const double dx = g.cx - p.cx;
  const double dy = g.cy - p.cy;
  return {(c * dx + s * dy) / diag,
          (-s * dx + c * dy) / diag,
          (g.cz - p.cz) / p.h,
          std::log(g.l / p.l),
          std::log(g.w / p.w),
          std::log(g.h / p.h),
          normalize_yaw(g.yaw - p.yaw)};
}

Box7 decode_residual(const Box7& p, const Residual& r) {
  const double diag = std::hypot(p.l, p.w);
  const double c = std::cos(p.yaw);
  const double s = std::sin(p.yaw);
  const double lx = r[0] * diag;
  const double ly = r[1] * diag;
  Box7 g;
  g.cx = p.cx + c * lx - s * ly;
  g.cy = p.cy + s * lx + c * ly;
  g.cz = p.cz + r[2] * p.h;
  g.l = p.l * std::exp(r[3]);
  g.w = p.w * std::exp(r[4]);
  g.h = p.h * std::exp(r[5]);
  g.yaw = normalize_yaw(p.yaw + r[6]);
  return g;
}

std::vector<TrackAssignment> two_round_assign(std::span<const tracking::Tracklet> pred_tracks,
                                              std::span<const GtTrack> gt_tracks, double tiou_threshold) {
  std::vector<std::vector<FrameBox>> gt_boxes;
  gt_boxes.reserve(gt_tracks.size());
  for (const auto& g : gt_tracks) gt_boxes.push_back(frame_boxes(g));

  std::vector<TrackAssignment> out;
  out.reserve(pred_tracks.size());
  for (const auto& track : pred_tracks) {
    TrackAssignment ta;
    ta.track_id = track.track_id;
    const auto pred_boxes = frame_boxes(track);

    // Round one: track-level candidates.
    std::vector<std::pair<double, std::size_t>> ranked;  // (tiou, gt index)
    for (std::size_t g = 0; g < gt_tracks.size(); ++g) {
      if (gt_tracks[g].cls != track.cls) continue;
      if (pred_boxes.empty() && gt_boxes[g].empty()) continue;
      const double t = tiou(pred_boxes, gt_boxes[g]);
      if (t > tiou_threshold) ranked.emplace_back(t, g);
    }
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return gt_tracks[a.second].gt_track_id < gt_tracks[b.second].gt_track_id;
    });
    for (const auto& [t, g] : ranked) ta.candidates.emplace_back(gt_tracks[g].gt_track_id, t);
    ta.matched = !ranked.empty();

    // Round two: frame-level boxes from the best candidate present at each frame.
    ta.proposals.reserve(track.entries.size());
    for (const auto& e : track.entries) {
      const GtEntry* chosen = nullptr;
      std::uint64_t chosen_id = 0;
      for (const auto& [t, g] : ranked) {
        if (const GtEntry* ge = gt_tracks[g].find(e.frame_index)) {
          chosen = ge;
          chosen_id = gt_tracks[g].gt_track_id;
          break;
        }
      }
      ta.proposals.push_back(chosen != nullptr ? positive(e.frame_index, chosen_id, e.box, chosen->box)
                                               : negative(e.frame_index));
    }
    out.push_back(std::move(ta));
  }
  return out;
}

double ObjectCentricThresholds::for_class(ObjectClass cls) const {
  switch (cls) {
    case ObjectClass::Vehicle:
      return vehicle;
    case ObjectClass::Pedestrian:
      return pedestrian;
    case ObjectClass::Cyclist:
      return cyclist;
  }
  return vehicle;
}

std::vector<TrackAssignment> object_centric_assign(std::span<const tracking::Tracklet> pred_tracks,
                                                   std::span<const GtTrack> gt_tracks,
                                                   const ObjectCentricThresholds& thresholds) {
  std::vector<TrackAssignment> out;
  out.reserve(pred_tracks.size());
  for (const auto& track : pred_tracks) {
    TrackAssignment ta;
    ta.track_id = track.track_id;
    const double thr = thresholds.for_class(track.cls);
    for (const auto& e : track.entries) {
      double best = -1.0;
      const GtTrack* best_track = nullptr;
      const GtEntry* best_entry = nullptr;
      for (const auto& g : gt_tracks) {
        if (g.cls != track.cls) continue;
        const GtEntry* ge = g.find(e.frame_index);
        if (ge == nullptr) continue;
        const double v = iou3d(e.box, ge->box);
        if (v > best) {
          best = v;
          best_track = &g;
          best_entry = ge;
        }
      }
      if (best_entry != nullptr && best >= thr) {
        ta.proposals.push_back(positive(e.frame_index, best_track->gt_track_id, e.box, best_entry->box));
        ta.matched = true;
      } else {
        ta.proposals.push_back(negative(e.frame_index));
      }
    }
    out.push_back(std::move(ta));
  }
  return out;
}

}  // namespace offtrack::assignment
