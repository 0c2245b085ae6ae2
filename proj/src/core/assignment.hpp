#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "geometry.hpp"
#include "tracking.hpp"

namespace offtrack::assignment {

struct GtEntry {
  int frame_index = 0;
  Box7 box;
  int num_points = 0;
};

struct GtTrack {
  std::uint64_t gt_track_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  std::vector<GtEntry> entries;  // strictly increasing frames, gaps allowed

  const GtEntry* find(int frame_index) const;
};

struct FrameBox {
  int frame_index = 0;
  Box7 box;
};

std::vector<FrameBox> frame_boxes(const tracking::Tracklet& track);
std::vector<FrameBox> frame_boxes(const GtTrack& track);

// Track IoU: summed per-frame iou3d over shared frames divided by the size of
// the union of frame supports. Inputs must be sorted by frame.
// Throws Error("empty_tracks") when both tracks are empty.
double tiou(std::span<const FrameBox> a, std::span<const FrameBox> b);
double tiou(const tracking::Tracklet& a, const GtTrack& b);

double soft_target(double iou);

// (dx, dy) in the proposal frame over the BEV diagonal, dz over height,
// log size ratios, wrapped yaw difference.
using Residual = std::array<double, 7>;
Residual residual_target(const Box7& proposal, const Box7& gt);
Box7 decode_residual(const Box7& proposal, const Residual& residual);

struct ProposalTarget {
  int frame_index = 0;
  std::optional<std::uint64_t> gt_track_id;  // empty => negative
  Box7 gt_box;
  double iou = 0.0;
  double soft_target = 0.0;
  std::optional<Residual> residual;

  bool positive() const { return gt_track_id.has_value(); }
};

struct TrackAssignment {
  std::uint64_t track_id = 0;
  bool matched = false;
  // Round-one candidates sorted by descending TIoU, ties by ascending id.
  std::vector<std::pair<std::uint64_t, double>> candidates;
  std::vector<ProposalTarget> proposals;  // one per track entry, same order
};

// Round one: GT tracks of the same class with TIoU strictly above the threshold
// become candidates. Round two: per frame, the box of the best-ranked candidate
// that has a box at that frame.
std::vector<TrackAssignment> two_round_assign(std::span<const tracking::Tracklet> pred_tracks,
                                              std::span<const GtTrack> gt_tracks, double tiou_threshold);

struct ObjectCentricThresholds {
  double vehicle = 0.45;
  double pedestrian = 0.35;
  double cyclist = 0.35;

  double for_class(ObjectClass cls) const;
};

// Per-frame baseline: each proposal takes the same-class GT box of max iou3d and
// is positive iff that IoU reaches the class threshold.
std::vector<TrackAssignment> object_centric_assign(std::span<const tracking::Tracklet> pred_tracks,
                                                   std::span<const GtTrack> gt_tracks,
                                                   const ObjectCentricThresholds& thresholds);

}  // namespace offtrack::assignment
