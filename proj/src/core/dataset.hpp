#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "assignment.hpp"
#include "frames.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "tracking.hpp"

namespace offtrack::dataset {

inline constexpr std::string_view kTimestampChannel = "timestamp_code";
inline constexpr std::string_view kCurrentFrameChannel = "current_frame_flag";
inline constexpr std::string_view kSourceFrameChannel = "source_frame";
inline constexpr std::string_view kSourceIndexChannel = "source_index";

inline constexpr double kTimestampScale = 0.01;

struct Proposal {
  int frame_index = 0;
  Box7 box;
  double score = 0.0;
  tracking::Origin origin = tracking::Origin::Detected;
};

// Flip about the x axis (y -> -y), flip about the y axis (x -> -x), then a
// rotation about z. Applied about the origin of whatever frame the data is in.
struct TtaTransform {
  bool flip_x = false;
  bool flip_y = false;
  double rotation = 0.0;

  bool is_identity() const { return !flip_x && !flip_y && rotation == 0.0; }
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  Eigen::Vector3d invert(const Eigen::Vector3d& p) const;
  Box7 apply(const Box7& b) const;
  Box7 invert(const Box7& b) const;
  std::string tag() const;
};

struct TrackSample {
  std::string sequence_id;
  std::uint64_t track_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  std::vector<Proposal> proposals;  // in the sample frame
  // Sample-frame points with timestamp_code, source_frame and source_index channels.
  PointCloud points;
  RigidPose base_pose;  // world -> sample frame (first proposal's box frame)
  std::optional<assignment::TrackAssignment> assignment;  // GT boxes in the sample frame
  TtaTransform tta;

  const Proposal* proposal(int frame_index) const;
};

struct BuildConfig {
  Eigen::Vector3d expand_m{2.0, 2.0, 2.0};  // total growth per dimension, half per side
  std::size_t max_points_per_proposal = 1024;
  double object_margin_m = 0.5;
};

// Uniform selection of k of n indices without replacement, returned ascending.
std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t k, CounterRng& rng);

// Throws Error("empty_track") for a track without entries.
TrackSample build_sample(std::string_view sequence_id, const tracking::Tracklet& track, const FrameSource& frames,
                         const BuildConfig& cfg);

// Moves the assignment's GT boxes into the sample frame and stores it.
void attach_assignment(TrackSample& sample, const assignment::TrackAssignment& assignment);

// Crops the concatenated track points with the proposal at `frame_index` grown by
// `margin` on every dimension; current_frame_flag marks points from that frame.
PointCloud object_crop(const TrackSample& sample, int frame_index, double margin);

struct AugmentConfig {
  double rotation_range = 0.78;
  double flip_probability = 0.5;
  double scale_min = 0.95;
  double scale_max = 1.05;
  double vertical_shift = 0.2;
  Eigen::Vector3d jitter_center{0.2, 0.2, 0.1};  // fractions of (l, w, h)
  double jitter_lw_min = 0.8;
  double jitter_lw_max = 1.2;
  double jitter_h_min = 0.9;
  double jitter_h_max = 1.1;
  double jitter_yaw = 0.2;

  static AugmentConfig none();
};

// Track-level transform shared by points, proposals and GT boxes.
struct GlobalTransform {
  double rotation = 0.0;
  bool flip_x = false;
  bool flip_y = false;
  double scale = 1.0;
  double dz = 0.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  Box7 apply(const Box7& b) const;
};

GlobalTransform draw_global_transform(CounterRng& rng, const AugmentConfig& cfg);

// Deterministic given (seed, sequence id, track id). Targets of positive
// proposals are recomputed against the jittered proposals.
TrackSample augment(const TrackSample& sample, std::uint64_t seed, const AugmentConfig& cfg);

struct TtaVariant {
  TtaTransform transform;
  tracking::Tracklet track;
};

// The four double-flip variants (identity first), times the rotations
// {-2pi/3, 0, +2pi/3} when requested.
std::vector<TtaTransform> tta_transforms(bool with_rotations);
std::vector<TtaVariant> tta_variants(const tracking::Tracklet& track, bool with_rotations);
tracking::Tracklet apply_tta(const tracking::Tracklet& track, const TtaTransform& t);
tracking::Tracklet invert_tta(const tracking::Tracklet& track, const TtaTransform& t);
TrackSample apply_tta(const TrackSample& sample, const TtaTransform& t);

}  // namespace offtrack::dataset
