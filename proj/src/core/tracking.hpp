#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "geometry.hpp"

namespace offtrack::tracking {

enum class Origin : std::uint8_t { Detected = 0, Filled = 1, ForwardExt = 2, BackwardExt = 3 };

std::string_view to_string(Origin origin);
std::optional<Origin> parse_origin(std::string_view name);

struct TrackEntry {
  int frame_index = 0;
  Box7 box;
  double score = 0.0;
  Origin origin = Origin::Detected;

  friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

struct Tracklet {
  std::uint64_t track_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  std::vector<TrackEntry> entries;  // strictly increasing frame_index

  int first_frame() const { return entries.front().frame_index; }
  int last_frame() const { return entries.back().frame_index; }
  // Frames from first to last Detected entry, inclusive; 0 when never detected.
  int detected_span() const;
  const TrackEntry* find(int frame_index) const;
  bool gap_free() const;

  friend bool operator==(const Tracklet&, const Tracklet&) = default;
};

struct FrameDetections {
  int frame_index = 0;
  double timestamp = 0.0;
  RigidPose ego_pose;
  std::vector<LabeledBox> detections;
};

struct SequenceDetections {
  std::string sequence_id;
  std::vector<FrameDetections> frames;  // ordered by frame_index, timestamps increasing

  int last_frame() const { return frames.empty() ? -1 : frames.back().frame_index; }
  const FrameDetections* frame(int frame_index) const;
};

// Standard deviations; the filter squares them.
struct NoiseSigmas {
  double position = 0.05;
  double yaw = 0.05;
  double size = 0.01;
  double velocity = 0.1;
};

struct TrackerConfig {
  double gate_iou = 0.1;
  int long_track_frames = 100;
  int short_ext_frames = 20;
  double perception_radius_m = 85.0;
  NoiseSigmas process{0.05, 0.05, 0.01, 0.1};
  NoiseSigmas measurement{0.1, 0.1, 0.05, 0.0};
  // Cold-start covariance = init_cov_scale * measurement noise on observed components.
  double init_cov_scale = 10.0;
  double init_velocity_sigma = 1.0;
  double ext_score_decay = 0.5;
};

using StateVector = Eigen::Matrix<double, 10, 1>;
using StateMatrix = Eigen::Matrix<double, 10, 10>;

// Constant-velocity state: (cx, cy, cz, yaw, l, w, h, vx, vy, vz); velocities in m/frame.
struct KalmanState {
  StateVector mean = StateVector::Zero();
  StateMatrix cov = StateMatrix::Identity();

  static KalmanState from_box(const Box7& box, const TrackerConfig& cfg);
  Box7 box() const;
};

KalmanState kf_predict(const KalmanState& state, const TrackerConfig& cfg);
// Throws Error("degenerate_innovation") when the innovation covariance is not SPD.
KalmanState kf_update(const KalmanState& state, const Box7& obs, const TrackerConfig& cfg);

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

// Optimal assignment minimizing sum(1 - iou3d); pairs below `gate` are dropped afterwards.
Association associate(std::span<const Box7> predicted, std::span<const Box7> detections, double gate);

// Forward pass with immortal lifecycle and forward extension. Track ids start at 1
// and follow spawn order.
std::vector<Tracklet> run_forward(const SequenceDetections& seq, const TrackerConfig& cfg);

// Reverse-time filter over the track's detections, then prepends BackwardExt entries.
Tracklet backtrace_extend(const Tracklet& track, const SequenceDetections& seq, const TrackerConfig& cfg);

std::vector<Tracklet> run_bidirectional(const SequenceDetections& seq, const TrackerConfig& cfg);

// Forward association only, emitting Detected entries; the no-extension baseline.
std::vector<Tracklet> run_detections_only(const SequenceDetections& seq, const TrackerConfig& cfg);

enum class Mode { None, Forward, Bidirectional };
std::vector<Tracklet> run(const SequenceDetections& seq, const TrackerConfig& cfg, Mode mode);

}  // namespace offtrack::tracking
