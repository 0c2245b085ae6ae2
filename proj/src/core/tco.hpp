#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "frames.hpp"
#include "geometry.hpp"
#include "tracking.hpp"

// Track coherence optimization: register the object shapes of one track to a
// base frame with a sparse pose graph, keep the poses that improve neighbor
// Chamfer distance, and move the boxes accordingly.
namespace offtrack::tco {

struct IcpOptions {
  double max_correspondence = 2.0;
  int max_iterations = 50;
  double tolerance = 1e-6;  // on the norm of the per-iteration pose increment
};

struct TcoConfig {
  double height_expand_m = 1.0;
  std::size_t min_points = 60;  // frames need strictly more cropped points
  int window_k = 10;
  IcpOptions icp;
  int graph_iterations = 10;
  double graph_tolerance = 1e-6;
  bool allow_pedestrian = false;
};

struct ShapeNode {
  int frame_index = 0;
  std::size_t entry_index = 0;  // position in the track's entry list
  PointCloud points;            // canonical box coordinates
  RigidPose pose;               // into the base shape frame
};

struct PoseGraphEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  RigidPose transform;  // aligns node i's shape to node j's
  std::vector<std::pair<std::uint32_t, std::uint32_t>> correspondences;
};

struct PoseGraph {
  std::vector<PoseGraphEdge> edges;
  std::size_t base = 0;
};

struct PoseQuality {
  double q_before = 0.0;
  double q_after = 0.0;
  double delta = 0.0;
};

struct IcpResult {
  RigidPose transform;
  int iterations = 0;
  std::size_t correspondences = 0;
  double rmse = 0.0;
  bool converged = false;
};

// Closed-form least-squares rigid fit mapping src onto dst (SVD of the
// cross-covariance).
RigidPose fit_rigid(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst);

// Point-to-point ICP aligning `source` to `target`; returns the cumulative transform.
// Throws Error("no_overlap") when no correspondence exists at the start.
IcpResult icp_p2p(const PointCloud& source, const PointCloud& target, const IcpOptions& options,
                  const RigidPose& initial = RigidPose::identity());

// Mean nearest-neighbor distance both ways. Throws Error("empty_cloud").
double chamfer(const PointCloud& a, const PointCloud& b);

tracking::Tracklet align_sizes(const tracking::Tracklet& track, std::size_t base_idx);

// Throws Error("insufficient_shapes") when fewer than two frames qualify.
std::vector<ShapeNode> extract_shapes(const tracking::Tracklet& track, const FrameSource& frames,
                                      const TcoConfig& cfg);

// Edges between nodes at most k apart in node order, ICP-estimated.
PoseGraph build_pose_graph(std::span<const ShapeNode> nodes, std::size_t base, const TcoConfig& cfg);

// Sum over edges and correspondences of |M_i p - M_j q|^2.
double pose_graph_objective(std::span<const ShapeNode> nodes, const PoseGraph& graph,
                            std::span<const RigidPose> poses);

// Gauss-Newton on the objective above with the base pose held at identity. Nodes
// not connected to the base keep their initial pose.
std::vector<RigidPose> optimize_pose_graph(std::span<const ShapeNode> nodes, const PoseGraph& graph,
                                           const TcoConfig& cfg);

// Builds the graph and optimizes it in one go.
std::vector<RigidPose> optimize_pose_graph(std::span<const ShapeNode> nodes, std::size_t base, const TcoConfig& cfg);

struct GateResult {
  tracking::Tracklet track;
  std::vector<PoseQuality> quality;  // per node
  std::vector<bool> retained;        // per node
};

GateResult gate_and_apply(const tracking::Tracklet& track, std::span<const ShapeNode> nodes,
                          std::span<const RigidPose> optimized);

struct BaseOverride {
  int frame_index = 0;
  std::optional<Box7> box;  // replaces the track's box at that frame when given
};

struct TcoResult {
  tracking::Tracklet track;
  std::size_t nodes = 0;
  std::size_t retained = 0;
  int base_frame = -1;
  std::optional<std::string> skipped;  // reason code when the track was left untouched
  std::vector<PoseQuality> quality;
  std::vector<int> retained_frames;
};

TcoResult run_tco(const tracking::Tracklet& track, const FrameSource& frames, const TcoConfig& cfg,
                  const std::optional<BaseOverride>& base = std::nullopt);

}  // namespace offtrack::tco
