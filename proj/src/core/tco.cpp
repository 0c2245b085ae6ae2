#include "tco.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "error.hpp"
#include "kdtree.hpp"

namespace offtrack::tco {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

double increment_norm(const RigidPose& delta) {
  const double c = std::clamp((delta.rotation().trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::acos(c);
  return std::sqrt(angle * angle + delta.translation().squaredNorm());
}

RigidPose exp_increment(const Eigen::Matrix<double, 6, 1>& xi) {
  const Eigen::Vector3d w = xi.head<3>();
  const double angle = w.norm();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  if (angle > 0.0) r = Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
  return RigidPose(r, xi.tail<3>());
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> match_pairs(const PointCloud& source, const RigidPose& t,
                                                                 const KdTree& target_tree, double max_dist) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  const auto& src = source.positions();
  for (std::size_t a = 0; a < src.size(); ++a) {
    const auto hit = target_tree.nearest_within(t.apply(src[a]), max_dist);
    if (hit.found()) pairs.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(hit.index));
  }
  return pairs;
}

double mean_nn_distance(const std::vector<Eigen::Vector3d>& from, const KdTree& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += std::sqrt(to.nearest(p).squared_distance);
  return sum / static_cast<double>(from.size());
}

double chamfer_posed(const ShapeNode& a, const RigidPose& ma, const ShapeNode& b, const RigidPose& mb) {
  return chamfer(apply_pose(ma, a.points), apply_pose(mb, b.points));
}

}  // namespace

RigidPose fit_rigid(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  const std::size_t n = src.size();
  Eigen::Vector3d cs = Eigen::Vector3d::Zero();
  Eigen::Vector3d cd = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(n);
  cd /= static_cast<double>(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();
  return RigidPose(r, cd - r * cs);
}

IcpResult icp_p2p(const PointCloud& source, const PointCloud& target, const IcpOptions& options,
                  const RigidPose& initial) {
  if (source.empty() || target.empty()) throw Error("empty_cloud", "ICP needs two non-empty clouds");
  const KdTree tree(target.positions());
  const auto& src = source.positions();
  const auto& tgt = target.positions();

  IcpResult result;
  result.transform = initial;
  std::vector<Eigen::Vector3d> moved;
  std::vector<Eigen::Vector3d> matched;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const auto pairs = match_pairs(source, result.transform, tree, options.max_correspondence);
    if (pairs.empty()) {
      if (iter == 0) throw Error("no_overlap", "no correspondences within the maximum distance");
      break;
    }
    moved.clear();
    matched.clear();
    for (const auto& [a, b] : pairs) {
      moved.push_back(result.transform.apply(src[a]));
      matched.push_back(tgt[b]);
    }
    result.correspondences = pairs.size();
    if (pairs.size() < 3) break;

    const RigidPose delta = fit_rigid(moved, matched);
    result.transform = delta * result.transform;
    result.transform.renormalize();
    result.iterations = iter + 1;

    double sq = 0.0;
    for (std::size_t k = 0; k < moved.size(); ++k) sq += (delta.apply(moved[k]) - matched[k]).squaredNorm();
    result.rmse = std::sqrt(sq / static_cast<double>(moved.size()));

    if (increment_norm(delta) < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error("empty_cloud", "Chamfer distance needs two non-empty clouds");
  const KdTree ta(a.positions());
  const KdTree tb(b.positions());
  return mean_nn_distance(a.positions(), tb) + mean_nn_distance(b.positions(), ta);
}

tracking::Tracklet align_sizes(const tracking::Tracklet& track, std::size_t base_idx) {
  if (base_idx >= track.entries.size()) throw Error("invalid_base", "base index outside the track");
  tracking::Tracklet out = track;
  const Box7 base = track.entries[base_idx].box;
  for (auto& e : out.entries) {
    e.box.l = base.l;
    e.box.w = base.w;
    e.box.h = base.h;
  }
  return out;
}

std::vector<ShapeNode> extract_shapes(const tracking::Tracklet& track, const FrameSource& frames,
                                      const TcoConfig& cfg) {
  std::vector<ShapeNode> nodes;
  const Eigen::Vector3d margin(0.0, 0.0, cfg.height_expand_m);
  for (std::size_t i = 0; i < track.entries.size(); ++i) {
    const auto& e = track.entries[i];
    const PointFrame* frame = frames.frame(e.frame_index);
    if (frame == nullptr) continue;
    PointCloud crop = crop_points(e.box, margin, frame->points);
    if (crop.size() <= cfg.min_points) continue;
    ShapeNode node;
    node.frame_index = e.frame_index;
    node.entry_index = i;
    node.points = apply_pose(to_canonical(e.box), crop);
    nodes.push_back(std::move(node));
  }
  if (nodes.size() < 2) {
    throw Error("insufficient_shapes", "track " + std::to_string(track.track_id) + " has " +
                                           std::to_string(nodes.size()) + " usable shapes");
  }
  return nodes;
}

PoseGraph build_pose_graph(std::span<const ShapeNode> nodes, std::size_t base, const TcoConfig& cfg) {
  PoseGraph graph;
  graph.base = base;
  const std::size_t k = static_cast<std::size_t>(std::max(cfg.window_k, 1));
  std::vector<KdTree> trees;
  trees.reserve(nodes.size());
  for (const auto& n : nodes) trees.emplace_back(n.points.positions());

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size() && j <= i + k; ++j) {
      PoseGraphEdge edge;
      edge.i = i;
      edge.j = j;
      try {
        edge.transform = icp_p2p(nodes[i].points, nodes[j].points, cfg.icp).transform;
      } catch (const Error& e) {
        if (e.code() == "no_overlap") continue;
        throw;
      }
      edge.correspondences = match_pairs(nodes[i].points, edge.transform, trees[j], cfg.icp.max_correspondence);
      if (edge.correspondences.empty()) continue;
      graph.edges.push_back(std::move(edge));
    }
  }
  return graph;
}

double pose_graph_objective(std::span<const ShapeNode> nodes, const PoseGraph& graph,
                            std::span<const RigidPose> poses) {
  double total = 0.0;
  for (const auto& e : graph.edges) {
    const auto& pi = nodes[e.i].points.positions();
    const auto& pj = nodes[e.j].points.positions();
    for (const auto& [a, b] : e.correspondences) {
      total += (poses[e.i].apply(pi[a]) - poses[e.j].apply(pj[b])).squaredNorm();
    }
  }
  return total;
}

std::vector<RigidPose> optimize_pose_graph(std::span<const ShapeNode> nodes, const PoseGraph& graph,
                                           const TcoConfig& cfg) {
  const std::size_t n = nodes.size();
  std::vector<RigidPose> poses;
  poses.reserve(n);
  for (const auto& node : nodes) poses.push_back(node.pose);
  if (n < 2) return poses;
  poses[graph.base] = RigidPose::identity();

  // Component containing the base.
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : graph.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<char> reach(n, 0);
  std::queue<std::size_t> bfs;
  bfs.push(graph.base);
  reach[graph.base] = 1;
  while (!bfs.empty()) {
    const std::size_t u = bfs.front();
    bfs.pop();
    for (std::size_t v : adj[u]) {
      if (!reach[v]) {
        reach[v] = 1;
        bfs.push(v);
      }
    }
  }

  // Variable slots for the free nodes.
  std::vector<int> slot(n, -1);
  int num_free = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (reach[i] && i != graph.base) slot[i] = num_free++;
  }
  if (num_free == 0) return poses;
  const int dim = 6 * num_free;

  for (int iter = 0; iter < cfg.graph_iterations; ++iter) {
    // Dense 6x6 blocks accumulated per node pair, then assembled sparse.
    std::vector<Eigen::Matrix<double, 6, 6>> diag(static_cast<std::size_t>(num_free),
                                                  Eigen::Matrix<double, 6, 6>::Zero());
    std::vector<std::tuple<int, int, Eigen::Matrix<double, 6, 6>>> off;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);

    for (const auto& e : graph.edges) {
      if (!reach[e.i]) continue;
      const int si = slot[e.i];
      const int sj = slot[e.j];
      const auto& pi = nodes[e.i].points.positions();
      const auto& pj = nodes[e.j].points.positions();
      Eigen::Matrix<double, 6, 6> hii = Eigen::Matrix<double, 6, 6>::Zero();
      Eigen::Matrix<double, 6, 6> hjj = Eigen::Matrix<double, 6, 6>::Zero();
      Eigen::Matrix<double, 6, 6> hij = Eigen::Matrix<double, 6, 6>::Zero();
      Eigen::Matrix<double, 6, 1> gi = Eigen::Matrix<double, 6, 1>::Zero();
      Eigen::Matrix<double, 6, 1> gj = Eigen::Matrix<double, 6, 1>::Zero();
      for (const auto& [a, b] : e.correspondences) {
        const Eigen::Vector3d x = poses[e.i].apply(pi[a]);
        const Eigen::Vector3d y = poses[e.j].apply(pj[b]);
        const Eigen::Vector3d r = x - y;
        // Left perturbation: d(exp(xi) M p) = -[Mp]x w + tau.
        Eigen::Matrix<double, 3, 6> ji;
        ji << -skew(x), Eigen::Matrix3d::Identity();
        Eigen::Matrix<double, 3, 6> jj;
        jj << skew(y), -Eigen::Matrix3d::Identity();
        hii.noalias() += ji.transpose() * ji;
        hjj.noalias() += jj.transpose() * jj;
        hij.noalias() += ji.transpose() * jj;
        gi.noalias() += ji.transpose() * r;
        gj.noalias() += jj.transpose() * r;
      }
      if (si >= 0) {
        diag[static_cast<std::size_t>(si)] += hii;
        g.segment<6>(6 * si) += gi;
      }
      if (sj >= 0) {
        diag[static_cast<std::size_t>(sj)] += hjj;
        g.segment<6>(6 * sj) += gj;
      }
      if (si >= 0 && sj >= 0) off.emplace_back(si, sj, hij);
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(num_free) * 36 + off.size() * 72);
    for (int s = 0; s < num_free; ++s) {
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
          // Tiny damping keeps degenerate directions (e.g. rotation about a
          // symmetry axis) solvable without moving well-determined ones.
          const double v = diag[static_cast<std::size_t>(s)](r, c) + (r == c ? 1e-9 : 0.0);
          trip.emplace_back(6 * s + r, 6 * s + c, v);
        }
      }
    }
    for (const auto& [si, sj, h] : off) {
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
          trip.emplace_back(6 * si + r, 6 * sj + c, h(r, c));
          trip.emplace_back(6 * sj + c, 6 * si + r, h(r, c));
        }
      }
    }
    Eigen::SparseMatrix<double> h(dim, dim);
    h.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(h);
    if (solver.info() != Eigen::Success) break;
    const Eigen::VectorXd delta = solver.solve(-g);
    if (solver.info() != Eigen::Success || !delta.allFinite()) break;

    double max_step = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (slot[i] < 0) continue;
      const Eigen::Matrix<double, 6, 1> xi = delta.segment<6>(6 * slot[i]);
      poses[i] = exp_increment(xi) * poses[i];
      poses[i].renormalize();
      max_step = std::max(max_step, xi.norm());
    }
    if (max_step < cfg.graph_tolerance) break;
  }
  return poses;
}

std::vector<RigidPose> optimize_pose_graph(std::span<const ShapeNode> nodes, std::size_t base, const TcoConfig& cfg) {
  const PoseGraph graph = build_pose_graph(nodes, base, cfg);
  return optimize_pose_graph(nodes, graph, cfg);
}

GateResult gate_and_apply(const tracking::Tracklet& track, std::span<const ShapeNode> nodes,
                          std::span<const RigidPose> optimized) {
  GateResult out;
  out.track = track;
  const std::size_t n = nodes.size();
  out.quality.resize(n);
  out.retained.assign(n, false);
  const RigidPose identity;

  for (std::size_t i = 0; i < n; ++i) {
    double before = 0.0;
    double after = 0.0;
    int neighbors = 0;
    for (std::size_t j : {i - 1, i + 1}) {
      if (j >= n) continue;  // wraps for i == 0
      before += chamfer_posed(nodes[i], identity, nodes[j], identity);
      after += chamfer_posed(nodes[i], optimized[i], nodes[j], optimized[j]);
      ++neighbors;
    }
    PoseQuality& q = out.quality[i];
    q.q_before = neighbors > 0 ? before / neighbors : 0.0;
    q.q_after = neighbors > 0 ? after / neighbors : 0.0;
    q.delta = q.q_before - q.q_after;
    if (!(q.delta > 0.0)) continue;

    out.retained[i] = true;
    tracking::TrackEntry& e = out.track.entries[nodes[i].entry_index];
    const RigidPose corrected = box_pose(e.box) * optimized[i].inverse();
    e.box.set_center(corrected.translation());
    e.box.yaw = normalize_yaw(corrected.yaw());
  }
  return out;
}

TcoResult run_tco(const tracking::Tracklet& track, const FrameSource& frames, const TcoConfig& cfg,
                  const std::optional<BaseOverride>& base) {
  TcoResult result;
  result.track = track;
  if (track.entries.empty()) {
    result.skipped = "empty_track";
    return result;
  }
  if (track.cls == ObjectClass::Pedestrian && !cfg.allow_pedestrian) {
    result.skipped = "non_rigid_class";
    return result;
  }

  tracking::Tracklet working = track;
  std::size_t base_idx = 0;
  const Eigen::Vector3d margin(0.0, 0.0, cfg.height_expand_m);
  if (base) {
    auto it = std::find_if(working.entries.begin(), working.entries.end(),
                           [&](const tracking::TrackEntry& e) { return e.frame_index == base->frame_index; });
    if (it == working.entries.end()) {
      result.skipped = "base_frame_not_in_track";
      return result;
    }
    base_idx = static_cast<std::size_t>(it - working.entries.begin());
    if (base->box) it->box = *base->box;
  } else {
    std::size_t best = 0;
    bool found = false;
    for (std::size_t i = 0; i < working.entries.size(); ++i) {
      const auto& e = working.entries[i];
      if (e.origin != tracking::Origin::Detected) continue;
      const PointFrame* frame = frames.frame(e.frame_index);
      const std::size_t count = frame != nullptr ? count_points_in(e.box, margin, frame->points) : 0;
      if (!found || count > best) {
        best = count;
        base_idx = i;
        found = true;
      }
    }
  }
  result.base_frame = working.entries[base_idx].frame_index;
  working = align_sizes(working, base_idx);

  std::vector<ShapeNode> nodes;
  try {
    nodes = extract_shapes(working, frames, cfg);
  } catch (const Error& e) {
    if (e.code() != "insufficient_shapes") throw;
    result.skipped = e.code();
    return result;
  }
  result.nodes = nodes.size();
  auto base_node = std::find_if(nodes.begin(), nodes.end(),
                                [&](const ShapeNode& nd) { return nd.frame_index == result.base_frame; });
  if (base_node == nodes.end()) {
    result.skipped = "base_frame_without_shape";
    return result;
  }

  const std::size_t base_pos = static_cast<std::size_t>(base_node - nodes.begin());
  const std::vector<RigidPose> poses = optimize_pose_graph(nodes, base_pos, cfg);
  GateResult gated = gate_and_apply(working, nodes, poses);
  result.track = std::move(gated.track);
  result.quality = std::move(gated.quality);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (gated.retained[i]) {
      ++result.retained;
      result.retained_frames.push_back(nodes[i].frame_index);
    }
  }
  return result;
}

}  // namespace offtrack::tco
