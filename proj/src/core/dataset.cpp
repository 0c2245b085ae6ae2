#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "error.hpp"

namespace offtrack::dataset {

namespace {

Eigen::Vector3d rotate_z(const Eigen::Vector3d& p, double angle) {
  if (angle == 0.0) return p;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z()};
}

double flip_yaw(double yaw, bool flip_x, bool flip_y) {
  if (flip_x) yaw = -yaw;
  if (flip_y) yaw = kPi - yaw;
  return yaw;
}

void transform_assignment_boxes(assignment::TrackAssignment& a, const auto& box_fn) {
  for (auto& p : a.proposals) {
    if (p.positive()) p.gt_box = box_fn(p.gt_box);
  }
}

}  // namespace

Eigen::Vector3d TtaTransform::apply(const Eigen::Vector3d& p) const {
  Eigen::Vector3d q = p;
  if (flip_x) q.y() = -q.y();
  if (flip_y) q.x() = -q.x();
  return rotate_z(q, rotation);
}

Eigen::Vector3d TtaTransform::invert(const Eigen::Vector3d& p) const {
  Eigen::Vector3d q = rotate_z(p, -rotation);
  if (flip_y) q.x() = -q.x();
  if (flip_x) q.y() = -q.y();
  return q;
}

Box7 TtaTransform::apply(const Box7& b) const {
  Box7 out = b;
  out.set_center(apply(b.center()));
  out.yaw = normalize_yaw(flip_yaw(b.yaw, flip_x, flip_y) + rotation);
  return out;
}

Box7 TtaTransform::invert(const Box7& b) const {
  Box7 out = b;
  out.set_center(invert(b.center()));
  out.yaw = normalize_yaw(flip_yaw(b.yaw - rotation, flip_x, flip_y));
  return out;
}

std::string TtaTransform::tag() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "fx%d_fy%d_r%+.4f", flip_x ? 1 : 0, flip_y ? 1 : 0, rotation);
  return buf;
}

const Proposal* TrackSample::proposal(int frame_index) const {
  for (const auto& p : proposals) {
    if (p.frame_index == frame_index) return &p;
  }
  return nullptr;
}

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t k, CounterRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k >= n) return idx;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TrackSample build_sample(std::string_view sequence_id, const tracking::Tracklet& track, const FrameSource& frames,
                         const BuildConfig& cfg) {
  if (track.entries.empty()) {
    throw Error("empty_track", "track " + std::to_string(track.track_id) + " has no proposals");
  }
  TrackSample sample;
  sample.sequence_id = std::string(sequence_id);
  sample.track_id = track.track_id;
  sample.cls = track.cls;
  sample.base_pose = to_canonical(track.entries.front().box);

  PointCloud& pts = sample.points;
  pts.add_channel(std::string(kTimestampChannel));
  pts.add_channel(std::string(kSourceFrameChannel));
  pts.add_channel(std::string(kSourceIndexChannel));

  const std::uint64_t seq_key = hash_string(sequence_id);
  for (const auto& e : track.entries) {
    sample.proposals.push_back({e.frame_index, apply_pose(sample.base_pose, e.box), e.score, e.origin});
    const PointFrame* frame = frames.frame(e.frame_index);
    if (frame == nullptr) continue;

    std::vector<std::size_t> idx = crop_indices(e.box, cfg.expand_m, frame->points);
    if (idx.size() > cfg.max_points_per_proposal) {
      CounterRng rng = CounterRng::keyed(seq_key, track.track_id, static_cast<std::uint64_t>(e.frame_index));
      const auto pick = downsample_indices(idx.size(), cfg.max_points_per_proposal, rng);
      std::vector<std::size_t> kept;
      kept.reserve(pick.size());
      for (std::size_t p : pick) kept.push_back(idx[p]);
      idx = std::move(kept);
    }
    const double code = kTimestampScale * static_cast<double>(e.frame_index);
    for (std::size_t i : idx) {
      pts.push_back(sample.base_pose.apply(frame->points.positions()[i]), frame->points.intensity()[i]);
      pts.channel(kTimestampChannel).back() = code;
      pts.channel(kSourceFrameChannel).back() = e.frame_index;
      pts.channel(kSourceIndexChannel).back() = static_cast<double>(i);
    }
  }
  return sample;
}

void attach_assignment(TrackSample& sample, const assignment::TrackAssignment& a) {
  assignment::TrackAssignment local = a;
  transform_assignment_boxes(local, [&](const Box7& b) { return apply_pose(sample.base_pose, b); });
  sample.assignment = std::move(local);
}

PointCloud object_crop(const TrackSample& sample, int frame_index, double margin) {
  const Proposal* p = sample.proposal(frame_index);
  if (p == nullptr) {
    throw Error("missing_frame", "frame " + std::to_string(frame_index) + " is not in the sample");
  }
  const auto idx = crop_indices(p->box, Eigen::Vector3d::Constant(margin), sample.points);
  PointCloud out = sample.points.select(idx);
  auto& flag = out.add_channel(std::string(kCurrentFrameChannel));
  const auto& src = out.channel(kSourceFrameChannel);
  for (std::size_t i = 0; i < out.size(); ++i) flag[i] = src[i] == frame_index ? 1.0 : 0.0;
  return out;
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.rotation_range = 0.0;
  c.flip_probability = 0.0;
  c.scale_min = c.scale_max = 1.0;
  c.vertical_shift = 0.0;
  c.jitter_center.setZero();
  c.jitter_lw_min = c.jitter_lw_max = 1.0;
  c.jitter_h_min = c.jitter_h_max = 1.0;
  c.jitter_yaw = 0.0;
  return c;
}

Eigen::Vector3d GlobalTransform::apply(const Eigen::Vector3d& p) const {
  Eigen::Vector3d q = p;
  if (flip_x) q.y() = -q.y();
  if (flip_y) q.x() = -q.x();
  q = scale * rotate_z(q, rotation);
  q.z() += dz;
  return q;
}

Box7 GlobalTransform::apply(const Box7& b) const {
  Box7 out = b;
  out.set_center(apply(b.center()));
  out.l *= scale;
  out.w *= scale;
  out.h *= scale;
  out.yaw = normalize_yaw(flip_yaw(b.yaw, flip_x, flip_y) + rotation);
  return out;
}

GlobalTransform draw_global_transform(CounterRng& rng, const AugmentConfig& cfg) {
  GlobalTransform g;
  g.rotation = rng.uniform(-cfg.rotation_range, cfg.rotation_range);
  g.flip_x = rng.bernoulli(cfg.flip_probability);
  g.flip_y = rng.bernoulli(cfg.flip_probability);
  g.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  g.dz = rng.uniform(-cfg.vertical_shift, cfg.vertical_shift);
  return g;
}

TrackSample augment(const TrackSample& sample, std::uint64_t seed, const AugmentConfig& cfg) {
  CounterRng rng = CounterRng::keyed(seed, hash_string(sample.sequence_id), sample.track_id);
  const GlobalTransform g = draw_global_transform(rng, cfg);

  TrackSample out = sample;
  for (auto& p : out.points.positions()) p = g.apply(p);
  for (auto& prop : out.proposals) prop.box = g.apply(prop.box);
  if (out.assignment) transform_assignment_boxes(*out.assignment, [&](const Box7& b) { return g.apply(b); });

  for (auto& prop : out.proposals) {
    Box7& b = prop.box;
    const Eigen::Vector3d local(rng.uniform(-1.0, 1.0) * cfg.jitter_center.x() * b.l,
                                rng.uniform(-1.0, 1.0) * cfg.jitter_center.y() * b.w,
                                rng.uniform(-1.0, 1.0) * cfg.jitter_center.z() * b.h);
    b.set_center(b.center() + rotate_z(local, b.yaw));
    b.l *= rng.uniform(cfg.jitter_lw_min, cfg.jitter_lw_max);
    b.w *= rng.uniform(cfg.jitter_lw_min, cfg.jitter_lw_max);
    b.h *= rng.uniform(cfg.jitter_h_min, cfg.jitter_h_max);
    b.yaw = normalize_yaw(b.yaw + rng.uniform(-cfg.jitter_yaw, cfg.jitter_yaw));
  }

  if (out.assignment) {
    for (std::size_t i = 0; i < out.assignment->proposals.size() && i < out.proposals.size(); ++i) {
      auto& t = out.assignment->proposals[i];
      if (!t.positive()) continue;
      const Box7& prop = out.proposals[i].box;
      t.iou = iou3d(prop, t.gt_box);
      t.soft_target = assignment::soft_target(t.iou);
      t.residual = assignment::residual_target(prop, t.gt_box);
    }
  }
  return out;
}

std::vector<TtaTransform> tta_transforms(bool with_rotations) {
  std::vector<double> rotations{0.0};
  if (with_rotations) rotations = {0.0, -2.0 * kPi / 3.0, 2.0 * kPi / 3.0};
  std::vector<TtaTransform> out;
  for (double r : rotations) {
    for (int flips = 0; flips < 4; ++flips) out.push_back({(flips & 1) != 0, (flips & 2) != 0, r});
  }
  return out;
}

tracking::Tracklet apply_tta(const tracking::Tracklet& track, const TtaTransform& t) {
  tracking::Tracklet out = track;
  for (auto& e : out.entries) e.box = t.apply(e.box);
  return out;
}

tracking::Tracklet invert_tta(const tracking::Tracklet& track, const TtaTransform& t) {
  tracking::Tracklet out = track;
  for (auto& e : out.entries) e.box = t.invert(e.box);
  return out;
}

std::vector<TtaVariant> tta_variants(const tracking::Tracklet& track, bool with_rotations) {
  std::vector<TtaVariant> out;
  for (const TtaTransform& t : tta_transforms(with_rotations)) out.push_back({t, apply_tta(track, t)});
  return out;
}

TrackSample apply_tta(const TrackSample& sample, const TtaTransform& t) {
  TrackSample out = sample;
  for (auto& p : out.points.positions()) p = t.apply(p);
  for (auto& prop : out.proposals) prop.box = t.apply(prop.box);
  if (out.assignment) transform_assignment_boxes(*out.assignment, [&](const Box7& b) { return t.apply(b); });
  out.tta = t;
  return out;
}

}  // namespace offtrack::dataset
