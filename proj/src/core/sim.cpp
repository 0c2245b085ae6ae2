#include "sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace offtrack::sim {

namespace {

// Stream tags keep the random draws of different concerns independent.
enum Stream : std::uint64_t { kObjects = 1, kPoints = 2, kDetector = 3, kClutter = 4 };

const ClassProfile& profile(const SimConfig& cfg, ObjectClass cls) {
  switch (cls) {
    case ObjectClass::Vehicle:
      return cfg.vehicle;
    case ObjectClass::Pedestrian:
      return cfg.pedestrian;
    case ObjectClass::Cyclist:
      return cfg.cyclist;
  }
  return cfg.vehicle;
}

int draw_int(const Range& r, CounterRng& rng) {
  const int lo = static_cast<int>(std::lround(r.lo));
  const int hi = std::max(lo, static_cast<int>(std::lround(r.hi)));
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Eigen::Vector3d ego_position(const SimConfig& cfg, int frame) {
  return {cfg.ego_speed_mps * static_cast<double>(frame) / cfg.hz, 0.0, 0.0};
}

Box7 jitter_box(const Box7& b, const SimConfig& cfg, CounterRng& rng) {
  const double s = cfg.jitter_scale;
  Box7 out = b;
  const double lx = rng.uniform(-1.0, 1.0) * s * cfg.jitter_center[0] * b.l;
  const double ly = rng.uniform(-1.0, 1.0) * s * cfg.jitter_center[1] * b.w;
  const double lz = rng.uniform(-1.0, 1.0) * s * cfg.jitter_center[2] * b.h;
  const double c = std::cos(b.yaw);
  const double sn = std::sin(b.yaw);
  out.cx += c * lx - sn * ly;
  out.cy += sn * lx + c * ly;
  out.cz += lz;
  out.l *= 1.0 + s * cfg.jitter_lw * rng.uniform(-1.0, 1.0);
  out.w *= 1.0 + s * cfg.jitter_lw * rng.uniform(-1.0, 1.0);
  out.h *= 1.0 + s * cfg.jitter_h * rng.uniform(-1.0, 1.0);
  out.yaw = normalize_yaw(b.yaw + s * cfg.jitter_yaw * rng.uniform(-1.0, 1.0));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

double mean_of(const std::vector<int>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (int x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

SimConfig SimConfig::noiseless() {
  SimConfig c;
  c.drop_floor = 0.0;
  c.drop_scale_points = 0.0;
  c.occlusion_fraction = 0.0;
  c.late_detection_fraction = 0.0;
  c.jitter_scale = 0.0;
  c.score_noise = 0.0;
  c.clutter_per_frame = 0.0;
  return c;
}

Box7 ObjectSpec::box_at(double t) const {
  Box7 b;
  b.l = l;
  b.w = w;
  b.h = h;
  b.cz = h / 2.0;
  double x = start.x();
  double y = start.y();
  double yaw = yaw0;
  switch (motion) {
    case Motion::Static:
      break;
    case Motion::ConstantVelocity:
      x += speed * t * std::cos(yaw0);
      y += speed * t * std::sin(yaw0);
      break;
    case Motion::Turn:
      if (std::abs(yaw_rate) < 1e-12) {
        x += speed * t * std::cos(yaw0);
        y += speed * t * std::sin(yaw0);
        break;
      }
      yaw = yaw0 + yaw_rate * t;
      x += speed / yaw_rate * (std::sin(yaw) - std::sin(yaw0));
      y -= speed / yaw_rate * (std::cos(yaw) - std::cos(yaw0));
      break;
  }
  b.cx = x;
  b.cy = y;
  b.yaw = normalize_yaw(yaw);
  return b;
}

std::string sequence_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%04d", index);
  return buf;
}

std::vector<ObjectSpec> sample_objects(const SimConfig& cfg, int seq_index) {
  const int last = cfg.frames_per_sequence - 1;
  std::vector<ObjectSpec> out;
  std::uint64_t next_id = 1;
  for (ObjectClass cls : kAllClasses) {
    const ClassProfile& prof = profile(cfg, cls);
    CounterRng count_rng = CounterRng::keyed(cfg.seed, seq_index, kObjects, 0, static_cast<std::uint64_t>(cls));
    const int count = draw_int(prof.count, count_rng);
    for (int k = 0; k < count; ++k) {
      ObjectSpec o;
      o.id = next_id++;
      o.cls = cls;
      CounterRng rng = CounterRng::keyed(cfg.seed, seq_index, kObjects, o.id);
      o.l = prof.length.draw(rng);
      o.w = prof.width.draw(rng);
      o.h = prof.height.draw(rng);
      for (int attempt = 0; attempt < 50; ++attempt) {
        o.start = {cfg.spawn_x.draw(rng), cfg.spawn_y.draw(rng)};
        if (std::abs(o.start.y()) < 3.0) continue;  // keep the ego lane clear
        const bool clear = std::none_of(out.begin(), out.end(), [&](const ObjectSpec& other) {
          return (other.start - o.start).norm() < cfg.min_spawn_gap_m;
        });
        if (clear) break;
      }
      o.yaw0 = rng.uniform(-kPi, kPi);
      if (!rng.bernoulli(cfg.static_fraction)) {
        o.speed = prof.speed.draw(rng);
        o.motion = Motion::ConstantVelocity;
        if (rng.bernoulli(cfg.turn_fraction)) {
          o.motion = Motion::Turn;
          o.yaw_rate = cfg.turn_rate.draw(rng) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        }
      }
      o.spawn_frame = 0;
      o.exit_frame = last;
      if (rng.bernoulli(cfg.late_spawn_fraction)) {
        o.spawn_frame = draw_int(Range{10.0, last / 2.0}, rng);
      }
      if (rng.bernoulli(cfg.early_exit_fraction)) {
        o.exit_frame = std::max(o.spawn_frame, draw_int(Range{last / 2.0, last - 10.0}, rng));
      }
      if (rng.bernoulli(cfg.occlusion_fraction)) {
        o.occlusion_begin = draw_int(Range{static_cast<double>(o.spawn_frame), static_cast<double>(o.exit_frame)}, rng);
        o.occlusion_end = o.occlusion_begin + draw_int(cfg.occlusion_frames, rng) - 1;
      }
      if (rng.bernoulli(cfg.late_detection_fraction)) o.late_detection_frames = draw_int(cfg.late_detection_frames, rng);
      out.push_back(o);
    }
  }
  return out;
}

PointCloud sample_shell(const Box7& box, std::size_t n, double inset, double noise, CounterRng& rng) {
  const double l = std::max(box.l - 2.0 * inset, 0.05);
  const double w = std::max(box.w - 2.0 * inset, 0.05);
  const double h = std::max(box.h - 2.0 * inset, 0.05);
  const double a_top = l * w;
  const double a_end = w * h;   // front and back
  const double a_side = l * h;  // left and right
  const double total = a_top + 2.0 * a_end + 2.0 * a_side;
  const RigidPose pose = box_pose(box);

  PointCloud out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    const double u = rng.uniform(-0.5, 0.5);
    const double v = rng.uniform(-0.5, 0.5);
    Eigen::Vector3d p;
    if (pick < a_top) {
      p = {u * l, v * w, h / 2.0};
    } else if (pick < a_top + 2.0 * a_end) {
      p = {pick < a_top + a_end ? l / 2.0 : -l / 2.0, u * w, v * h};
    } else {
      p = {u * l, pick < a_top + 2.0 * a_end + a_side ? w / 2.0 : -w / 2.0, v * h};
    }
    if (noise > 0.0) p += Eigen::Vector3d(rng.normal(0.0, noise), rng.normal(0.0, noise), rng.normal(0.0, noise));
    out.push_back(pose.apply(p), rng.uniform());
  }
  return out;
}

std::size_t expected_points(const SimConfig& cfg, ObjectClass cls, const Box7& box, double range_m) {
  if (range_m > cfg.lidar_range_m) return 0;
  const double area = box.l * box.w + 2.0 * box.w * box.h + 2.0 * box.l * box.h;
  const double r = std::max(range_m, 1.0);
  const double n = profile(cfg, cls).points_per_m2 * area * (10.0 / r) * (10.0 / r);
  return static_cast<std::size_t>(std::min(n, static_cast<double>(cfg.max_points_per_object)));
}

double drop_probability(const SimConfig& cfg, std::size_t points) {
  if (points == 0) return 1.0;
  const double tail = cfg.drop_scale_points > 0.0 ? std::exp(-static_cast<double>(points) / cfg.drop_scale_points) : 0.0;
  return std::min(1.0, cfg.drop_floor + tail);
}

double detection_score(const SimConfig& cfg, std::size_t points, CounterRng& rng) {
  double s = cfg.score_base;
  if (cfg.score_scale_points > 0.0) {
    s += cfg.score_gain * (1.0 - std::exp(-static_cast<double>(points) / cfg.score_scale_points));
  }
  if (cfg.score_noise > 0.0) s += rng.normal(0.0, cfg.score_noise);
  return std::clamp(s, 0.01, 1.0);
}

SequenceWorld generate_sequence(const SimConfig& cfg, int seq_index) {
  SequenceWorld world;
  world.sequence_id = sequence_name(seq_index);
  world.objects = sample_objects(cfg, seq_index);
  world.detections.sequence_id = world.sequence_id;

  world.gt.resize(world.objects.size());
  world.gt_detected.resize(world.objects.size());
  for (std::size_t k = 0; k < world.objects.size(); ++k) {
    world.gt[k].gt_track_id = world.objects[k].id;
    world.gt[k].cls = world.objects[k].cls;
  }
  std::vector<int> first_seen(world.objects.size(), -1);

  for (int f = 0; f < cfg.frames_per_sequence; ++f) {
    const double t = static_cast<double>(f) / cfg.hz;
    const Eigen::Vector3d ego = ego_position(cfg, f);
    PointFrame frame;
    frame.frame_index = f;
    frame.ego_pose = RigidPose(Eigen::Matrix3d::Identity(), ego);
    tracking::FrameDetections dets;
    dets.frame_index = f;
    dets.timestamp = t;
    dets.ego_pose = frame.ego_pose;

    for (std::size_t k = 0; k < world.objects.size(); ++k) {
      const ObjectSpec& o = world.objects[k];
      if (f < o.spawn_frame || f > o.exit_frame) continue;
      const Box7 box = o.box_at(t);
      const double range = std::hypot(box.cx - ego.x(), box.cy - ego.y());
      const std::size_t expected = expected_points(cfg, o.cls, box, range);
      CounterRng prng = CounterRng::keyed(cfg.seed, seq_index, kPoints, o.id, f);
      const auto n = static_cast<std::size_t>(std::min(
          std::round(static_cast<double>(expected) * prng.uniform(0.8, 1.2)), static_cast<double>(cfg.max_points_per_object)));
      if (n == 0) continue;
      frame.points.append(sample_shell(box, n, cfg.shell_inset_m, cfg.point_noise_m, prng));
      world.gt[k].entries.push_back({f, box, static_cast<int>(n)});
      if (first_seen[k] < 0) first_seen[k] = f;

      CounterRng drng = CounterRng::keyed(cfg.seed, seq_index, kDetector, o.id, f);
      double p_drop = drop_probability(cfg, n);
      if (f >= o.occlusion_begin && f <= o.occlusion_end) p_drop = std::max(p_drop, cfg.occlusion_drop_probability);
      if (f < first_seen[k] + o.late_detection_frames) p_drop = 1.0;
      const bool detected = !drng.bernoulli(p_drop);
      world.gt_detected[k].push_back(detected ? 1 : 0);
      if (!detected) continue;
      LabeledBox det;
      det.box = cfg.jitter_scale > 0.0 ? jitter_box(box, cfg, drng) : box;
      det.cls = o.cls;
      det.score = detection_score(cfg, n, drng);
      det.frame_index = f;
      dets.detections.push_back(det);
    }

    if (cfg.clutter_per_frame > 0.0) {
      CounterRng crng = CounterRng::keyed(cfg.seed, seq_index, kClutter, f);
      const double whole = std::floor(cfg.clutter_per_frame);
      const int count = static_cast<int>(whole) + (crng.bernoulli(cfg.clutter_per_frame - whole) ? 1 : 0);
      for (int c = 0; c < count; ++c) {
        LabeledBox det;
        det.cls = kAllClasses[crng.below(3)];
        const ClassProfile& prof = profile(cfg, det.cls);
        const double r = crng.uniform(5.0, 60.0);
        const double a = crng.uniform(-kPi, kPi);
        det.box = Box7{ego.x() + r * std::cos(a), ego.y() + r * std::sin(a), 0.0, prof.length.draw(crng),
                       prof.width.draw(crng), prof.height.draw(crng), crng.uniform(-kPi, kPi)};
        det.box.cz = det.box.h / 2.0;
        det.score = crng.uniform(0.01, cfg.clutter_score_max);
        det.frame_index = f;
        dets.detections.push_back(det);
        ++world.clutter;
      }
    }
    world.frames.add(std::move(frame));
    world.detections.frames.push_back(std::move(dets));
  }

  // Objects never observed have no GT track.
  std::vector<assignment::GtTrack> gt;
  std::vector<std::vector<char>> detected;
  for (std::size_t k = 0; k < world.gt.size(); ++k) {
    if (world.gt[k].entries.empty()) continue;
    gt.push_back(std::move(world.gt[k]));
    detected.push_back(std::move(world.gt_detected[k]));
  }
  world.gt = std::move(gt);
  world.gt_detected = std::move(detected);
  return world;
}

void Scorecard::add(const SequenceWorld& world) {
  ++sequences;
  frames += world.detections.frames.size();
  clutter += world.clutter;
  for (const auto& o : world.objects) ++objects[static_cast<std::size_t>(o.cls)];
  for (std::size_t k = 0; k < world.gt.size(); ++k) {
    const auto& g = world.gt[k];
    const auto& det = world.gt_detected[k];
    const auto c = static_cast<std::size_t>(g.cls);
    ++gt_tracks;
    gt_boxes[c] += g.entries.size();
    if (g.entries.back().frame_index - g.entries.front().frame_index + 1 <= 100) ++short_tracks;
    for (const auto& e : g.entries) point_counts.push_back(static_cast<std::size_t>(e.num_points));

    long first = -1;
    long prev = -1;
    for (std::size_t i = 0; i < det.size(); ++i) {
      if (!det[i]) continue;
      ++detections[c];
      if (first < 0) first = static_cast<long>(i);
      if (prev >= 0 && static_cast<long>(i) - prev > 1) {
        dropout_spans.push_back(g.entries[i].frame_index - g.entries[static_cast<std::size_t>(prev)].frame_index - 1);
      }
      prev = static_cast<long>(i);
    }
    if (first < 0) {
      ++never_detected;
    } else {
      late_starts.push_back(g.entries[static_cast<std::size_t>(first)].frame_index - g.entries.front().frame_index);
    }
  }
}

void Scorecard::merge(const Scorecard& o) {
  sequences += o.sequences;
  frames += o.frames;
  clutter += o.clutter;
  for (std::size_t c = 0; c < 3; ++c) {
    objects[c] += o.objects[c];
    gt_boxes[c] += o.gt_boxes[c];
    detections[c] += o.detections[c];
  }
  point_counts.insert(point_counts.end(), o.point_counts.begin(), o.point_counts.end());
  dropout_spans.insert(dropout_spans.end(), o.dropout_spans.begin(), o.dropout_spans.end());
  late_starts.insert(late_starts.end(), o.late_starts.begin(), o.late_starts.end());
  never_detected += o.never_detected;
  gt_tracks += o.gt_tracks;
  short_tracks += o.short_tracks;
}

double Scorecard::short_track_fraction() const {
  return gt_tracks == 0 ? 0.0 : static_cast<double>(short_tracks) / static_cast<double>(gt_tracks);
}

double Scorecard::point_quantile(double q) const {
  if (point_counts.empty()) return 0.0;
  std::vector<std::size_t> v = point_counts;
  const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return static_cast<double>(v[k]);
}

std::string Scorecard::render_text() const {
  std::ostringstream os;
  os << "sequences " << sequences << "  frames " << frames << "\n";
  for (ObjectClass cls : kAllClasses) {
    const auto c = static_cast<std::size_t>(cls);
    const double rate = gt_boxes[c] == 0 ? 0.0 : static_cast<double>(detections[c]) / static_cast<double>(gt_boxes[c]);
    os << to_string(cls) << ": objects " << objects[c] << "  gt boxes " << gt_boxes[c] << "  detections "
       << detections[c] << "  detection rate " << fmt(rate) << "\n";
  }
  os << "points per gt box: p10 " << point_quantile(0.1) << "  p50 " << point_quantile(0.5) << "  p90 "
     << point_quantile(0.9) << "\n";
  os << "dropout spans " << dropout_spans.size() << "  mean length " << fmt(mean_of(dropout_spans)) << "\n";
  os << "late first detections "
     << std::count_if(late_starts.begin(), late_starts.end(), [](int d) { return d > 0; }) << "  mean delay "
     << fmt(mean_of(late_starts)) << "\n";
  os << "gt tracks " << gt_tracks << "  never detected " << never_detected << "  short-track fraction "
     << fmt(short_track_fraction()) << "\n";
  os << "clutter detections " << clutter << "\n";
  return os.str();
}

std::string Scorecard::render_json() const {
  nlohmann::ordered_json j;
  j["sequences"] = sequences;
  j["frames"] = frames;
  for (ObjectClass cls : kAllClasses) {
    const auto c = static_cast<std::size_t>(cls);
    j["classes"][std::string(to_string(cls))] = {
        {"objects", objects[c]}, {"gt_boxes", gt_boxes[c]}, {"detections", detections[c]}};
  }
  j["points_per_box"] = {{"p10", point_quantile(0.1)}, {"p50", point_quantile(0.5)}, {"p90", point_quantile(0.9)}};
  j["dropout_spans"] = {{"count", dropout_spans.size()}, {"mean", mean_of(dropout_spans)}};
  j["late_starts"] = {{"count", std::count_if(late_starts.begin(), late_starts.end(), [](int d) { return d > 0; })},
                      {"mean", mean_of(late_starts)}};
  j["gt_tracks"] = gt_tracks;
  j["never_detected"] = never_detected;
  j["short_track_fraction"] = short_track_fraction();
  j["clutter"] = clutter;
  return j.dump(2) + "\n";
}

}  // namespace offtrack::sim
