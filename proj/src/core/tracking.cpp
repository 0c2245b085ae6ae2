#include "tracking.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "error.hpp"
#include "linear_assignment.hpp"

namespace offtrack::tracking {

namespace {

using MeasVector = Eigen::Matrix<double, 7, 1>;
using MeasMatrix = Eigen::Matrix<double, 7, 7>;
using GainMatrix = Eigen::Matrix<double, 10, 7>;

MeasVector measurement_of(const Box7& b) {
  MeasVector z;
  z << b.cx, b.cy, b.cz, b.yaw, b.l, b.w, b.h;
  return z;
}

MeasMatrix measurement_noise(const TrackerConfig& cfg) {
  const auto& m = cfg.measurement;
  MeasVector d;
  d << m.position, m.position, m.position, m.yaw, m.size, m.size, m.size;
  return d.cwiseAbs2().asDiagonal();
}

StateMatrix process_noise(const TrackerConfig& cfg) {
  const auto& p = cfg.process;
  StateVector d;
  d << p.position, p.position, p.position, p.yaw, p.size, p.size, p.size, p.velocity, p.velocity, p.velocity;
  return d.cwiseAbs2().asDiagonal();
}

StateMatrix transition() {
  StateMatrix f = StateMatrix::Identity();
  f(0, 7) = 1.0;
  f(1, 8) = 1.0;
  f(2, 9) = 1.0;
  return f;
}

bool in_range(const Box7& box, const SequenceDetections& seq, int frame_index, const TrackerConfig& cfg) {
  const FrameDetections* fr = seq.frame(frame_index);
  const Eigen::Vector3d ego = fr != nullptr ? fr->ego_pose.translation() : Eigen::Vector3d::Zero();
  return std::hypot(box.cx - ego.x(), box.cy - ego.y()) <= cfg.perception_radius_m;
}

struct LiveTrack {
  Tracklet track;
  KalmanState state;
  int last_frame = 0;
  double last_score = 0.0;
  bool alive = true;
};

// Core forward pass shared by every mode: returns raw tracks whose entries run
// from the spawning detection to the frame the track left the perception range
// (or the sequence end), with every undetected frame Filled.
std::vector<Tracklet> forward_pass(const SequenceDetections& seq, const TrackerConfig& cfg) {
  std::vector<LiveTrack> live;
  std::uint64_t next_id = 1;

  for (const FrameDetections& frame : seq.frames) {
    const int f = frame.frame_index;
    for (LiveTrack& lt : live) {
      if (!lt.alive) continue;
      for (int k = lt.last_frame; k < f; ++k) lt.state = kf_predict(lt.state, cfg);
      lt.last_frame = f;
    }

    for (ObjectClass cls : kAllClasses) {
      std::vector<std::size_t> track_idx;
      std::vector<Box7> predicted;
      for (std::size_t i = 0; i < live.size(); ++i) {
        if (live[i].alive && live[i].track.cls == cls) {
          track_idx.push_back(i);
          predicted.push_back(live[i].state.box());
        }
      }
      std::vector<std::size_t> det_idx;
      std::vector<Box7> dets;
      for (std::size_t j = 0; j < frame.detections.size(); ++j) {
        if (frame.detections[j].cls == cls) {
          det_idx.push_back(j);
          dets.push_back(frame.detections[j].box);
        }
      }
      if (track_idx.empty() && det_idx.empty()) continue;

      const Association assoc = associate(predicted, dets, cfg.gate_iou);
      for (const auto& [ti, di] : assoc.matches) {
        LiveTrack& lt = live[track_idx[ti]];
        const LabeledBox& det = frame.detections[det_idx[di]];
        lt.state = kf_update(lt.state, det.box, cfg);
        lt.last_score = det.score;
        lt.track.entries.push_back({f, det.box, det.score, Origin::Detected});
      }
      for (std::size_t ti : assoc.unmatched_tracks) {
        LiveTrack& lt = live[track_idx[ti]];
        const Box7 pseudo = lt.state.box();
        if (!in_range(pseudo, seq, f, cfg)) {
          lt.alive = false;
          continue;
        }
        lt.track.entries.push_back({f, pseudo, lt.last_score * cfg.ext_score_decay, Origin::Filled});
      }
      for (std::size_t di : assoc.unmatched_detections) {
        const LabeledBox& det = frame.detections[det_idx[di]];
        LiveTrack lt;
        lt.track.track_id = next_id++;
        lt.track.cls = cls;
        lt.track.entries.push_back({f, det.box, det.score, Origin::Detected});
        lt.state = KalmanState::from_box(det.box, cfg);
        lt.last_frame = f;
        lt.last_score = det.score;
        live.push_back(std::move(lt));
      }
    }
  }

  std::vector<Tracklet> out;
  out.reserve(live.size());
  for (LiveTrack& lt : live) out.push_back(std::move(lt.track));
  return out;
}

std::size_t last_detected_index(const Tracklet& t) {
  for (std::size_t i = t.entries.size(); i-- > 0;) {
    if (t.entries[i].origin == Origin::Detected) return i;
  }
  return 0;
}

}  // namespace

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::Detected:
      return "detected";
    case Origin::Filled:
      return "filled";
    case Origin::ForwardExt:
      return "forward_ext";
    case Origin::BackwardExt:
      return "backward_ext";
  }
  return "unknown";
}

std::optional<Origin> parse_origin(std::string_view name) {
  for (Origin o : {Origin::Detected, Origin::Filled, Origin::ForwardExt, Origin::BackwardExt}) {
    if (to_string(o) == name) return o;
  }
  return std::nullopt;
}

int Tracklet::detected_span() const {
  int first = -1;
  int last = -1;
  for (const auto& e : entries) {
    if (e.origin != Origin::Detected) continue;
    if (first < 0) first = e.frame_index;
    last = e.frame_index;
  }
  return first < 0 ? 0 : last - first + 1;
}

const TrackEntry* Tracklet::find(int frame_index) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), frame_index,
                             [](const TrackEntry& e, int f) { return e.frame_index < f; });
  return it != entries.end() && it->frame_index == frame_index ? &*it : nullptr;
}

bool Tracklet::gap_free() const {
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].frame_index != entries[i - 1].frame_index + 1) return false;
  }
  return true;
}

const FrameDetections* SequenceDetections::frame(int frame_index) const {
  // Frames are usually dense and zero-based; fall back to search otherwise.
  if (frame_index >= 0 && static_cast<std::size_t>(frame_index) < frames.size() &&
      frames[static_cast<std::size_t>(frame_index)].frame_index == frame_index) {
    return &frames[static_cast<std::size_t>(frame_index)];
  }
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_index,
                             [](const FrameDetections& fr, int f) { return fr.frame_index < f; });
  return it != frames.end() && it->frame_index == frame_index ? &*it : nullptr;
}

KalmanState KalmanState::from_box(const Box7& box, const TrackerConfig& cfg) {
  KalmanState s;
  s.mean.head<7>() = measurement_of(box);
  s.mean.tail<3>().setZero();
  s.cov.setZero();
  s.cov.topLeftCorner<7, 7>() = cfg.init_cov_scale * measurement_noise(cfg);
  const double v2 = cfg.init_velocity_sigma * cfg.init_velocity_sigma;
  s.cov.bottomRightCorner<3, 3>() = v2 * Eigen::Matrix3d::Identity();
  return s;
}

Box7 KalmanState::box() const {
  return Box7{mean(0), mean(1), mean(2), mean(4), mean(5), mean(6), normalize_yaw(mean(3))};
}

KalmanState kf_predict(const KalmanState& state, const TrackerConfig& cfg) {
  static const StateMatrix f = transition();
  KalmanState out;
  out.mean = f * state.mean;
  out.mean(3) = normalize_yaw(out.mean(3));
  out.cov = f * state.cov * f.transpose() + process_noise(cfg);
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

KalmanState kf_update(const KalmanState& state, const Box7& obs, const TrackerConfig& cfg) {
  MeasVector z = measurement_of(obs);
  double dyaw = normalize_yaw(z(3) - state.mean(3));
  if (std::abs(dyaw) > kPi / 2.0) dyaw = normalize_yaw(dyaw + kPi);

  MeasVector innovation = z - state.mean.head<7>();
  innovation(3) = dyaw;

  const MeasMatrix r = measurement_noise(cfg);
  const MeasMatrix s = state.cov.topLeftCorner<7, 7>() + r;
  Eigen::LLT<MeasMatrix> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) {
    throw Error("degenerate_innovation", "innovation covariance is not positive definite");
  }
  // K = P H^T S^-1, with H selecting the first seven components.
  const GainMatrix pht = state.cov.leftCols<7>();
  const GainMatrix k = llt.solve(pht.transpose()).transpose();

  KalmanState out;
  out.mean = state.mean + k * innovation;
  out.mean(3) = normalize_yaw(out.mean(3));

  StateMatrix ikh = StateMatrix::Identity();
  ikh.leftCols<7>() -= k;
  out.cov = ikh * state.cov * ikh.transpose() + k * r * k.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

Association associate(std::span<const Box7> predicted, std::span<const Box7> detections, double gate) {
  Association out;
  if (predicted.empty() || detections.empty()) {
    for (std::size_t i = 0; i < predicted.size(); ++i) out.unmatched_tracks.push_back(i);
    for (std::size_t j = 0; j < detections.size(); ++j) out.unmatched_detections.push_back(j);
    return out;
  }
  Eigen::MatrixXd iou(static_cast<Eigen::Index>(predicted.size()), static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      iou(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = iou3d(predicted[i], detections[j]);
    }
  }
  const Eigen::MatrixXd cost = Eigen::MatrixXd::Ones(iou.rows(), iou.cols()) - iou;
  const std::vector<int> row_to_col = solve_linear_assignment(cost);

  std::vector<char> det_used(detections.size(), 0);
  for (std::size_t i = 0; i < row_to_col.size(); ++i) {
    const int j = row_to_col[i];
    if (j >= 0 && iou(static_cast<Eigen::Index>(i), j) >= gate) {
      out.matches.emplace_back(i, static_cast<std::size_t>(j));
      det_used[static_cast<std::size_t>(j)] = 1;
    } else {
      out.unmatched_tracks.push_back(i);
    }
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!det_used[j]) out.unmatched_detections.push_back(j);
  }
  return out;
}

std::vector<Tracklet> run_forward(const SequenceDetections& seq, const TrackerConfig& cfg) {
  std::vector<Tracklet> raw = forward_pass(seq, cfg);
  const int seq_end = seq.last_frame();
  std::vector<Tracklet> out;
  out.reserve(raw.size());
  for (Tracklet& t : raw) {
    const std::size_t last_det = last_detected_index(t);
    const int last_det_frame = t.entries[last_det].frame_index;
    const bool long_track = t.detected_span() > cfg.long_track_frames;
    const int ext_end = long_track ? seq_end : std::min(seq_end, last_det_frame + cfg.short_ext_frames);

    Tracklet kept;
    kept.track_id = t.track_id;
    kept.cls = t.cls;
    kept.entries.assign(t.entries.begin(), t.entries.begin() + static_cast<std::ptrdiff_t>(last_det) + 1);
    // Past the last detection the raw entries are exactly the motion-model
    // extrapolation; the forward pass already stopped them at the range limit.
    for (std::size_t i = last_det + 1; i < t.entries.size(); ++i) {
      TrackEntry e = t.entries[i];
      if (e.frame_index > ext_end) break;
      e.origin = Origin::ForwardExt;
      kept.entries.push_back(e);
    }
    out.push_back(std::move(kept));
  }
  return out;
}

Tracklet backtrace_extend(const Tracklet& track, const SequenceDetections& seq, const TrackerConfig& cfg) {
  std::vector<const TrackEntry*> detected;
  for (const auto& e : track.entries) {
    if (e.origin == Origin::Detected) detected.push_back(&e);
  }
  if (detected.empty() || track.first_frame() <= 0) return track;

  // Reverse-time filter: the velocity it estimates points into the past.
  KalmanState state = KalmanState::from_box(detected.back()->box, cfg);
  int cursor = detected.back()->frame_index;
  for (std::size_t i = detected.size() - 1; i-- > 0;) {
    const TrackEntry& e = *detected[i];
    for (int k = cursor; k > e.frame_index; --k) state = kf_predict(state, cfg);
    state = kf_update(state, e.box, cfg);
    cursor = e.frame_index;
  }

  const int first = track.first_frame();
  const bool long_track = track.detected_span() > cfg.long_track_frames;
  const int target = long_track ? 0 : std::max(0, first - cfg.short_ext_frames);
  const double score = detected.front()->score * cfg.ext_score_decay;

  std::vector<TrackEntry> prefix;
  for (int f = first - 1; f >= target; --f) {
    state = kf_predict(state, cfg);
    const Box7 box = state.box();
    if (!in_range(box, seq, f, cfg)) break;
    prefix.push_back({f, box, score, Origin::BackwardExt});
  }
  std::reverse(prefix.begin(), prefix.end());

  Tracklet out;
  out.track_id = track.track_id;
  out.cls = track.cls;
  out.entries = std::move(prefix);
  out.entries.insert(out.entries.end(), track.entries.begin(), track.entries.end());
  return out;
}

std::vector<Tracklet> run_bidirectional(const SequenceDetections& seq, const TrackerConfig& cfg) {
  std::vector<Tracklet> fwd = run_forward(seq, cfg);
  std::vector<Tracklet> out;
  out.reserve(fwd.size());
  for (const Tracklet& t : fwd) out.push_back(backtrace_extend(t, seq, cfg));
  return out;
}

std::vector<Tracklet> run_detections_only(const SequenceDetections& seq, const TrackerConfig& cfg) {
  std::vector<Tracklet> raw = forward_pass(seq, cfg);
  for (Tracklet& t : raw) {
    std::erase_if(t.entries, [](const TrackEntry& e) { return e.origin != Origin::Detected; });
  }
  return raw;
}

std::vector<Tracklet> run(const SequenceDetections& seq, const TrackerConfig& cfg, Mode mode) {
  switch (mode) {
    case Mode::None:
      return run_detections_only(seq, cfg);
    case Mode::Forward:
      return run_forward(seq, cfg);
    case Mode::Bidirectional:
      return run_bidirectional(seq, cfg);
  }
  return {};
}

}  // namespace offtrack::tracking
