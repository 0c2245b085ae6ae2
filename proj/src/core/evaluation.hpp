#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace offtrack::evaluation {

// A scored prediction or a GT box. GTs carry score 1; track_id is the
// identity used by the tracking metrics.
struct EvalBox {
  std::string sequence_id;
  int frame_index = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  Box7 box;
  double score = 1.0;
  std::uint64_t track_id = 0;
};

enum class Interpolation { AllPoint, Point101 };

using PerClass = std::array<double, 3>;
inline double at(const PerClass& v, ObjectClass cls) { return v[static_cast<std::size_t>(cls)]; }

struct EvalConfig {
  PerClass iou_threshold{0.7, 0.5, 0.5};   // normal 3D IoU bar (AP, CLEAR, s_t)
  PerClass htp_bev_iou{0.9, 0.7, 0.7};     // high-precision TP bar
  PerClass dynamic_speed{1.0, 0.2, 1.0};   // m/s
  std::size_t max_predictions_per_frame = 200;
  double hz = 10.0;
  double inferior_miss_fraction = 0.1;
  double histogram_bin_s = 1.0;
  Interpolation interpolation = Interpolation::AllPoint;
};

using IouFn = std::function<double(const Box7&, const Box7&)>;

struct PrPoint {
  double score = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  bool true_positive = false;
};

// Greedy score-descending matching within (sequence, frame); each GT is taken
// at most once by the unmatched GT of highest IoU when it clears `threshold`.
// Boxes of other classes are ignored only if the caller filters them.
std::vector<PrPoint> pr_curve(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const IouFn& iou,
                              double threshold);

// Throws Error("no_ground_truth") without GTs.
double average_precision(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const IouFn& iou,
                         double threshold, Interpolation interpolation = Interpolation::AllPoint);

struct MotResult {
  std::size_t num_gt = 0;
  std::size_t matches = 0;
  std::size_t false_negatives = 0;
  std::size_t false_positives = 0;
  std::size_t id_switches = 0;
  double mota = 0.0;     // x100
  double motp = 0.0;     // mean (1 - iou3d) x100
  double ids_pct = 0.0;  // x100
};

// CLEAR-MOT on one class. Previous correspondences are kept while their IoU
// stays at or above the threshold; the rest are matched by Hungarian on 1 - iou3d.
MotResult clear_mot(std::span<const EvalBox> preds, std::span<const EvalBox> gts, double iou_threshold);

struct InspectionResult {
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;  // after the per-frame cap
  std::size_t true_positives = 0;
  std::size_t t_fn = 0;
  std::size_t h_fp = 0;
  std::size_t h_tp = 0;
  double s_t = 0.0;
  bool s_t_flagged = false;  // recall never reached 50%
  double t_fn_ratio = 0.0;   // all ratios are over num_gt
  double h_fp_ratio = 0.0;
  double h_tp_ratio = 0.0;
  std::vector<char> gt_missed;  // per input GT, in input order
};

// One class. Predictions are capped per frame to the top scores first.
InspectionResult inspection(std::span<const EvalBox> preds, std::span<const EvalBox> gts, double iou_threshold,
                            double htp_bev_iou, std::size_t max_per_frame);

struct InferiorTrack {
  std::string sequence_id;
  std::uint64_t gt_track_id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  std::size_t boxes = 0;
  std::size_t missed = 0;
};

struct LifeCycle {
  double bin_width_s = 1.0;
  std::vector<std::size_t> all_tracks;       // histogram of GT track lengths
  std::vector<std::size_t> inferior_tracks;  // same bins, inferior only
  std::vector<InferiorTrack> inferior;
  std::size_t num_tracks = 0;
};

// `missed` flags each GT box (same order as `gts`) as a totally missed one.
LifeCycle life_cycle_analysis(std::span<const EvalBox> gts, std::span<const char> missed, const EvalConfig& cfg);

enum class MotionState { Static, Dynamic };

// Endpoint displacement over duration. Single-entry tracks are static.
MotionState motion_state(std::span<const EvalBox> track_boxes, double hz, double threshold_mps);

struct ClassReport {
  ObjectClass cls = ObjectClass::Vehicle;
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
  double ap_3d = 0.0;
  double ap_bev = 0.0;
  bool has_gt = false;
  MotResult mot;
  InspectionResult inspect;
};

struct EvalReport {
  std::vector<ClassReport> classes;  // only classes with GTs or predictions
  LifeCycle life_cycle;

  const ClassReport* find(ObjectClass cls) const;
  std::string render_text() const;
  std::string render_csv() const;
  std::string render_json() const;
  // Track-length histogram with inferior tracks overlaid.
  std::string render_life_cycle_svg() const;
  // Named scalar lookup, e.g. "Vehicle.t_fn" or "all.h_fp". Throws Error("unknown_metric").
  double metric(const std::string& name) const;
};

EvalReport evaluate(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const EvalConfig& cfg);

}  // namespace offtrack::evaluation
