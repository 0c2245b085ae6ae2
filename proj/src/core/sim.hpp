#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "assignment.hpp"
#include "frames.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "tracking.hpp"

// Synthetic driving world: box-shaped objects seen by a LiDAR that only samples
// their surfaces, and a detector whose misses depend on how many points an
// object gets.
namespace offtrack::sim {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double draw(CounterRng& rng) const { return hi > lo ? rng.uniform(lo, hi) : lo; }
};

struct ClassProfile {
  Range count;  // objects per sequence
  Range length, width, height;
  Range speed;                  // m/s for moving objects
  double points_per_m2 = 80.0;  // surface density at 10 m
};

struct SimConfig {
  std::uint64_t seed = 7;
  int num_sequences = 4;
  int frames_per_sequence = 200;
  double hz = 10.0;
  double ego_speed_mps = 5.0;

  ClassProfile vehicle{{8, 14}, {3.8, 5.2}, {1.7, 2.1}, {1.4, 1.9}, {3.0, 12.0}, 80.0};
  ClassProfile pedestrian{{3, 6}, {0.5, 0.9}, {0.5, 0.9}, {1.6, 1.9}, {0.5, 1.5}, 80.0};
  ClassProfile cyclist{{2, 4}, {1.6, 1.9}, {0.5, 0.8}, {1.5, 1.8}, {2.0, 6.0}, 80.0};

  double static_fraction = 0.4;
  double turn_fraction = 0.2;  // of the moving objects
  Range turn_rate{0.05, 0.2};  // rad/s, random sign
  Range spawn_x{-30.0, 130.0};
  Range spawn_y{-40.0, 40.0};
  double min_spawn_gap_m = 6.0;

  // Objects that enter or leave the world mid-sequence.
  double late_spawn_fraction = 0.15;
  double early_exit_fraction = 0.15;

  double lidar_range_m = 75.0;  // inside the tracker perception radius
  double shell_inset_m = 0.1;  // the surface sits this far inside the GT box
  double point_noise_m = 0.02;
  int max_points_per_object = 2000;

  // Detector.
  double drop_floor = 0.02;
  double drop_scale_points = 15.0;  // miss probability floor + exp(-n / scale)
  double occlusion_fraction = 0.3;
  Range occlusion_frames{5, 30};
  double occlusion_drop_probability = 1.0;
  double late_detection_fraction = 0.25;
  Range late_detection_frames{10, 60};
  double jitter_scale = 0.5;  // multiplies the box jitter magnitudes below
  Eigen::Vector3d jitter_center{0.2, 0.2, 0.1};  // fractions of l, w, h
  double jitter_lw = 0.2;
  double jitter_h = 0.1;
  double jitter_yaw = 0.2;
  double score_base = 0.3;
  double score_gain = 0.65;
  double score_scale_points = 40.0;
  double score_noise = 0.05;
  double clutter_per_frame = 0.0;
  double clutter_score_max = 0.5;

  // Same world, perfect detector.
  static SimConfig noiseless();
};

enum class Motion : std::uint8_t { Static = 0, ConstantVelocity = 1, Turn = 2 };

struct ObjectSpec {
  std::uint64_t id = 0;
  ObjectClass cls = ObjectClass::Vehicle;
  double l = 1.0, w = 1.0, h = 1.0;
  Eigen::Vector2d start{0.0, 0.0};
  double yaw0 = 0.0;
  double speed = 0.0;
  double yaw_rate = 0.0;
  Motion motion = Motion::Static;
  int spawn_frame = 0;
  int exit_frame = 0;  // inclusive
  int occlusion_begin = -1;
  int occlusion_end = -1;  // inclusive
  int late_detection_frames = 0;

  Box7 box_at(double t) const;
};

struct SequenceWorld {
  std::string sequence_id;
  std::vector<ObjectSpec> objects;
  tracking::SequenceDetections detections;
  std::vector<assignment::GtTrack> gt;  // GT boxes only where the object has points
  std::vector<std::vector<char>> gt_detected;  // per GT track and entry
  std::size_t clutter = 0;
  InMemoryFrames frames;
};

std::string sequence_name(int index);

std::vector<ObjectSpec> sample_objects(const SimConfig& cfg, int seq_index);

// Area-weighted samples on the top and four sides of the (inset) box.
PointCloud sample_shell(const Box7& box, std::size_t n, double inset, double noise, CounterRng& rng);

std::size_t expected_points(const SimConfig& cfg, ObjectClass cls, const Box7& box, double range_m);

double drop_probability(const SimConfig& cfg, std::size_t points);
double detection_score(const SimConfig& cfg, std::size_t points, CounterRng& rng);

SequenceWorld generate_sequence(const SimConfig& cfg, int seq_index);

struct Scorecard {
  std::size_t sequences = 0;
  std::size_t frames = 0;
  std::array<std::size_t, 3> objects{};
  std::array<std::size_t, 3> gt_boxes{};
  std::array<std::size_t, 3> detections{};
  std::size_t clutter = 0;
  std::vector<std::size_t> point_counts;  // per GT box
  std::vector<int> dropout_spans;         // missed runs between two detections
  std::vector<int> late_starts;           // frames from first GT box to first detection
  std::size_t never_detected = 0;         // GT tracks without a single detection
  std::size_t gt_tracks = 0;
  std::size_t short_tracks = 0;  // GT span <= 100 frames

  void add(const SequenceWorld& world);
  void merge(const Scorecard& other);
  double short_track_fraction() const;
  double point_quantile(double q) const;
  std::string render_text() const;
  std::string render_json() const;
};

}  // namespace offtrack::sim
