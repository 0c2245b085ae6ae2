#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace offtrack {

inline constexpr double kPi = 3.14159265358979323846;

// Maps any angle to (-pi, pi].
double normalize_yaw(double yaw);

enum class ObjectClass : std::uint8_t { Vehicle = 0, Pedestrian = 1, Cyclist = 2 };

inline constexpr std::array<ObjectClass, 3> kAllClasses{ObjectClass::Vehicle, ObjectClass::Pedestrian,
                                                        ObjectClass::Cyclist};

std::string_view to_string(ObjectClass cls);
std::optional<ObjectClass> parse_class(std::string_view name);

// Oriented 3D box: center, extent along heading (l), across (w), vertical (h), heading yaw.
struct Box7 {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double l = 1.0, w = 1.0, h = 1.0;
  double yaw = 0.0;

  Eigen::Vector3d center() const { return {cx, cy, cz}; }
  void set_center(const Eigen::Vector3d& c) {
    cx = c.x();
    cy = c.y();
    cz = c.z();
  }
  double volume() const { return l * w * h; }
  bool valid() const;

  friend bool operator==(const Box7&, const Box7&) = default;
};

struct LabeledBox {
  Box7 box;
  ObjectClass cls = ObjectClass::Vehicle;
  double score = 1.0;
  int frame_index = 0;
};

// Rigid transform x -> R x + t.
class RigidPose {
 public:
  RigidPose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  RigidPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidPose identity() { return {}; }
  static RigidPose from_yaw(double yaw, const Eigen::Vector3d& translation);
  // Row-major rotation followed by translation.
  static RigidPose from_array(std::span<const double, 12> values);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }
  RigidPose inverse() const;
  // (a * b).apply(x) == a.apply(b.apply(x))
  RigidPose operator*(const RigidPose& other) const;

  // Heading of the transformed +x axis projected on the ground plane.
  double yaw() const;
  // Projects the rotation back onto SO(3).
  void renormalize();
  bool is_rigid(double tol) const;
  std::array<double, 12> to_array() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// Structure-of-arrays point cloud. Extra per-point channels are addressed by name
// and travel with the points through selection and concatenation.
class PointCloud {
 public:
  struct Channel {
    std::string name;
    std::vector<double> values;
  };

  std::size_t size() const { return positions_.size(); }
  bool empty() const { return positions_.empty(); }
  void reserve(std::size_t n);

  // Appends a point; extra channels are zero-filled.
  void push_back(const Eigen::Vector3d& p, double intensity = 0.0);

  const std::vector<Eigen::Vector3d>& positions() const { return positions_; }
  std::vector<Eigen::Vector3d>& positions() { return positions_; }
  const std::vector<double>& intensity() const { return intensity_; }
  std::vector<double>& intensity() { return intensity_; }

  // Adds a channel initialized to `fill`; returns its values. Existing channels are reset.
  std::vector<double>& add_channel(const std::string& name, double fill = 0.0);
  bool has_channel(std::string_view name) const;
  const std::vector<double>& channel(std::string_view name) const;
  std::vector<double>& channel(std::string_view name);
  const std::vector<Channel>& channels() const { return channels_; }

  PointCloud select(std::span<const std::size_t> indices) const;
  // Channels missing on either side are zero-filled.
  void append(const PointCloud& other);

 private:
  std::vector<Eigen::Vector3d> positions_;
  std::vector<double> intensity_;
  std::vector<Channel> channels_;
};

// Ground-plane rectangle corners, counter-clockwise.
std::array<Eigen::Vector2d, 4> bev_corners(const Box7& box);

// Area of the intersection of the two yaw-rotated footprints.
double bev_intersection_area(const Box7& a, const Box7& b);

double bev_iou(const Box7& a, const Box7& b);
double iou3d(const Box7& a, const Box7& b);

// Strict containment in the box enlarged by `margin` per dimension (half per side).
bool contains_point(const Box7& box, const Eigen::Vector3d& margin, const Eigen::Vector3d& p);
std::vector<std::size_t> crop_indices(const Box7& box, const Eigen::Vector3d& margin, const PointCloud& cloud);
PointCloud crop_points(const Box7& box, const Eigen::Vector3d& margin, const PointCloud& cloud);
std::size_t count_points_in(const Box7& box, const Eigen::Vector3d& margin, const PointCloud& cloud);

// Pose mapping world coordinates into the box frame (center at origin, heading along +x).
RigidPose to_canonical(const Box7& box);
// Pose mapping box-frame coordinates into the world (inverse of to_canonical).
RigidPose box_pose(const Box7& box);

Box7 apply_pose(const RigidPose& pose, const Box7& box);
PointCloud apply_pose(const RigidPose& pose, const PointCloud& cloud);

}  // namespace offtrack
