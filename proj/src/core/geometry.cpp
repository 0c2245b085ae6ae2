#include "geometry.hpp"

#include <algorithm>
#include <tuple>
#include <cmath>

#include <Eigen/SVD>

#include "error.hpp"

namespace offtrack {

namespace {

constexpr double kClipEps = 1e-9;
constexpr double kMinArea = 1e-12;

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    twice += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return std::abs(twice) * 0.5;
}

// Keeps the part of `poly` left of the directed line a->b. Points within
// kClipEps of the line count as inside.
std::vector<Eigen::Vector2d> clip_half_plane(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& a,
                                             const Eigen::Vector2d& b) {
  std::vector<Eigen::Vector2d> out;
  if (poly.empty()) return out;
  const Eigen::Vector2d edge = b - a;
  const double len = edge.norm();
  auto dist = [&](const Eigen::Vector2d& p) { return cross2(edge, p - a) / len; };

  out.reserve(poly.size() + 2);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d& cur = poly[i];
    const Eigen::Vector2d& nxt = poly[(i + 1) % poly.size()];
    const double dc = dist(cur);
    const double dn = dist(nxt);
    const bool cur_in = dc >= -kClipEps;
    const bool nxt_in = dn >= -kClipEps;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = dc / (dc - dn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

Eigen::Matrix3d rot_z(double yaw) {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

}  // namespace

double normalize_yaw(double yaw) {
  double r = std::remainder(yaw, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

std::string_view to_string(ObjectClass cls) {
  switch (cls) {
    case ObjectClass::Vehicle:
      return "Vehicle";
    case ObjectClass::Pedestrian:
      return "Pedestrian";
    case ObjectClass::Cyclist:
      return "Cyclist";
  }
  return "Unknown";
}

std::optional<ObjectClass> parse_class(std::string_view name) {
  for (ObjectClass c : kAllClasses) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

bool Box7::valid() const {
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(cz) && std::isfinite(yaw) && l > 0.0 && w > 0.0 &&
         h > 0.0;
}

RigidPose RigidPose::from_yaw(double yaw, const Eigen::Vector3d& translation) {
  return RigidPose(rot_z(yaw), translation);
}

RigidPose RigidPose::from_array(std::span<const double, 12> v) {
  Eigen::Matrix3d r;
  r << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return RigidPose(r, Eigen::Vector3d(v[9], v[10], v[11]));
}

RigidPose RigidPose::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return RigidPose(rt, -rt * translation_);
}

RigidPose RigidPose::operator*(const RigidPose& other) const {
  return RigidPose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

double RigidPose::yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

void RigidPose::renormalize() {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  rotation_ = u * v.transpose();
}

bool RigidPose::is_rigid(double tol) const {
  const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol && translation_.allFinite();
}

std::array<double, 12> RigidPose::to_array() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r * 3 + c)] = rotation_(r, c);
  }
  out[9] = translation_.x();
  out[10] = translation_.y();
  out[11] = translation_.z();
  return out;
}

void PointCloud::reserve(std::size_t n) {
  positions_.reserve(n);
  intensity_.reserve(n);
  for (auto& ch : channels_) ch.values.reserve(n);
}

void PointCloud::push_back(const Eigen::Vector3d& p, double intensity) {
  positions_.push_back(p);
  intensity_.push_back(intensity);
  for (auto& ch : channels_) ch.values.push_back(0.0);
}

std::vector<double>& PointCloud::add_channel(const std::string& name, double fill) {
  for (auto& ch : channels_) {
    if (ch.name == name) {
      ch.values.assign(size(), fill);
      return ch.values;
    }
  }
  channels_.push_back({name, std::vector<double>(size(), fill)});
  return channels_.back().values;
}

bool PointCloud::has_channel(std::string_view name) const {
  return std::any_of(channels_.begin(), channels_.end(), [&](const Channel& c) { return c.name == name; });
}

const std::vector<double>& PointCloud::channel(std::string_view name) const {
  for (const auto& ch : channels_) {
    if (ch.name == name) return ch.values;
  }
  throw Error("missing_channel", "point cloud has no channel '" + std::string(name) + "'");
}

std::vector<double>& PointCloud::channel(std::string_view name) {
  return const_cast<std::vector<double>&>(std::as_const(*this).channel(name));
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.positions_.reserve(indices.size());
  out.intensity_.reserve(indices.size());
  for (std::size_t i : indices) {
    out.positions_.push_back(positions_[i]);
    out.intensity_.push_back(intensity_[i]);
  }
  for (const auto& ch : channels_) {
    Channel c{ch.name, {}};
    c.values.reserve(indices.size());
    for (std::size_t i : indices) c.values.push_back(ch.values[i]);
    out.channels_.push_back(std::move(c));
  }
  return out;
}

void PointCloud::append(const PointCloud& other) {
  const std::size_t old = size();
  for (const auto& ch : other.channels_) {
    if (!has_channel(ch.name)) channels_.push_back({ch.name, std::vector<double>(old, 0.0)});
  }
  positions_.insert(positions_.end(), other.positions_.begin(), other.positions_.end());
  intensity_.insert(intensity_.end(), other.intensity_.begin(), other.intensity_.end());
  for (auto& ch : channels_) {
    if (other.has_channel(ch.name)) {
      const auto& src = other.channel(ch.name);
      ch.values.insert(ch.values.end(), src.begin(), src.end());
    } else {
      ch.values.resize(size(), 0.0);
    }
  }
}

std::array<Eigen::Vector2d, 4> bev_corners(const Box7& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.l * 0.5;
  const double hw = box.w * 0.5;
  const std::array<Eigen::Vector2d, 4> local{Eigen::Vector2d(hl, hw), Eigen::Vector2d(-hl, hw),
                                             Eigen::Vector2d(-hl, -hw), Eigen::Vector2d(hl, -hw)};
  std::array<Eigen::Vector2d, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = Eigen::Vector2d(box.cx + c * local[i].x() - s * local[i].y(), box.cy + s * local[i].x() + c * local[i].y());
  }
  return out;
}

double bev_intersection_area(const Box7& first, const Box7& second) {
  // Clip in a fixed argument order so the result is bitwise symmetric.
  const auto key = [](const Box7& x) { return std::tie(x.cx, x.cy, x.cz, x.l, x.w, x.h, x.yaw); };
  const bool swap = key(second) < key(first);
  const Box7& a = swap ? second : first;
  const Box7& b = swap ? first : second;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  // Cheap reject on circumscribed circles.
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > ra + rb) return 0.0;

  std::vector<Eigen::Vector2d> poly(ca.begin(), ca.end());
  for (std::size_t i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_half_plane(poly, cb[i], cb[(i + 1) % 4]);
  }
  const double area = polygon_area(poly);
  return area < kMinArea ? 0.0 : area;
}

double bev_iou(const Box7& a, const Box7& b) {
  if (a == b) return a.l * a.w > 0.0 ? 1.0 : 0.0;
  const double inter = bev_intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.l * a.w + b.l * b.w - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d(const Box7& a, const Box7& b) {
  if (a == b) return a.volume() > 0.0 ? 1.0 : 0.0;
  const double z_overlap =
      std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h) - std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  if (z_overlap <= 0.0) return 0.0;
  const double bev = bev_intersection_area(a, b);
  const double inter = bev * z_overlap;
  if (inter < kMinArea) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains_point(const Box7& box, const Eigen::Vector3d& margin, const Eigen::Vector3d& p) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double dx = p.x() - box.cx;
  const double dy = p.y() - box.cy;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  const double lz = p.z() - box.cz;
  return std::abs(lx) < 0.5 * (box.l + margin.x()) && std::abs(ly) < 0.5 * (box.w + margin.y()) &&
         std::abs(lz) < 0.5 * (box.h + margin.z());
}

std::vector<std::size_t> crop_indices(const Box7& box, const Eigen::Vector3d& margin, const PointCloud& cloud) {
  std::vector<std::size_t> idx;
  const double reach = 0.5 * Eigen::Vector3d(box.l + margin.x(), box.w + margin.y(), box.h + margin.z()).norm();
  const Eigen::Vector3d center = box.center();
  const auto& pts = cloud.positions();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if ((pts[i] - center).cwiseAbs().maxCoeff() > reach) continue;
    if (contains_point(box, margin, pts[i])) idx.push_back(i);
  }
  return idx;
}

PointCloud crop_points(const Box7& box, const Eigen::Vector3d& margin, const PointCloud& cloud) {
  const auto idx = crop_indices(box, margin, cloud);
  return cloud.select(idx);
}

std::size_t count_points_in(const Box7& box, const Eigen::Vector3d& margin, const PointCloud& cloud) {
  return crop_indices(box, margin, cloud).size();
}

RigidPose to_canonical(const Box7& box) { return box_pose(box).inverse(); }

RigidPose box_pose(const Box7& box) { return RigidPose::from_yaw(box.yaw, box.center()); }

Box7 apply_pose(const RigidPose& pose, const Box7& box) {
  Box7 out = box;
  out.set_center(pose.apply(box.center()));
  const Eigen::Vector3d heading = pose.rotation() * Eigen::Vector3d(std::cos(box.yaw), std::sin(box.yaw), 0.0);
  out.yaw = normalize_yaw(std::atan2(heading.y(), heading.x()));
  return out;
}

PointCloud apply_pose(const RigidPose& pose, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.positions()) p = pose.apply(p);
  return out;
}

}  // namespace offtrack
