#pragma once

#include <vector>

#include "geometry.hpp"

namespace offtrack {

// One LiDAR sweep in world coordinates with the ego pose at capture time.
struct PointFrame {
  int frame_index = 0;
  RigidPose ego_pose;
  PointCloud points;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  // nullptr when the frame has no point data.
  virtual const PointFrame* frame(int frame_index) const = 0;
};

class InMemoryFrames final : public FrameSource {
 public:
  InMemoryFrames() = default;
  explicit InMemoryFrames(std::vector<PointFrame> frames) : frames_(std::move(frames)) {}

  const PointFrame* frame(int frame_index) const override {
    if (frame_index >= 0 && static_cast<std::size_t>(frame_index) < frames_.size() &&
        frames_[static_cast<std::size_t>(frame_index)].frame_index == frame_index) {
      return &frames_[static_cast<std::size_t>(frame_index)];
    }
    for (const auto& f : frames_) {
      if (f.frame_index == frame_index) return &f;
    }
    return nullptr;
  }

  void add(PointFrame frame) { frames_.push_back(std::move(frame)); }
  const std::vector<PointFrame>& frames() const { return frames_; }

 private:
  std::vector<PointFrame> frames_;
};

}  // namespace offtrack
