#pragma once

#include <cmath>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"
#include "tracking.hpp"

namespace offtrack::testing {

inline Box7 box(double cx, double cy, double cz, double l, double w, double h, double yaw = 0.0) {
  return Box7{cx, cy, cz, l, w, h, yaw};
}

// Empty sequence with identity ego poses at 10 Hz.
inline tracking::SequenceDetections empty_sequence(int frames, const char* id = "seq") {
  tracking::SequenceDetections seq;
  seq.sequence_id = id;
  for (int f = 0; f < frames; ++f) {
    tracking::FrameDetections fr;
    fr.frame_index = f;
    fr.timestamp = 0.1 * f;
    seq.frames.push_back(fr);
  }
  return seq;
}

inline void add_detection(tracking::SequenceDetections& seq, int frame, const Box7& b,
                          ObjectClass cls = ObjectClass::Vehicle, double score = 0.9) {
  seq.frames[static_cast<std::size_t>(frame)].detections.push_back({b, cls, score, frame});
}

inline Box7 random_box(CounterRng& rng, double spread = 3.0) {
  return box(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-0.5, 0.5),
             rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.5), rng.uniform(-kPi, kPi));
}

inline PointCloud random_cloud(CounterRng& rng, std::size_t n, double spread = 1.0) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.push_back({rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-spread, spread)});
  }
  return c;
}

// Independent membership test: rotate into the box frame by hand.
inline bool inside_oracle(const Box7& b, const Eigen::Vector3d& p, const Eigen::Vector3d& margin = {0, 0, 0}) {
  const double dx = p.x() - b.cx;
  const double dy = p.y() - b.cy;
  const double lx = std::cos(b.yaw) * dx + std::sin(b.yaw) * dy;
  const double ly = -std::sin(b.yaw) * dx + std::cos(b.yaw) * dy;
  const double lz = p.z() - b.cz;
  return std::abs(lx) < (b.l + margin.x()) / 2 && std::abs(ly) < (b.w + margin.y()) / 2 &&
         std::abs(lz) < (b.h + margin.z()) / 2;
}

// Stratified (jittered-grid) Monte-Carlo estimate of iou3d: n^3 samples in box a.
inline double iou3d_sampled(const Box7& a, const Box7& b, int n, CounterRng& rng) {
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  std::size_t inside = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const double u = ((i + rng.uniform()) / n - 0.5) * a.l;
        const double v = ((j + rng.uniform()) / n - 0.5) * a.w;
        const double w = ((k + rng.uniform()) / n - 0.5) * a.h;
        const Eigen::Vector3d p{a.cx + c * u - s * v, a.cy + s * u + c * v, a.cz + w};
        if (inside_oracle(b, p)) ++inside;
      }
    }
  }
  const double va = a.l * a.w * a.h;
  const double inter = va * static_cast<double>(inside) / (static_cast<double>(n) * n * n);
  return inter / (va + b.l * b.w * b.h - inter);
}

}  // namespace offtrack::testing
