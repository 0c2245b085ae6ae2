#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "assignment.hpp"
#include "dataset.hpp"
#include "frames.hpp"
#include "geometry.hpp"
#include "tracking.hpp"

namespace offtrack::io {

namespace fs = std::filesystem;

// One line of a detections / tracks / GT file.
struct DetectionRecord {
  std::string sequence_id;
  std::uint32_t frame_index = 0;
  double timestamp_s = 0.0;
  ObjectClass cls = ObjectClass::Vehicle;
  Box7 box;
  double score = 0.0;
  std::optional<std::uint64_t> track_id;
  std::optional<tracking::Origin> origin;
  std::optional<std::uint32_t> num_points;
};

std::string to_json_line(const DetectionRecord& r);
// Throws SchemaError naming `source` and `line_no`.
DetectionRecord parse_record(std::string_view line, const std::string& source, std::size_t line_no);

std::vector<DetectionRecord> read_records(const fs::path& path);
void write_records(const fs::path& path, std::span<const DetectionRecord> records);

// LPC1 point frame: magic, u16 version, u32 count, count x 4 f32 (x y z intensity),
// then the ego pose as 12 f64 (row-major rotation, translation). Little endian.
inline constexpr std::uint16_t kPointFrameVersion = 1;
std::vector<std::uint8_t> encode_point_frame(const PointFrame& frame);
PointFrame decode_point_frame(std::span<const std::uint8_t> bytes, const std::string& source, int frame_index);
void write_point_frame(const fs::path& path, const PointFrame& frame);
PointFrame read_point_frame(const fs::path& path, int frame_index);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

struct SequenceInfo {
  std::string id;
  double hz = 10.0;
  std::vector<double> timestamps;  // per frame
  std::vector<RigidPose> ego_poses;

  int num_frames() const { return static_cast<int>(timestamps.size()); }
};

struct Manifest {
  std::vector<SequenceInfo> sequences;

  const SequenceInfo* find(std::string_view id) const;
};

Manifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const Manifest& manifest);

fs::path point_frame_path(const fs::path& corpus_dir, std::string_view sequence_id, int frame_index);

// Record grouping. Tracks need track_id on every record.
std::vector<DetectionRecord> track_records(const SequenceInfo& info, std::span<const tracking::Tracklet> tracks);
std::map<std::string, std::vector<tracking::Tracklet>> group_tracks(std::span<const DetectionRecord> records,
                                                                    const std::string& source);
std::vector<DetectionRecord> gt_records(const SequenceInfo& info, std::span<const assignment::GtTrack> gt);
std::map<std::string, std::vector<assignment::GtTrack>> group_gt(std::span<const DetectionRecord> records,
                                                                 const std::string& source);
tracking::SequenceDetections sequence_detections(const SequenceInfo& info, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> detection_records(const tracking::SequenceDetections& seq);

// Sample container: "TSMP", u16 version, then records of (u64 byte length, payload).
inline constexpr std::uint16_t kSampleVersion = 1;
std::vector<std::uint8_t> encode_sample(const dataset::TrackSample& sample);
dataset::TrackSample decode_sample(std::span<const std::uint8_t> bytes, const std::string& source);

class SampleWriter {
 public:
  explicit SampleWriter(const fs::path& path);
  void write(const dataset::TrackSample& sample);
  void write_encoded(std::span<const std::uint8_t> payload);  // from encode_sample
  void close();
  std::size_t count() const { return count_; }

 private:
  fs::path path_;
  std::vector<std::uint8_t> buffer_;
  std::size_t count_ = 0;
};

std::vector<dataset::TrackSample> read_samples(const fs::path& path);

}  // namespace offtrack::io
