#include "io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace offtrack::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr char kPointMagic[4] = {'L', 'P', 'C', '1'};
constexpr char kSampleMagic[4] = {'T', 'S', 'M', 'P'};
constexpr std::size_t kPointHeader = 10;
constexpr std::size_t kPoseBytes = 96;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_pose(std::vector<std::uint8_t>& out, const RigidPose& pose) {
  for (double v : pose.to_array()) put(out, v);
}

void put_box(std::vector<std::uint8_t>& out, const Box7& b) {
  for (double v : {b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw}) put(out, v);
}

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  RigidPose get_pose() {
    std::array<double, 12> a;
    for (double& v : a) v = get<double>();
    return RigidPose::from_array(a);
  }

  Box7 get_box() {
    Box7 b;
    b.cx = get<double>();
    b.cy = get<double>();
    b.cz = get<double>();
    b.l = get<double>();
    b.w = get<double>();
    b.h = get<double>();
    b.yaw = get<double>();
    return b;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaError(source_ + ": offset " + std::to_string(pos_) + ": " + what);
  }

  void expect_end() const {
    if (pos_ != bytes_.size()) fail(std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated record");
  }

  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

[[noreturn]] void schema(const std::string& source, std::size_t line_no, const std::string& what) {
  throw SchemaError(source + ":" + std::to_string(line_no) + ": " + what);
}

double number_field(const json& j, const char* key, const std::string& src, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) schema(src, line, std::string("missing field '") + key + "'");
  if (!it->is_number()) schema(src, line, std::string("field '") + key + "' must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) schema(src, line, std::string("field '") + key + "' must be finite");
  return v;
}

std::uint64_t unsigned_field(const json& j, const char* key, const std::string& src, std::size_t line,
                             std::uint64_t max) {
  auto it = j.find(key);
  if (it == j.end()) schema(src, line, std::string("missing field '") + key + "'");
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    schema(src, line, std::string("field '") + key + "' must be a non-negative integer");
  }
  const auto v = it->get<std::uint64_t>();
  if (v > max) schema(src, line, std::string("field '") + key + "' out of range");
  return v;
}

std::string string_field(const json& j, const char* key, const std::string& src, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) schema(src, line, std::string("missing field '") + key + "'");
  if (!it->is_string()) schema(src, line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::array<double, 12> pose_array(const json& j, const std::string& src, std::size_t line) {
  if (!j.is_array() || j.size() != 12) schema(src, line, "ego_pose must hold 12 numbers");
  std::array<double, 12> a{};
  for (std::size_t i = 0; i < 12; ++i) {
    if (!j[i].is_number()) schema(src, line, "ego_pose must hold 12 numbers");
    a[i] = j[i].get<double>();
  }
  return a;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::string to_json_line(const DetectionRecord& r) {
  ordered_json j;
  j["sequence_id"] = r.sequence_id;
  j["frame_index"] = r.frame_index;
  j["timestamp_s"] = r.timestamp_s;
  j["class"] = to_string(r.cls);
  j["box"] = {r.box.cx, r.box.cy, r.box.cz, r.box.l, r.box.w, r.box.h, r.box.yaw};
  j["score"] = r.score;
  if (r.track_id) j["track_id"] = *r.track_id;
  if (r.origin) j["origin"] = to_string(*r.origin);
  if (r.num_points) j["num_points"] = *r.num_points;
  return j.dump();
}

DetectionRecord parse_record(std::string_view line, const std::string& source, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    schema(source, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) schema(source, line_no, "record must be a JSON object");
  static const std::set<std::string> kKnown{"sequence_id", "frame_index", "timestamp_s", "class", "box",
                                            "score",       "track_id",    "origin",      "num_points"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key)) schema(source, line_no, "unknown field '" + key + "'");
  }

  DetectionRecord r;
  r.sequence_id = string_field(j, "sequence_id", source, line_no);
  r.frame_index = static_cast<std::uint32_t>(unsigned_field(j, "frame_index", source, line_no, 0xffffffffULL));
  r.timestamp_s = number_field(j, "timestamp_s", source, line_no);
  const std::string cls = string_field(j, "class", source, line_no);
  const auto parsed = parse_class(cls);
  if (!parsed) schema(source, line_no, "unknown class '" + cls + "'");
  r.cls = *parsed;

  auto box = j.find("box");
  if (box == j.end() || !box->is_array() || box->size() != 7) schema(source, line_no, "box must hold 7 numbers");
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 7; ++i) {
    if (!(*box)[i].is_number()) schema(source, line_no, "box must hold 7 numbers");
    v[i] = (*box)[i].get<double>();
    if (!std::isfinite(v[i])) schema(source, line_no, "box values must be finite");
  }
  r.box = Box7{v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  if (!(r.box.l > 0.0 && r.box.w > 0.0 && r.box.h > 0.0)) schema(source, line_no, "box sizes must be positive");
  if (!(r.box.yaw > -kPi && r.box.yaw <= kPi)) schema(source, line_no, "yaw must lie in (-pi, pi]");

  r.score = number_field(j, "score", source, line_no);
  if (r.score < 0.0 || r.score > 1.0) schema(source, line_no, "score must lie in [0, 1]");
  if (j.contains("track_id")) r.track_id = unsigned_field(j, "track_id", source, line_no, ~std::uint64_t{0});
  if (j.contains("origin")) {
    const std::string o = string_field(j, "origin", source, line_no);
    r.origin = tracking::parse_origin(o);
    if (!r.origin) schema(source, line_no, "unknown origin '" + o + "'");
  }
  if (j.contains("num_points")) {
    r.num_points = static_cast<std::uint32_t>(unsigned_field(j, "num_points", source, line_no, 0xffffffffULL));
  }
  return r;
}

std::vector<DetectionRecord> read_records(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = split_lines(text);
  std::vector<DetectionRecord> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) schema(path.string(), i + 1, "empty line");
    out.push_back(parse_record(lines[i], path.string(), i + 1));
  }
  return out;
}

void write_records(const fs::path& path, std::span<const DetectionRecord> records) {
  std::string text;
  for (const auto& r : records) {
    text += to_json_line(r);
    text += '\n';
  }
  write_text(path, text);
}

std::vector<std::uint8_t> encode_point_frame(const PointFrame& frame) {
  const auto& pts = frame.points.positions();
  const auto& inten = frame.points.intensity();
  std::vector<std::uint8_t> out;
  out.reserve(kPointHeader + 16 * pts.size() + kPoseBytes);
  out.insert(out.end(), kPointMagic, kPointMagic + 4);
  put(out, kPointFrameVersion);
  put(out, static_cast<std::uint32_t>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    put(out, static_cast<float>(pts[i].x()));
    put(out, static_cast<float>(pts[i].y()));
    put(out, static_cast<float>(pts[i].z()));
    put(out, static_cast<float>(inten[i]));
  }
  put_pose(out, frame.ego_pose);
  return out;
}

PointFrame decode_point_frame(std::span<const std::uint8_t> bytes, const std::string& source, int frame_index) {
  ByteReader r(bytes, source);
  if (r.get_string(4) != std::string(kPointMagic, 4)) r.fail("bad magic, expected LPC1");
  const auto version = r.get<std::uint16_t>();
  if (version != kPointFrameVersion) r.fail("unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  const std::size_t expected = kPointHeader + 16 * static_cast<std::size_t>(count) + kPoseBytes;
  if (bytes.size() != expected) {
    throw SchemaError(source + ": length " + std::to_string(bytes.size()) + " does not match " +
                      std::to_string(expected) + " for " + std::to_string(count) + " points");
  }
  PointFrame f;
  f.frame_index = frame_index;
  f.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const float x = r.get<float>();
    const float y = r.get<float>();
    const float z = r.get<float>();
    const float in = r.get<float>();
    f.points.push_back(Eigen::Vector3d(x, y, z), in);
  }
  f.ego_pose = r.get_pose();
  r.expect_end();
  return f;
}

void write_point_frame(const fs::path& path, const PointFrame& frame) { write_bytes(path, encode_point_frame(frame)); }

PointFrame read_point_frame(const fs::path& path, int frame_index) {
  return decode_point_frame(read_bytes(path), path.string(), frame_index);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

const SequenceInfo* Manifest::find(std::string_view id) const {
  for (const auto& s : sequences) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

Manifest read_manifest(const fs::path& path) {
  const std::string src = path.string();
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(src + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "offtrack-corpus") {
    throw SchemaError(src + ": not a corpus manifest");
  }
  if (!j.contains("sequences") || !j["sequences"].is_array()) throw SchemaError(src + ": missing sequences");
  Manifest m;
  std::size_t idx = 0;
  for (const auto& s : j["sequences"]) {
    ++idx;
    if (!s.is_object()) schema(src, idx, "sequence entry must be an object");
    SequenceInfo info;
    info.id = string_field(s, "id", src, idx);
    info.hz = number_field(s, "hz", src, idx);
    if (!(info.hz > 0.0)) schema(src, idx, "hz must be positive");
    if (!s.contains("frames") || !s["frames"].is_array()) schema(src, idx, "missing frames");
    for (const auto& f : s["frames"]) {
      const double t = number_field(f, "timestamp_s", src, idx);
      if (!info.timestamps.empty() && !(t > info.timestamps.back())) {
        schema(src, idx, "timestamps must be strictly increasing");
      }
      info.timestamps.push_back(t);
      if (!f.contains("ego_pose")) schema(src, idx, "missing ego_pose");
      info.ego_poses.push_back(RigidPose::from_array(pose_array(f["ego_pose"], src, idx)));
    }
    if (m.find(info.id) != nullptr) schema(src, idx, "duplicate sequence id '" + info.id + "'");
    m.sequences.push_back(std::move(info));
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  ordered_json j;
  j["format"] = "offtrack-corpus";
  j["version"] = 1;
  j["sequences"] = ordered_json::array();
  for (const auto& s : manifest.sequences) {
    ordered_json e;
    e["id"] = s.id;
    e["hz"] = s.hz;
    e["frames"] = ordered_json::array();
    for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
      e["frames"].push_back({{"timestamp_s", s.timestamps[i]}, {"ego_pose", s.ego_poses[i].to_array()}});
    }
    j["sequences"].push_back(std::move(e));
  }
  write_text(path, j.dump(1) + "\n");
}

fs::path point_frame_path(const fs::path& corpus_dir, std::string_view sequence_id, int frame_index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.lpc", frame_index);
  return corpus_dir / "points" / std::string(sequence_id) / name;
}

std::vector<DetectionRecord> track_records(const SequenceInfo& info, std::span<const tracking::Tracklet> tracks) {
  std::vector<DetectionRecord> out;
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) {
      DetectionRecord r;
      r.sequence_id = info.id;
      r.frame_index = static_cast<std::uint32_t>(e.frame_index);
      r.timestamp_s = e.frame_index < info.num_frames() ? info.timestamps[static_cast<std::size_t>(e.frame_index)]
                                                        : static_cast<double>(e.frame_index) / info.hz;
      r.cls = t.cls;
      r.box = e.box;
      r.score = std::clamp(e.score, 0.0, 1.0);
      r.track_id = t.track_id;
      r.origin = e.origin;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::map<std::string, std::vector<tracking::Tracklet>> group_tracks(std::span<const DetectionRecord> records,
                                                                    const std::string& source) {
  std::map<std::string, std::map<std::uint64_t, tracking::Tracklet>> grouped;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.track_id) schema(source, i + 1, "track records need a track_id");
    auto [it, fresh] = grouped[r.sequence_id].try_emplace(*r.track_id);
    tracking::Tracklet& t = it->second;
    if (fresh) {
      t.track_id = *r.track_id;
      t.cls = r.cls;
    } else if (t.cls != r.cls) {
      schema(source, i + 1, "track " + std::to_string(*r.track_id) + " changes class");
    }
    t.entries.push_back({static_cast<int>(r.frame_index), r.box, r.score, r.origin.value_or(tracking::Origin::Detected)});
  }
  std::map<std::string, std::vector<tracking::Tracklet>> out;
  for (auto& [seq, tracks] : grouped) {
    auto& list = out[seq];
    for (auto& [id, t] : tracks) {
      std::stable_sort(t.entries.begin(), t.entries.end(),
                       [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
      for (std::size_t k = 1; k < t.entries.size(); ++k) {
        if (t.entries[k].frame_index == t.entries[k - 1].frame_index) {
          throw SchemaError(source + ": track " + std::to_string(id) + " in " + seq + " repeats frame " +
                            std::to_string(t.entries[k].frame_index));
        }
      }
      list.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<DetectionRecord> gt_records(const SequenceInfo& info, std::span<const assignment::GtTrack> gt) {
  std::vector<DetectionRecord> out;
  for (const auto& g : gt) {
    for (const auto& e : g.entries) {
      DetectionRecord r;
      r.sequence_id = info.id;
      r.frame_index = static_cast<std::uint32_t>(e.frame_index);
      r.timestamp_s = info.timestamps[static_cast<std::size_t>(e.frame_index)];
      r.cls = g.cls;
      r.box = e.box;
      r.score = 1.0;
      r.track_id = g.gt_track_id;
      r.num_points = static_cast<std::uint32_t>(std::max(e.num_points, 0));
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::map<std::string, std::vector<assignment::GtTrack>> group_gt(std::span<const DetectionRecord> records,
                                                                 const std::string& source) {
  std::map<std::string, std::map<std::uint64_t, assignment::GtTrack>> grouped;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.track_id) schema(source, i + 1, "GT records need a track_id");
    auto [it, fresh] = grouped[r.sequence_id].try_emplace(*r.track_id);
    assignment::GtTrack& g = it->second;
    if (fresh) {
      g.gt_track_id = *r.track_id;
      g.cls = r.cls;
    }
    g.entries.push_back({static_cast<int>(r.frame_index), r.box, static_cast<int>(r.num_points.value_or(0))});
  }
  std::map<std::string, std::vector<assignment::GtTrack>> out;
  for (auto& [seq, tracks] : grouped) {
    for (auto& [id, g] : tracks) {
      std::stable_sort(g.entries.begin(), g.entries.end(),
                       [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
      out[seq].push_back(std::move(g));
    }
  }
  return out;
}

tracking::SequenceDetections sequence_detections(const SequenceInfo& info, std::span<const DetectionRecord> records) {
  tracking::SequenceDetections seq;
  seq.sequence_id = info.id;
  seq.frames.resize(static_cast<std::size_t>(info.num_frames()));
  for (int f = 0; f < info.num_frames(); ++f) {
    auto& fr = seq.frames[static_cast<std::size_t>(f)];
    fr.frame_index = f;
    fr.timestamp = info.timestamps[static_cast<std::size_t>(f)];
    fr.ego_pose = info.ego_poses[static_cast<std::size_t>(f)];
  }
  for (const auto& r : records) {
    if (r.sequence_id != info.id) continue;
    if (static_cast<int>(r.frame_index) >= info.num_frames()) {
      throw SchemaError("detection at frame " + std::to_string(r.frame_index) + " beyond the end of " + info.id);
    }
    seq.frames[r.frame_index].detections.push_back({r.box, r.cls, r.score, static_cast<int>(r.frame_index)});
  }
  return seq;
}

std::vector<DetectionRecord> detection_records(const tracking::SequenceDetections& seq) {
  std::vector<DetectionRecord> out;
  for (const auto& fr : seq.frames) {
    for (const auto& d : fr.detections) {
      DetectionRecord r;
      r.sequence_id = seq.sequence_id;
      r.frame_index = static_cast<std::uint32_t>(fr.frame_index);
      r.timestamp_s = fr.timestamp;
      r.cls = d.cls;
      r.box = d.box;
      r.score = d.score;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_sample(const dataset::TrackSample& s) {
  std::vector<std::uint8_t> out;
  put(out, static_cast<std::uint16_t>(s.sequence_id.size()));
  out.insert(out.end(), s.sequence_id.begin(), s.sequence_id.end());
  put(out, s.track_id);
  put(out, static_cast<std::uint8_t>(s.cls));
  put_pose(out, s.base_pose);
  put(out, static_cast<std::uint8_t>(s.tta.flip_x));
  put(out, static_cast<std::uint8_t>(s.tta.flip_y));
  put(out, s.tta.rotation);

  put(out, static_cast<std::uint32_t>(s.proposals.size()));
  for (const auto& p : s.proposals) {
    put(out, static_cast<std::int32_t>(p.frame_index));
    put_box(out, p.box);
    put(out, p.score);
    put(out, static_cast<std::uint8_t>(p.origin));
  }

  const auto n = s.points.size();
  const auto& pos = s.points.positions();
  const auto& inten = s.points.intensity();
  const bool has_ts = s.points.has_channel(dataset::kTimestampChannel);
  const bool has_flag = s.points.has_channel(dataset::kCurrentFrameChannel);
  const bool has_src = s.points.has_channel(dataset::kSourceFrameChannel);
  const bool has_idx = s.points.has_channel(dataset::kSourceIndexChannel);
  put(out, static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    put(out, static_cast<float>(pos[i].x()));
    put(out, static_cast<float>(pos[i].y()));
    put(out, static_cast<float>(pos[i].z()));
    put(out, static_cast<float>(inten[i]));
    put(out, static_cast<float>(has_ts ? s.points.channel(dataset::kTimestampChannel)[i] : 0.0));
    put(out, static_cast<std::uint8_t>(has_flag && s.points.channel(dataset::kCurrentFrameChannel)[i] != 0.0));
  }
  // Provenance: (source frame, raw index) per point.
  for (std::size_t i = 0; i < n; ++i) {
    put(out, static_cast<std::int32_t>(has_src ? s.points.channel(dataset::kSourceFrameChannel)[i] : -1));
    put(out, static_cast<std::uint32_t>(has_idx ? s.points.channel(dataset::kSourceIndexChannel)[i] : 0));
  }

  put(out, static_cast<std::uint8_t>(s.assignment.has_value()));
  if (s.assignment) {
    const auto& a = *s.assignment;
    put(out, a.track_id);
    put(out, static_cast<std::uint8_t>(a.matched));
    put(out, static_cast<std::uint32_t>(a.candidates.size()));
    for (const auto& [id, t] : a.candidates) {
      put(out, id);
      put(out, t);
    }
    put(out, static_cast<std::uint32_t>(a.proposals.size()));
    for (const auto& p : a.proposals) {
      put(out, static_cast<std::int32_t>(p.frame_index));
      put(out, static_cast<std::uint8_t>(p.positive()));
      if (!p.positive()) continue;
      put(out, *p.gt_track_id);
      put_box(out, p.gt_box);
      put(out, p.iou);
      put(out, p.soft_target);
      for (double v : *p.residual) put(out, v);
    }
  }
  return out;
}

dataset::TrackSample decode_sample(std::span<const std::uint8_t> bytes, const std::string& source) {
  ByteReader r(bytes, source);
  dataset::TrackSample s;
  s.sequence_id = r.get_string(r.get<std::uint16_t>());
  s.track_id = r.get<std::uint64_t>();
  const auto cls = r.get<std::uint8_t>();
  if (cls > 2) r.fail("bad class code");
  s.cls = static_cast<ObjectClass>(cls);
  s.base_pose = r.get_pose();
  s.tta.flip_x = r.get<std::uint8_t>() != 0;
  s.tta.flip_y = r.get<std::uint8_t>() != 0;
  s.tta.rotation = r.get<double>();

  const auto np = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < np; ++i) {
    dataset::Proposal p;
    p.frame_index = r.get<std::int32_t>();
    p.box = r.get_box();
    p.score = r.get<double>();
    const auto o = r.get<std::uint8_t>();
    if (o > 3) r.fail("bad origin code");
    p.origin = static_cast<tracking::Origin>(o);
    s.proposals.push_back(p);
  }

  const auto n = r.get<std::uint32_t>();
  if (r.remaining() < static_cast<std::size_t>(n) * 29) r.fail("point block truncated");
  s.points.reserve(n);
  std::vector<double> ts(n), flag(n), src(n), idx(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float x = r.get<float>();
    const float y = r.get<float>();
    const float z = r.get<float>();
    const float in = r.get<float>();
    ts[i] = r.get<float>();
    flag[i] = r.get<std::uint8_t>();
    s.points.push_back(Eigen::Vector3d(x, y, z), in);
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    src[i] = r.get<std::int32_t>();
    idx[i] = r.get<std::uint32_t>();
  }
  s.points.add_channel(std::string(dataset::kTimestampChannel)) = std::move(ts);
  s.points.add_channel(std::string(dataset::kCurrentFrameChannel)) = std::move(flag);
  s.points.add_channel(std::string(dataset::kSourceFrameChannel)) = std::move(src);
  s.points.add_channel(std::string(dataset::kSourceIndexChannel)) = std::move(idx);

  if (r.get<std::uint8_t>() != 0) {
    assignment::TrackAssignment a;
    a.track_id = r.get<std::uint64_t>();
    a.matched = r.get<std::uint8_t>() != 0;
    const auto nc = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < nc; ++i) {
      const auto id = r.get<std::uint64_t>();
      a.candidates.emplace_back(id, r.get<double>());
    }
    const auto nt = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < nt; ++i) {
      assignment::ProposalTarget t;
      t.frame_index = r.get<std::int32_t>();
      if (r.get<std::uint8_t>() != 0) {
        t.gt_track_id = r.get<std::uint64_t>();
        t.gt_box = r.get_box();
        t.iou = r.get<double>();
        t.soft_target = r.get<double>();
        assignment::Residual res;
        for (double& v : res) v = r.get<double>();
        t.residual = res;
      }
      a.proposals.push_back(t);
    }
    s.assignment = std::move(a);
  }
  r.expect_end();
  return s;
}

SampleWriter::SampleWriter(const fs::path& path) : path_(path) {
  buffer_.insert(buffer_.end(), kSampleMagic, kSampleMagic + 4);
  put(buffer_, kSampleVersion);
}

void SampleWriter::write(const dataset::TrackSample& sample) { write_encoded(encode_sample(sample)); }

void SampleWriter::write_encoded(std::span<const std::uint8_t> payload) {
  put(buffer_, static_cast<std::uint64_t>(payload.size()));
  buffer_.insert(buffer_.end(), payload.begin(), payload.end());
  ++count_;
}

void SampleWriter::close() { write_bytes(path_, buffer_); }

std::vector<dataset::TrackSample> read_samples(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const std::string src = path.string();
  ByteReader r(bytes, src);
  if (r.get_string(4) != std::string(kSampleMagic, 4)) r.fail("bad magic, expected TSMP");
  const auto version = r.get<std::uint16_t>();
  if (version != kSampleVersion) r.fail("unsupported version " + std::to_string(version));
  std::vector<dataset::TrackSample> out;
  while (r.remaining() > 0) {
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) r.fail("record length exceeds file size");
    const std::size_t start = r.pos();
    out.push_back(decode_sample(std::span(bytes).subspan(start, static_cast<std::size_t>(len)),
                                src + "@" + std::to_string(start)));
    r.get_string(static_cast<std::size_t>(len));
  }
  return out;
}

}  // namespace offtrack::io
