#include "config.hpp"

#include <set>
#include <type_traits>
#include <utility>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"

namespace offtrack {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

template <typename E>
using Choices = std::initializer_list<std::pair<const char*, E>>;

class Writer {
 public:
  explicit Writer(ordered_json& j) : j_(j) {}

  template <typename T>
  void operator()(const char* key, const T& value) {
    j_[key] = encode(value);
  }

  template <typename F>
  void section(const char* key, F&& fn) {
    ordered_json sub = ordered_json::object();
    Writer w(sub);
    fn(w);
    j_[key] = std::move(sub);
  }

  template <typename E>
  void choice(const char* key, const E& value, Choices<E> choices) {
    for (const auto& [name, v] : choices) {
      if (v == value) j_[key] = name;
    }
  }

 private:
  template <typename T>
  static ordered_json encode(const T& v) {
    return v;
  }
  static ordered_json encode(const sim::Range& r) { return {r.lo, r.hi}; }
  static ordered_json encode(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
  static ordered_json encode(const evaluation::PerClass& v) {
    return {{"vehicle", v[0]}, {"pedestrian", v[1]}, {"cyclist", v[2]}};
  }

  ordered_json& j_;
};

class Reader {
 public:
  Reader(const json& j, std::string path, std::string source)
      : j_(j), path_(std::move(path)), source_(std::move(source)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "must be an object");
  }

  template <typename T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) decode(*it, value, child(key));
  }

  template <typename F>
  void section(const char* key, F&& fn) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader r(*it, child(key), source_);
    fn(r);
    r.finish();
  }

  template <typename E>
  void choice(const char* key, E& value, Choices<E> choices) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (it->is_string()) {
      for (const auto& [name, v] : choices) {
        if (it->get<std::string>() == name) {
          value = v;
          return;
        }
      }
    }
    std::string allowed;
    for (const auto& [name, v] : choices) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    fail(child(key), "must be one of: " + allowed);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(child(key.c_str()), "unknown key");
    }
  }

 private:
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw SchemaError(source_ + ": " + path + ": " + what);
  }

  void decode(const json& j, double& v, const std::string& p) const {
    if (!j.is_number()) fail(p, "must be a number");
    v = j.get<double>();
  }
  void decode(const json& j, bool& v, const std::string& p) const {
    if (!j.is_boolean()) fail(p, "must be true or false");
    v = j.get<bool>();
  }
  void decode(const json& j, int& v, const std::string& p) const {
    if (!j.is_number_integer()) fail(p, "must be an integer");
    v = j.get<int>();
  }
  void decode(const json& j, std::size_t& v, const std::string& p) const {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) fail(p, "must be a non-negative integer");
    v = j.get<std::size_t>();
  }
  void decode(const json& j, sim::Range& v, const std::string& p) const {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) fail(p, "must be [lo, hi]");
    v.lo = j[0].get<double>();
    v.hi = j[1].get<double>();
    if (v.hi < v.lo) fail(p, "hi must not be below lo");
  }
  void decode(const json& j, Eigen::Vector3d& v, const std::string& p) const {
    if (!j.is_array() || j.size() != 3) fail(p, "must be [x, y, z]");
    for (int i = 0; i < 3; ++i) {
      if (!j[static_cast<std::size_t>(i)].is_number()) fail(p, "must be [x, y, z]");
      v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
  }
  void decode(const json& j, std::array<double, 3>& v, const std::string& p) const {
    if (j.is_object()) {
      Reader r(j, p, source_);
      r("vehicle", v[0]);
      r("pedestrian", v[1]);
      r("cyclist", v[2]);
      r.finish();
      return;
    }
    if (!j.is_array() || j.size() != 3) fail(p, "must hold three numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!j[i].is_number()) fail(p, "must hold three numbers");
      v[i] = j[i].get<double>();
    }
  }

  const json& j_;
  std::string path_;
  std::string source_;
  std::set<std::string> seen_;
};

template <typename V, typename C>
void visit_noise(V& v, C& n) {
  v("position", n.position);
  v("yaw", n.yaw);
  v("size", n.size);
  v("velocity", n.velocity);
}

template <typename V, typename C>
void visit_profile(V& v, C& p) {
  v("count", p.count);
  v("length", p.length);
  v("width", p.width);
  v("height", p.height);
  v("speed", p.speed);
  v("points_per_m2", p.points_per_m2);
}

// One description of the config tree drives both reading and writing.
template <typename V, typename C>
void visit(V& v, C& c) {
  v.section("tracking", [&](V& s) {
    auto& t = c.tracking;
    s("gate_iou", t.gate_iou);
    s("long_track_frames", t.long_track_frames);
    s("short_ext_frames", t.short_ext_frames);
    s("perception_radius_m", t.perception_radius_m);
    s.section("process_noise", [&](V& n) { visit_noise(n, t.process); });
    s.section("measurement_noise", [&](V& n) { visit_noise(n, t.measurement); });
    s("init_cov_scale", t.init_cov_scale);
    s("init_velocity_sigma", t.init_velocity_sigma);
    s("ext_score_decay", t.ext_score_decay);
  });
  v.section("assignment", [&](V& s) {
    auto& a = c.assignment;
    s.choice("method", a.method, Choices<AssignMethod>{{"two_round", AssignMethod::TwoRound},
                                                       {"object_centric", AssignMethod::ObjectCentric}});
    s("tiou_threshold", a.tiou_threshold);
    s.section("object_centric", [&](V& o) {
      o("vehicle", a.object_centric.vehicle);
      o("pedestrian", a.object_centric.pedestrian);
      o("cyclist", a.object_centric.cyclist);
    });
  });
  v.section("dataset", [&](V& s) {
    auto& d = c.dataset;
    s("expand_m", d.build.expand_m);
    s("max_points_per_proposal", d.build.max_points_per_proposal);
    s("object_margin_m", d.build.object_margin_m);
    s("tta_rotations", d.tta_rotations);
  });
  v.section("augment", [&](V& s) {
    auto& a = c.augment;
    s("enabled", a.enabled);
    s("rotation_range", a.params.rotation_range);
    s("flip_probability", a.params.flip_probability);
    s("scale_min", a.params.scale_min);
    s("scale_max", a.params.scale_max);
    s("vertical_shift", a.params.vertical_shift);
    s("jitter_center", a.params.jitter_center);
    s("jitter_lw_min", a.params.jitter_lw_min);
    s("jitter_lw_max", a.params.jitter_lw_max);
    s("jitter_h_min", a.params.jitter_h_min);
    s("jitter_h_max", a.params.jitter_h_max);
    s("jitter_yaw", a.params.jitter_yaw);
  });
  v.section("tco", [&](V& s) {
    auto& t = c.tco;
    s("height_expand_m", t.height_expand_m);
    s("min_points", t.min_points);
    s("window_k", t.window_k);
    s.section("icp", [&](V& i) {
      i("max_correspondence", t.icp.max_correspondence);
      i("max_iterations", t.icp.max_iterations);
      i("tolerance", t.icp.tolerance);
    });
    s("graph_iterations", t.graph_iterations);
    s("graph_tolerance", t.graph_tolerance);
    s("allow_pedestrian", t.allow_pedestrian);
  });
  v.section("postprocess", [&](V& s) { s("remove_empty", c.postprocess.remove_empty); });
  v.section("evaluation", [&](V& s) {
    auto& e = c.evaluation;
    s("iou_threshold", e.iou_threshold);
    s("htp_bev_iou", e.htp_bev_iou);
    s("dynamic_speed", e.dynamic_speed);
    s("max_predictions_per_frame", e.max_predictions_per_frame);
    s("hz", e.hz);
    s("inferior_miss_fraction", e.inferior_miss_fraction);
    s("histogram_bin_s", e.histogram_bin_s);
    s.choice("interpolation", e.interpolation,
             Choices<evaluation::Interpolation>{{"all_point", evaluation::Interpolation::AllPoint},
                                                {"101_point", evaluation::Interpolation::Point101}});
  });
  v.section("sim", [&](V& s) {
    auto& m = c.sim;
    s("seed", m.seed);
    s("num_sequences", m.num_sequences);
    s("frames_per_sequence", m.frames_per_sequence);
    s("hz", m.hz);
    s("ego_speed_mps", m.ego_speed_mps);
    s.section("vehicle", [&](V& p) { visit_profile(p, m.vehicle); });
    s.section("pedestrian", [&](V& p) { visit_profile(p, m.pedestrian); });
    s.section("cyclist", [&](V& p) { visit_profile(p, m.cyclist); });
    s("static_fraction", m.static_fraction);
    s("turn_fraction", m.turn_fraction);
    s("turn_rate", m.turn_rate);
    s("spawn_x", m.spawn_x);
    s("spawn_y", m.spawn_y);
    s("min_spawn_gap_m", m.min_spawn_gap_m);
    s("late_spawn_fraction", m.late_spawn_fraction);
    s("early_exit_fraction", m.early_exit_fraction);
    s("lidar_range_m", m.lidar_range_m);
    s("shell_inset_m", m.shell_inset_m);
    s("point_noise_m", m.point_noise_m);
    s("max_points_per_object", m.max_points_per_object);
    s("drop_floor", m.drop_floor);
    s("drop_scale_points", m.drop_scale_points);
    s("occlusion_fraction", m.occlusion_fraction);
    s("occlusion_frames", m.occlusion_frames);
    s("occlusion_drop_probability", m.occlusion_drop_probability);
    s("late_detection_fraction", m.late_detection_fraction);
    s("late_detection_frames", m.late_detection_frames);
    s("jitter_scale", m.jitter_scale);
    s("jitter_center", m.jitter_center);
    s("jitter_lw", m.jitter_lw);
    s("jitter_h", m.jitter_h);
    s("jitter_yaw", m.jitter_yaw);
    s("score_base", m.score_base);
    s("score_gain", m.score_gain);
    s("score_scale_points", m.score_scale_points);
    s("score_noise", m.score_noise);
    s("clutter_per_frame", m.clutter_per_frame);
    s("clutter_score_max", m.clutter_score_max);
  });
  v("threads", c.threads);
  v("seed", c.seed);
}

void validate(const PipelineConfig& c, const std::string& source) {
  auto check = [&](bool ok, const char* what) {
    if (!ok) throw SchemaError(source + ": " + what);
  };
  check(c.tracking.gate_iou > 0.0 && c.tracking.gate_iou < 1.0, "tracking.gate_iou must lie in (0, 1)");
  check(c.tracking.long_track_frames >= 0 && c.tracking.short_ext_frames >= 0, "tracking extension lengths must be >= 0");
  check(c.assignment.tiou_threshold > 0.0 && c.assignment.tiou_threshold < 1.0,
        "assignment.tiou_threshold must lie in (0, 1)");
  check(c.tco.window_k >= 1, "tco.window_k must be >= 1");
  check(c.tco.icp.max_correspondence > 0.0, "tco.icp.max_correspondence must be positive");
  check(c.evaluation.hz > 0.0 && c.evaluation.histogram_bin_s > 0.0, "evaluation.hz and histogram_bin_s must be positive");
  check(c.sim.frames_per_sequence > 0, "sim.frames_per_sequence must be positive");
  check(c.sim.num_sequences >= 0, "sim.num_sequences must be >= 0");
  check(c.sim.hz > 0.0, "sim.hz must be positive");
  for (double p : {c.sim.static_fraction, c.sim.turn_fraction, c.sim.late_spawn_fraction, c.sim.early_exit_fraction,
                   c.sim.drop_floor, c.sim.occlusion_fraction, c.sim.occlusion_drop_probability,
                   c.sim.late_detection_fraction}) {
    check(p >= 0.0 && p <= 1.0, "sim probabilities must lie in [0, 1]");
  }
  check(c.threads >= 0, "threads must be >= 0");
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(source + ": invalid JSON: " + e.what());
  }
  PipelineConfig c;
  Reader r(j, "", source);
  visit(r, c);
  r.finish();
  validate(c, source);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text(path), path.string()); }

std::string dump_config(const PipelineConfig& cfg) {
  ordered_json j = ordered_json::object();
  Writer w(j);
  visit(w, cfg);
  return j.dump(2) + "\n";
}

}  // namespace offtrack
