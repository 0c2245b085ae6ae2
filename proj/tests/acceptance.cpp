// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "assignment.hpp"
#include "evaluation.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "postprocess.hpp"
#include "sim.hpp"
#include "support.hpp"
#include "tco.hpp"
#include "tracking.hpp"

using namespace offtrack;
using offtrack::testing::box;
namespace fs = std::filesystem;

namespace {

int g_failed = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  std::printf("%s C%d %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<evaluation::EvalBox> to_eval(const std::string& seq, const std::vector<tracking::Tracklet>& tracks) {
  std::vector<evaluation::EvalBox> out;
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) out.push_back({seq, e.frame_index, t.cls, e.box, e.score, t.track_id});
  }
  return out;
}

std::vector<evaluation::EvalBox> gt_eval(const std::string& seq, const std::vector<assignment::GtTrack>& gt) {
  std::vector<evaluation::EvalBox> out;
  for (const auto& g : gt) {
    for (const auto& e : g.entries) out.push_back({seq, e.frame_index, g.cls, e.box, 1.0, g.gt_track_id});
  }
  return out;
}

// C1 + C2 ---------------------------------------------------------------------

void extension_trend() {
  sim::SimConfig sc;
  sc.seed = 2024;
  sc.num_sequences = 50;
  sc.frames_per_sequence = 200;
  const tracking::TrackerConfig tc;
  const evaluation::EvalConfig ec;

  enum { kNone, kFwd, kBi, kFwdClean, kBiClean, kRuns };
  std::vector<evaluation::EvalBox> preds[kRuns];
  std::vector<evaluation::EvalBox> gts;
  double track_seconds = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int s = 0; s < sc.num_sequences; ++s) {
    const sim::SequenceWorld w = sim::generate_sequence(sc, s);
    const auto t1 = std::chrono::steady_clock::now();
    const auto none = tracking::run(w.detections, tc, tracking::Mode::None);
    const auto fwd = tracking::run(w.detections, tc, tracking::Mode::Forward);
    const auto bi = tracking::run(w.detections, tc, tracking::Mode::Bidirectional);
    const auto fwd_clean = postprocess::remove_empty(fwd, w.frames);
    const auto bi_clean = postprocess::remove_empty(bi, w.frames);
    track_seconds += seconds_since(t1);
    for (auto [k, tr] : {std::pair{kNone, &none}, {kFwd, &fwd}, {kBi, &bi}, {kFwdClean, &fwd_clean}, {kBiClean, &bi_clean}}) {
      const auto n = to_eval(w.sequence_id, *tr);
      preds[k].insert(preds[k].end(), n.begin(), n.end());
    }
    const auto g = gt_eval(w.sequence_id, w.gt);
    gts.insert(gts.end(), g.begin(), g.end());
  }
  const auto t2 = std::chrono::steady_clock::now();
  double tfn[kRuns], hfp[kRuns];
  for (int k = 0; k < kRuns; ++k) {
    const auto rep = evaluation::evaluate(preds[k], gts, ec);
    tfn[k] = rep.metric("all.t_fn");
    hfp[k] = rep.metric("all.h_fp");
  }
  const double eval_seconds = seconds_since(t2);
  const double total = seconds_since(t0);

  const bool trend = tfn[kNone] > tfn[kFwd] && tfn[kFwd] > tfn[kBi] && tfn[kBi] <= 0.5 * tfn[kNone];
  report(1, trend && total < 120.0, "bidirectional T-FN trend",
         fmt("T-FN none=%.0f forward=%.0f bidirectional=%.0f of %zu GT boxes (bi/none=%.3f <= 0.5); "
             "runtime %.1fs total (tracking+remove_empty %.1fs, eval %.1fs) < 120s",
             tfn[kNone], tfn[kFwd], tfn[kBi], gts.size(), tfn[kNone] > 0 ? tfn[kBi] / tfn[kNone] : 0.0, total,
             track_seconds, eval_seconds));
  const bool hfp_ok = hfp[kBiClean] <= 1.10 * hfp[kFwdClean];
  report(2, hfp_ok, "H-FP non-inflation",
         fmt("H-FP after remove_empty forward=%.0f bidirectional=%.0f (ratio %.3f <= 1.10); raw forward=%.0f "
             "bidirectional=%.0f none=%.0f",
             hfp[kFwdClean], hfp[kBiClean], hfp[kFwdClean] > 0 ? hfp[kBiClean] / hfp[kFwdClean] : 0.0, hfp[kFwd],
             hfp[kBi], hfp[kNone]));
}

// C3 --------------------------------------------------------------------------

// Jittered-grid estimate of vol(a ∩ b): one uniform sample per cell of an
// n x n x n grid over a's canonical box, tested against b by projection.
double stratified_intersection(const Box7& a, const Box7& b, int n, CounterRng& rng) {
  const RigidPose a_to_world = box_pose(a);
  std::size_t inside = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Eigen::Vector3d u((i + rng.uniform()) / n - 0.5, (j + rng.uniform()) / n - 0.5, (k + rng.uniform()) / n - 0.5);
        const Eigen::Vector3d p = a_to_world.apply(Eigen::Vector3d(u.x() * a.l, u.y() * a.w, u.z() * a.h));
        inside += offtrack::testing::inside_oracle(b, p) ? 1 : 0;
      }
    }
  }
  return a.volume() * static_cast<double>(inside) / (static_cast<double>(n) * n * n);
}

void geometry_oracle() {
  CounterRng rng(303);
  double worst = 0.0;
  int within = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Box7 a = offtrack::testing::random_box(rng, 1.0);
    Box7 b = offtrack::testing::random_box(rng, 1.0);
    if (trial % 4 == 0) b = box(a.cx + rng.normal(0, 0.3), a.cy + rng.normal(0, 0.3), a.cz + rng.normal(0, 0.2),
                                a.l * rng.uniform(0.8, 1.2), a.w * rng.uniform(0.8, 1.2), a.h * rng.uniform(0.8, 1.2),
                                normalize_yaw(a.yaw + rng.normal(0, 0.3)));
    const double inter = stratified_intersection(a, b, 100, rng);
    const double oracle = inter / (a.volume() + b.volume() - inter);
    const double err = std::abs(iou3d(a, b) - oracle);
    worst = std::max(worst, err);
    within += err <= 1e-3 ? 1 : 0;
  }
  // Axis-aligned: intersection is the product of 1-D overlaps.
  double aa_worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto q = [&](double lo, double hi) { return std::round(rng.uniform(lo, hi) * 8) / 8; };
    const Box7 a = box(q(-2, 2), q(-2, 2), q(-1, 1), q(0.5, 4), q(0.5, 3), q(0.5, 2), trial % 2 ? 0.0 : kPi);
    const Box7 b = box(q(-2, 2), q(-2, 2), q(-1, 1), q(0.5, 4), q(0.5, 3), q(0.5, 2), trial % 3 ? 0.0 : kPi / 2);
    const double bl = trial % 3 ? b.l : b.w, bw = trial % 3 ? b.w : b.l;
    auto ov = [](double c1, double s1, double c2, double s2) {
      return std::max(0.0, std::min(c1 + s1 / 2, c2 + s2 / 2) - std::max(c1 - s1 / 2, c2 - s2 / 2));
    };
    const double inter = ov(a.cx, a.l, b.cx, bl) * ov(a.cy, a.w, b.cy, bw) * ov(a.cz, a.h, b.cz, b.h);
    const double exact = inter / (a.volume() + b.volume() - inter);
    aa_worst = std::max(aa_worst, std::abs(iou3d(a, b) - exact));
  }
  report(3, within == 200 && aa_worst <= 1e-12, "iou3d vs Monte-Carlo oracle",
         fmt("%d/200 pairs within 1e-3 of a 10^6-sample stratified oracle (worst %.2e); axis-aligned worst %.1e",
             within, worst, aa_worst));
}

// C4 --------------------------------------------------------------------------

using FrameMap = std::map<int, Box7>;

double tiou_oracle(const FrameMap& a, const FrameMap& b) {
  std::set<int> uni;
  double sum = 0;
  for (const auto& [f, bx] : a) {
    uni.insert(f);
    if (auto it = b.find(f); it != b.end()) sum += iou3d(bx, it->second);
  }
  for (const auto& kv : b) uni.insert(kv.first);
  return uni.empty() ? 0.0 : sum / static_cast<double>(uni.size());
}

void assignment_oracle() {
  CounterRng rng(404);
  int agree = 0;
  const double thr = 0.3;
  for (int trial = 0; trial < 1000; ++trial) {
    const int frames = 1 + static_cast<int>(rng.below(10));
    const int n_gt = 1 + static_cast<int>(rng.below(3));
    const int n_pred = 1 + static_cast<int>(rng.below(4));
    const Box7 anchor = box(0, 0, 0, 4, 2, 1.5);
    auto jitter = [&] {
      Box7 x = anchor;
      x.cx += rng.normal(0, 0.7);
      x.cy += rng.normal(0, 0.5);
      x.yaw = rng.normal(0, 0.1);
      return x;
    };
    std::vector<assignment::GtTrack> gts;
    std::vector<FrameMap> gmaps;
    for (int g = 0; g < n_gt; ++g) {
      assignment::GtTrack t;
      t.gt_track_id = static_cast<std::uint64_t>(20 - 3 * g);
      FrameMap m;
      for (int f = 0; f < frames; ++f) {
        if (!rng.bernoulli(0.7)) continue;
        const Box7 b = jitter();
        t.entries.push_back({f, b, 50});
        m[f] = b;
      }
      gts.push_back(t);
      gmaps.push_back(m);
    }
    std::vector<tracking::Tracklet> preds;
    std::vector<FrameMap> pmaps;
    for (int p = 0; p < n_pred; ++p) {
      tracking::Tracklet t;
      t.track_id = static_cast<std::uint64_t>(p + 1);
      FrameMap m;
      for (int f = 0; f < frames; ++f) {
        if (!rng.bernoulli(0.7) && !(f == frames - 1 && m.empty())) continue;
        const Box7 b = jitter();
        t.entries.push_back({f, b, 0.9, tracking::Origin::Detected});
        m[f] = b;
      }
      preds.push_back(t);
      pmaps.push_back(m);
    }
    const auto out = assignment::two_round_assign(preds, gts, thr);

    bool ok = out.size() == preds.size();
    for (std::size_t p = 0; ok && p < preds.size(); ++p) {
      std::vector<double> t(gts.size());
      for (std::size_t g = 0; g < gts.size(); ++g) t[g] = tiou_oracle(pmaps[p], gmaps[g]);
      // Enumerate every candidate set; the admissible one is exactly {g : TIoU > thr}.
      std::optional<unsigned> cand;
      for (unsigned mask = 0; mask < (1u << gts.size()); ++mask) {
        bool admissible = true;
        for (std::size_t g = 0; g < gts.size(); ++g) admissible = admissible && (((mask >> g) & 1u) != 0) == (t[g] > thr);
        if (admissible) cand = mask;
      }
      ok = ok && cand.has_value() && out[p].matched == (*cand != 0) && out[p].proposals.size() == pmaps[p].size();
      std::size_t k = 0;
      for (const auto& [f, pb] : pmaps[p]) {
        if (!ok) break;
        // Every per-frame selection: none, or any GT track; keep the valid best.
        std::optional<std::size_t> best;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const bool valid = ((*cand >> g) & 1u) != 0 && gmaps[g].count(f) != 0;
          if (!valid) continue;
          if (!best || t[g] > t[*best] || (t[g] == t[*best] && gts[g].gt_track_id < gts[*best].gt_track_id)) best = g;
        }
        const auto& got = out[p].proposals[k++];
        if (!best) {
          ok = !got.positive() && got.soft_target == 0.0;
        } else {
          const double iou = iou3d(pb, gmaps[*best].at(f));
          ok = got.positive() && *got.gt_track_id == gts[*best].gt_track_id && got.gt_box == gmaps[*best].at(f) &&
               got.iou == iou && got.soft_target == std::min(1.0, std::max(0.0, 2 * iou - 0.5));
        }
      }
    }
    agree += ok ? 1 : 0;
  }
  int grid_ok = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double iou = i / 1000.0;
    grid_ok += std::abs(assignment::soft_target(iou) - std::min(1.0, std::max(0.0, 2 * iou - 0.5))) <= 1e-15 ? 1 : 0;
  }
  report(4, agree == 1000 && grid_ok == 1001, "two-round assignment vs exhaustive oracle",
         fmt("%d/1000 instances agree; soft_target %d/1001 grid points within 1e-15", agree, grid_ok));
}

// C5 --------------------------------------------------------------------------

void icp_recovery() {
  CounterRng rng(505);
  int recovered = 0;
  double worst_rot = 0.0, worst_trans = 0.0;
  std::vector<double> rot_err, trans_err;
  for (int trial = 0; trial < 500; ++trial) {
    const Box7 car = box(0, 0, 0, rng.uniform(3.8, 5.2), rng.uniform(1.7, 2.1), rng.uniform(1.4, 1.9));
    const PointCloud source = sim::sample_shell(car, 512, 0.0, 0.0, rng);
    Eigen::Vector3d axis(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
    axis.normalize();
    const double angle = rng.uniform(0.0, 0.3);
    Eigen::Vector3d t(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
    t *= rng.uniform(0.0, 1.0) / t.norm();
    const RigidPose truth(Eigen::AngleAxisd(angle, axis).toRotationMatrix(), t);
    const PointCloud target = apply_pose(truth, source);
    const auto r = tco::icp_p2p(source, target, tco::IcpOptions{});
    const Eigen::Matrix3d dr = r.transform.rotation().transpose() * truth.rotation();
    const double rot = Eigen::AngleAxisd(dr).angle();
    const double trans = (r.transform.translation() - truth.translation()).norm();
    recovered += (rot <= 1e-2 && trans <= 1e-2) ? 1 : 0;
    worst_rot = std::max(worst_rot, rot);
    worst_trans = std::max(worst_trans, trans);
  }
  report(5, recovered >= 475, "ICP transform recovery",
         fmt("%d/500 trials within 1e-2 rad / 1e-2 m (need >= 475); worst %.3g rad, %.3g m", recovered, worst_rot,
             worst_trans));
}

// C6 --------------------------------------------------------------------------

// Mean Chamfer distance of node i to its list neighbours under the given poses.
double neighbour_quality(const std::vector<tco::ShapeNode>& nodes, const std::vector<RigidPose>& poses, std::size_t i) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t j : {i - 1, i + 1}) {
    if (j >= nodes.size()) continue;  // i - 1 wraps for i = 0
    sum += tco::chamfer(apply_pose(poses[i], nodes[i].points), apply_pose(poses[j], nodes[j].points));
    ++count;
  }
  return sum / count;
}

void tco_improvement() {
  const tco::TcoConfig cfg;
  CounterRng rng(606);
  double err_before = 0.0, err_after = 0.0;
  std::size_t retained = 0, nodes_total = 0, gate_mismatch = 0, nonpositive = 0, size_changes = 0, tracks = 0;
  for (int k = 0; k < 20; ++k) {
    const Box7 start = box(rng.uniform(10, 30), rng.uniform(-10, 10), 0.8, rng.uniform(3.8, 5.2), rng.uniform(1.7, 2.1),
                           rng.uniform(1.4, 1.9), rng.uniform(-kPi, kPi));
    const double speed = rng.uniform(0.0, 1.0);  // m per frame
    const double yaw_rate = rng.bernoulli(0.3) ? rng.uniform(-0.02, 0.02) : 0.0;
    const int n = 40;
    std::vector<PointFrame> pf;
    std::vector<Box7> truth;
    tracking::Tracklet t;
    t.track_id = static_cast<std::uint64_t>(k + 1);
    Box7 b = start;
    for (int f = 0; f < n; ++f) {
      truth.push_back(b);
      PointFrame fr;
      fr.frame_index = f;
      fr.points = sim::sample_shell(b, 200 + rng.below(400), 0.1, 0.02, rng);
      pf.push_back(fr);
      Box7 noisy = b;
      noisy.cx += rng.normal(0, 0.15);
      noisy.cy += rng.normal(0, 0.15);
      noisy.cz += rng.normal(0, 0.15);
      noisy.yaw = normalize_yaw(noisy.yaw + rng.normal(0, 0.05));
      t.entries.push_back({f, noisy, 0.9, tracking::Origin::Detected});
      b.yaw = normalize_yaw(b.yaw + yaw_rate);
      b.cx += speed * std::cos(b.yaw);
      b.cy += speed * std::sin(b.yaw);
    }
    InMemoryFrames frames(pf);
    // Annotated base frame: its GT box replaces the noisy one.
    const std::size_t base = rng.below(n);
    tracking::Tracklet working = t;
    working.entries[base].box = truth[base];
    working = tco::align_sizes(working, base);
    const auto nodes = tco::extract_shapes(working, frames, cfg);
    const auto base_node = static_cast<std::size_t>(
        std::find_if(nodes.begin(), nodes.end(), [&](const tco::ShapeNode& nd) { return nd.frame_index == static_cast<int>(base); }) -
        nodes.begin());
    if (base_node == nodes.size()) continue;
    const auto poses = tco::optimize_pose_graph(nodes, base_node, cfg);
    const auto gated = tco::gate_and_apply(working, nodes, poses);
    ++tracks;
    nodes_total += nodes.size();
    const std::vector<RigidPose> ident(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double delta = neighbour_quality(nodes, ident, i) - neighbour_quality(nodes, poses, i);
      gate_mismatch += (gated.retained[i] != (delta > 0.0)) ? 1 : 0;
      if (!gated.retained[i]) continue;
      nonpositive += gated.quality[i].delta > 0.0 ? 0 : 1;
      const std::size_t e = nodes[i].entry_index;
      if (e == base) continue;
      ++retained;
      err_before += (t.entries[e].box.center() - truth[e].center()).norm();
      err_after += (gated.track.entries[e].box.center() - truth[e].center()).norm();
    }
    for (std::size_t i = 0; i < t.entries.size(); ++i) {
      const auto& in = t.entries[i].box;
      const auto& out = gated.track.entries[i].box;
      size_changes += (out.l != in.l || out.w != in.w || out.h != in.h) ? 1 : 0;
    }
  }
  const double before = retained ? err_before / retained : 0.0;
  const double after = retained ? err_after / retained : 0.0;
  const bool ok = tracks == 20 && retained > 0 && after <= 0.5 * before && nonpositive == 0 && gate_mismatch == 0 &&
                  size_changes == 0;
  report(6, ok, "TCO center error on retained frames",
         fmt("%zu tracks, %zu nodes, %zu retained non-base frames; mean center error %.4f m -> %.4f m (ratio %.3f <= "
             "0.5); retained with dQ <= 0: %zu; gate vs recomputed dQ mismatches: %zu; size changes: %zu",
             tracks, nodes_total, retained, before, after, before > 0 ? after / before : 0.0, nonpositive,
             gate_mismatch, size_changes));
}

// C7 --------------------------------------------------------------------------

void chamfer_oracle() {
  CounterRng rng(707);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud a = offtrack::testing::random_cloud(rng, 1 + rng.below(300), 2.0);
    const PointCloud b = offtrack::testing::random_cloud(rng, 1 + rng.below(300), 2.0);
    auto one_way = [](const PointCloud& x, const PointCloud& y) {
      double sum = 0.0;
      for (const auto& p : x.positions()) {
        double best = INFINITY;
        for (const auto& q : y.positions()) best = std::min(best, (p - q).norm());
        sum += best;
      }
      return sum / static_cast<double>(x.size());
    };
    worst = std::max(worst, std::abs(tco::chamfer(a, b) - (one_way(a, b) + one_way(b, a))));
  }
  bool two_point = true;
  for (double d : {0.5, 1.25, 3.0, 7.75}) {
    PointCloud a, b;
    a.push_back({1, 2, 3});
    b.push_back({1 + d, 2, 3});
    two_point = two_point && tco::chamfer(a, b) == 2 * d;
  }
  report(7, worst <= 1e-9 && two_point, "Chamfer vs brute force",
         fmt("100 pairs, worst deviation %.2e (<= 1e-9); two-point case exact: %s", worst, two_point ? "yes" : "no"));
}

// C8 --------------------------------------------------------------------------

using DetKey = std::tuple<int, double, double, double, double>;

std::map<DetKey, int> input_detections(const tracking::SequenceDetections& seq) {
  std::map<DetKey, int> out;
  for (const auto& fr : seq.frames) {
    for (const auto& d : fr.detections) ++out[{fr.frame_index, d.box.cx, d.box.cy, d.box.yaw, d.score}];
  }
  return out;
}

std::map<DetKey, int> tracked_detections(const std::vector<tracking::Tracklet>& tracks) {
  std::map<DetKey, int> out;
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) {
      if (e.origin == tracking::Origin::Detected) ++out[{e.frame_index, e.box.cx, e.box.cy, e.box.yaw, e.score}];
    }
  }
  return out;
}

void tracking_conservation() {
  std::size_t sequences = 0, conserved = 0, tracks = 0, gap_free = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    sim::SimConfig sc;
    sc.seed = seed;
    sc.clutter_per_frame = seed == 13u ? 1.0 : 0.0;
    for (int s = 0; s < 4; ++s) {
      const auto w = sim::generate_sequence(sc, s);
      const auto input = input_detections(w.detections);
      for (auto mode : {tracking::Mode::Forward, tracking::Mode::Bidirectional}) {
        const auto out = tracking::run(w.detections, tracking::TrackerConfig{}, mode);
        ++sequences;
        conserved += tracked_detections(out) == input ? 1 : 0;
        for (const auto& t : out) {
          ++tracks;
          gap_free += t.gap_free() ? 1 : 0;
        }
      }
    }
  }

  // Whole-pipeline reproducibility through the on-disk formats.
  const fs::path root = fs::temp_directory_path() / "offtrack_acceptance_c8";
  fs::remove_all(root);
  auto run_once = [&](const std::string& name, int threads) {
    PipelineConfig cfg;
    cfg.sim.seed = 88;
    cfg.sim.num_sequences = 3;
    cfg.sim.frames_per_sequence = 100;
    cfg.threads = threads;
    const fs::path dir = root / name;
    pipeline::simulate(cfg, dir / "corpus");
    const auto corpus = pipeline::Corpus::open(dir / "corpus");
    const auto tracked = pipeline::track(corpus, cfg, tracking::Mode::Bidirectional);
    const auto refined = pipeline::run_tco(corpus, pipeline::remove_empty(corpus, tracked, cfg), cfg);
    pipeline::save_tracks(dir / "tracks.jsonl", corpus.manifest(), refined);
    io::write_text(dir / "report.csv", pipeline::evaluate(corpus, refined, cfg).render_csv());
    return dir;
  };
  const fs::path a = run_once("a", 1);
  const fs::path b = run_once("b", 1);
  const fs::path c = run_once("c", 4);
  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    const auto bytes = io::read_bytes(entry.path());
    ++files;
    identical += (bytes == io::read_bytes(b / rel) && bytes == io::read_bytes(c / rel)) ? 1 : 0;
  }
  fs::remove_all(root);
  const bool ok = conserved == sequences && gap_free == tracks && files > 0 && identical == files;
  report(8, ok, "tracking conservation and reproducibility",
         fmt("%zu/%zu runs conserve every detection; %zu/%zu tracklets gap-free; %zu/%zu output files byte-identical "
             "across reruns and 1 vs 4 threads",
             conserved, sequences, gap_free, tracks, identical, files));
}

// C9 --------------------------------------------------------------------------

void metric_sanity() {
  sim::SimConfig sc;
  sc.seed = 909;
  sc.frames_per_sequence = 100;
  std::vector<evaluation::EvalBox> gts;
  for (int s = 0; s < 2; ++s) {
    const auto w = sim::generate_sequence(sc, s);
    const auto g = gt_eval(w.sequence_id, w.gt);
    gts.insert(gts.end(), g.begin(), g.end());
  }
  auto preds = gts;
  for (auto& p : preds) {
    p.score = 0.9;
    p.track_id += 1000;
  }
  const auto rep = evaluation::evaluate(preds, gts, evaluation::EvalConfig{});
  bool perfect = true;
  std::string detail;
  for (const auto& c : rep.classes) {
    const std::string n(to_string(c.cls));
    const double ap = rep.metric(n + ".ap_3d"), mota = rep.metric(n + ".mota"), motp = rep.metric(n + ".motp"),
                 ids = rep.metric(n + ".id_switches"), tfn = rep.metric(n + ".t_fn");
    perfect = perfect && ap == 1.0 && mota == 100.0 && motp == 0.0 && ids == 0.0 && tfn == 0.0;
    detail += fmt("%s AP=%.3f MOTA=%.1f MOTP=%.1f IDS=%.0f T-FN=%.0f; ", n.c_str(), ap, mota, motp, ids, tfn);
  }

  std::vector<evaluation::EvalBox> sg, sp;
  for (int f = 0; f < 20; ++f) {
    const Box7 a = box(f * 0.5, 0, 0.8, 4.5, 1.9, 1.6), b = box(f * 0.5, 6, 0.8, 4.5, 1.9, 1.6);
    sg.push_back({"swap", f, ObjectClass::Vehicle, a, 1.0, 1});
    sg.push_back({"swap", f, ObjectClass::Vehicle, b, 1.0, 2});
    sp.push_back({"swap", f, ObjectClass::Vehicle, f < 10 ? a : b, 0.9, 7});
    sp.push_back({"swap", f, ObjectClass::Vehicle, f < 10 ? b : a, 0.9, 8});
  }
  const auto swap = evaluation::clear_mot(sp, sg, 0.7);
  report(9, perfect && swap.id_switches == 2, "metric sanity",
         detail + fmt("identity swap IDS=%zu (want 2)", swap.id_switches));
}

// C10 -------------------------------------------------------------------------

void tta_flip_immunity() {
  CounterRng rng(1010);
  int immune = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(5));
    const double center = rng.uniform(-kPi, kPi);
    std::vector<double> yaws, scores;
    for (int i = 0; i < n; ++i) {
      yaws.push_back(normalize_yaw(center + rng.normal(0, 0.08)));
      scores.push_back(rng.uniform(0.2, 0.9));
    }
    // The agreeing median: sort offsets around the common heading.
    std::vector<double> off;
    for (double y : yaws) off.push_back(normalize_yaw(y - center));
    std::sort(off.begin(), off.end());
    const double med = n % 2 ? off[static_cast<std::size_t>(n / 2)]
                             : 0.5 * (off[static_cast<std::size_t>(n / 2 - 1)] + off[static_cast<std::size_t>(n / 2)]);
    const double expected = normalize_yaw(center + med);

    const std::size_t flip = rng.below(static_cast<std::uint64_t>(n));
    auto flipped = yaws;
    flipped[flip] = normalize_yaw(flipped[flip] + kPi);
    if (trial % 2 == 0) scores[flip] = 0.99;  // the flipped variant is also the most confident

    std::vector<postprocess::TtaVariantTracks> variants;
    for (int i = 0; i < n; ++i) {
      tracking::Tracklet t;
      t.track_id = 5;
      t.entries.push_back({0, box(10, 3, 0.8, 4.5, 1.9, 1.6, flipped[static_cast<std::size_t>(i)]),
                           scores[static_cast<std::size_t>(i)], tracking::Origin::Detected});
      variants.push_back({"v" + std::to_string(i), {t}});
    }
    const double merged = postprocess::tta_merge(variants)[0].entries[0].box.yaw;
    const double err = std::abs(normalize_yaw(merged - expected));
    worst = std::max(worst, err);
    immune += err <= 1e-9 ? 1 : 0;
  }
  report(10, immune == 100, "TTA heading flip immunity",
         fmt("%d/100 cases within 1e-9 of the agreeing median (worst %.2e)", immune, worst));
}

}  // namespace

int main() {
  extension_trend();
  geometry_oracle();
  assignment_oracle();
  icp_recovery();
  tco_improvement();
  chamfer_oracle();
  tracking_conservation();
  metric_sanity();
  tta_flip_immunity();
  std::printf("%d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
