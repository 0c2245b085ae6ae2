#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "linear_assignment.hpp"

namespace offtrack::evaluation {

namespace {

using FrameKey = std::pair<std::string, int>;

std::map<FrameKey, std::vector<std::size_t>> group_by_frame(std::span<const EvalBox> boxes) {
  std::map<FrameKey, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) out[{boxes[i].sequence_id, boxes[i].frame_index}].push_back(i);
  return out;
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> score_order(std::span<const EvalBox> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  return order;
}

struct GreedyMatch {
  std::vector<std::size_t> order;  // predictions by descending score
  std::vector<long> gt_of;         // per position in `order`, -1 if unmatched
  std::vector<double> iou;
};

GreedyMatch greedy_match(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const IouFn& iou_fn,
                         double threshold) {
  GreedyMatch m;
  m.order = score_order(preds);
  m.gt_of.assign(preds.size(), -1);
  m.iou.assign(preds.size(), 0.0);
  const auto gt_frames = group_by_frame(gts);
  std::vector<char> taken(gts.size(), 0);
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    const EvalBox& p = preds[m.order[k]];
    auto it = gt_frames.find({p.sequence_id, p.frame_index});
    if (it == gt_frames.end()) continue;
    long best = -1;
    double best_iou = -1.0;
    for (std::size_t g : it->second) {
      if (taken[g]) continue;
      const double v = iou_fn(p.box, gts[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<long>(g);
      }
    }
    if (best >= 0 && best_iou >= threshold) {
      taken[static_cast<std::size_t>(best)] = 1;
      m.gt_of[k] = best;
      m.iou[k] = best_iou;
    }
  }
  return m;
}

std::vector<EvalBox> of_class(std::span<const EvalBox> boxes, ObjectClass cls) {
  std::vector<EvalBox> out;
  for (const auto& b : boxes) {
    if (b.cls == cls) out.push_back(b);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::vector<PrPoint> pr_curve(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const IouFn& iou,
                              double threshold) {
  const GreedyMatch m = greedy_match(preds, gts, iou, threshold);
  std::vector<PrPoint> out;
  out.reserve(m.order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    const bool hit = m.gt_of[k] >= 0;
    tp += hit ? 1 : 0;
    PrPoint pt;
    pt.score = preds[m.order[k]].score;
    pt.true_positive = hit;
    pt.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    pt.recall = gts.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(gts.size());
    out.push_back(pt);
  }
  return out;
}

double average_precision(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const IouFn& iou,
                         double threshold, Interpolation interpolation) {
  if (gts.empty()) throw Error("no_ground_truth", "average precision is undefined without ground truth");
  const auto curve = pr_curve(preds, gts, iou, threshold);
  // Precision envelope from the right.
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t k = curve.size(); k-- > 0;) {
    running = std::max(running, curve[k].precision);
    envelope[k] = running;
  }
  if (interpolation == Interpolation::AllPoint) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) {
      if (curve[k].recall > prev_recall) {
        ap += (curve[k].recall - prev_recall) * envelope[k];
        prev_recall = curve[k].recall;
      }
    }
    return ap;
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (int i = 0; i <= 100; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    while (k < curve.size() && curve[k].recall < r - 1e-12) ++k;
    if (k < curve.size()) sum += envelope[k];
  }
  return sum / 101.0;
}

MotResult clear_mot(std::span<const EvalBox> preds, std::span<const EvalBox> gts, double iou_threshold) {
  MotResult r;
  r.num_gt = gts.size();
  const auto pred_frames = group_by_frame(preds);
  const auto gt_frames = group_by_frame(gts);

  std::map<FrameKey, bool> keys;
  for (const auto& [k, v] : pred_frames) keys[k] = true;
  for (const auto& [k, v] : gt_frames) keys[k] = true;

  std::string current_seq;
  std::map<std::uint64_t, std::uint64_t> previous;    // gt id -> pred id, last frame
  std::map<std::uint64_t, std::uint64_t> last_match;  // gt id -> pred id, ever
  double iou_sum = 0.0;
  static const std::vector<std::size_t> kNone;

  for (const auto& [key, unused] : keys) {
    if (key.first != current_seq) {
      current_seq = key.first;
      previous.clear();
      last_match.clear();
    }
    auto pit = pred_frames.find(key);
    auto git = gt_frames.find(key);
    const auto& pi = pit != pred_frames.end() ? pit->second : kNone;
    const auto& gi = git != gt_frames.end() ? git->second : kNone;

    std::vector<long> gt_to_pred(gi.size(), -1);
    std::vector<char> pred_used(pi.size(), 0);
    std::vector<double> match_iou(gi.size(), 0.0);

    for (std::size_t a = 0; a < gi.size(); ++a) {
      auto prev = previous.find(gts[gi[a]].track_id);
      if (prev == previous.end()) continue;
      for (std::size_t b = 0; b < pi.size(); ++b) {
        if (pred_used[b] || preds[pi[b]].track_id != prev->second) continue;
        const double v = iou3d(gts[gi[a]].box, preds[pi[b]].box);
        if (v >= iou_threshold) {
          gt_to_pred[a] = static_cast<long>(b);
          pred_used[b] = 1;
          match_iou[a] = v;
        }
        break;
      }
    }

    std::vector<std::size_t> free_gt;
    std::vector<std::size_t> free_pred;
    for (std::size_t a = 0; a < gi.size(); ++a) {
      if (gt_to_pred[a] < 0) free_gt.push_back(a);
    }
    for (std::size_t b = 0; b < pi.size(); ++b) {
      if (!pred_used[b]) free_pred.push_back(b);
    }
    if (!free_gt.empty() && !free_pred.empty()) {
      constexpr double kBlocked = 1e6;
      Eigen::MatrixXd cost(static_cast<Eigen::Index>(free_gt.size()), static_cast<Eigen::Index>(free_pred.size()));
      Eigen::MatrixXd ious(cost.rows(), cost.cols());
      for (Eigen::Index a = 0; a < cost.rows(); ++a) {
        for (Eigen::Index b = 0; b < cost.cols(); ++b) {
          const double v = iou3d(gts[gi[free_gt[static_cast<std::size_t>(a)]]].box,
                                 preds[pi[free_pred[static_cast<std::size_t>(b)]]].box);
          ious(a, b) = v;
          cost(a, b) = v >= iou_threshold ? 1.0 - v : kBlocked;
        }
      }
      const auto assign = solve_linear_assignment(cost);
      for (std::size_t a = 0; a < assign.size(); ++a) {
        const int b = assign[a];
        if (b < 0 || ious(static_cast<Eigen::Index>(a), b) < iou_threshold) continue;
        gt_to_pred[free_gt[a]] = static_cast<long>(free_pred[static_cast<std::size_t>(b)]);
        pred_used[free_pred[static_cast<std::size_t>(b)]] = 1;
        match_iou[free_gt[a]] = ious(static_cast<Eigen::Index>(a), b);
      }
    }

    previous.clear();
    for (std::size_t a = 0; a < gi.size(); ++a) {
      if (gt_to_pred[a] < 0) {
        ++r.false_negatives;
        continue;
      }
      const std::uint64_t gid = gts[gi[a]].track_id;
      const std::uint64_t pid = preds[pi[static_cast<std::size_t>(gt_to_pred[a])]].track_id;
      auto lm = last_match.find(gid);
      if (lm != last_match.end() && lm->second != pid) ++r.id_switches;
      last_match[gid] = pid;
      previous[gid] = pid;
      ++r.matches;
      iou_sum += 1.0 - match_iou[a];
    }
    for (std::size_t b = 0; b < pi.size(); ++b) r.false_positives += pred_used[b] ? 0 : 1;
  }

  if (r.num_gt > 0) {
    const double g = static_cast<double>(r.num_gt);
    r.mota = 100.0 * (1.0 - static_cast<double>(r.false_negatives + r.false_positives + r.id_switches) / g);
    r.ids_pct = 100.0 * static_cast<double>(r.id_switches) / g;
  }
  r.motp = r.matches > 0 ? 100.0 * iou_sum / static_cast<double>(r.matches) : 0.0;
  return r;
}

InspectionResult inspection(std::span<const EvalBox> preds, std::span<const EvalBox> gts, double iou_threshold,
                            double htp_bev_iou, std::size_t max_per_frame) {
  InspectionResult r;
  r.num_gt = gts.size();

  std::vector<EvalBox> kept;
  for (auto& [key, idx] : group_by_frame(preds)) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
    if (idx.size() > max_per_frame) idx.resize(max_per_frame);
    for (std::size_t i : idx) kept.push_back(preds[i]);
  }
  r.num_pred = kept.size();

  const auto kept_frames = group_by_frame(kept);
  r.gt_missed.assign(gts.size(), 0);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    bool overlap = false;
    auto it = kept_frames.find({gts[g].sequence_id, gts[g].frame_index});
    if (it != kept_frames.end()) {
      for (std::size_t p : it->second) {
        if (iou3d(gts[g].box, kept[p].box) > 0.0) {
          overlap = true;
          break;
        }
      }
    }
    if (!overlap) {
      r.gt_missed[g] = 1;
      ++r.t_fn;
    }
  }

  const IouFn iou_fn = [](const Box7& a, const Box7& b) { return iou3d(a, b); };
  const GreedyMatch m = greedy_match(kept, gts, iou_fn, iou_threshold);
  std::size_t tp = 0;
  bool reached = false;
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    if (m.gt_of[k] >= 0) ++tp;
    if (!reached && r.num_gt > 0 && 2 * tp >= r.num_gt) {
      reached = true;
      r.s_t = kept[m.order[k]].score;
    }
  }
  r.true_positives = tp;
  if (!reached) {
    r.s_t_flagged = true;
    r.s_t = m.order.empty() ? 0.0 : kept[m.order.back()].score;
  }
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    const EvalBox& p = kept[m.order[k]];
    if (m.gt_of[k] < 0) {
      if (p.score >= r.s_t) ++r.h_fp;
    } else if (bev_iou(p.box, gts[static_cast<std::size_t>(m.gt_of[k])].box) >= htp_bev_iou) {
      ++r.h_tp;
    }
  }
  if (r.num_gt > 0) {
    const double g = static_cast<double>(r.num_gt);
    r.t_fn_ratio = static_cast<double>(r.t_fn) / g;
    r.h_fp_ratio = static_cast<double>(r.h_fp) / g;
    r.h_tp_ratio = static_cast<double>(r.h_tp) / g;
  }
  return r;
}

LifeCycle life_cycle_analysis(std::span<const EvalBox> gts, std::span<const char> missed, const EvalConfig& cfg) {
  struct Acc {
    ObjectClass cls = ObjectClass::Vehicle;
    int first = 0;
    int last = 0;
    std::size_t boxes = 0;
    std::size_t missed = 0;
  };
  std::map<std::pair<std::string, std::uint64_t>, Acc> tracks;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const EvalBox& g = gts[i];
    auto [it, fresh] = tracks.try_emplace({g.sequence_id, g.track_id});
    Acc& a = it->second;
    if (fresh) {
      a.cls = g.cls;
      a.first = a.last = g.frame_index;
    }
    a.first = std::min(a.first, g.frame_index);
    a.last = std::max(a.last, g.frame_index);
    ++a.boxes;
    a.missed += (i < missed.size() && missed[i]) ? 1 : 0;
  }

  LifeCycle lc;
  lc.bin_width_s = cfg.histogram_bin_s;
  lc.num_tracks = tracks.size();
  for (const auto& [key, a] : tracks) {
    const double seconds = static_cast<double>(a.last - a.first + 1) / cfg.hz;
    const auto bin = static_cast<std::size_t>(std::floor(seconds / cfg.histogram_bin_s));
    if (lc.all_tracks.size() <= bin) {
      lc.all_tracks.resize(bin + 1, 0);
      lc.inferior_tracks.resize(bin + 1, 0);
    }
    ++lc.all_tracks[bin];
    const bool inferior =
        static_cast<double>(a.missed) > cfg.inferior_miss_fraction * static_cast<double>(a.boxes);
    if (inferior) {
      ++lc.inferior_tracks[bin];
      lc.inferior.push_back({key.first, key.second, a.cls, a.boxes, a.missed});
    }
  }
  return lc;
}

MotionState motion_state(std::span<const EvalBox> track_boxes, double hz, double threshold_mps) {
  if (track_boxes.size() < 2) return MotionState::Static;
  auto [lo, hi] = std::minmax_element(track_boxes.begin(), track_boxes.end(),
                                      [](const EvalBox& a, const EvalBox& b) { return a.frame_index < b.frame_index; });
  const double duration = static_cast<double>(hi->frame_index - lo->frame_index) / hz;
  if (duration <= 0.0) return MotionState::Static;
  const double speed = (hi->box.center() - lo->box.center()).norm() / duration;
  return speed > threshold_mps ? MotionState::Dynamic : MotionState::Static;
}

const ClassReport* EvalReport::find(ObjectClass cls) const {
  for (const auto& c : classes) {
    if (c.cls == cls) return &c;
  }
  return nullptr;
}

double EvalReport::metric(const std::string& name) const {
  const auto dot = name.find('.');
  if (dot == std::string::npos) throw Error("unknown_metric", "metric names look like <class>.<name>: " + name);
  const std::string scope = name.substr(0, dot);
  const std::string key = name.substr(dot + 1);

  if (scope == "all") {
    double sum = 0.0;
    auto total = [&](auto field) {
      for (const auto& c : classes) sum += static_cast<double>(field(c));
      return sum;
    };
    if (key == "num_gt") return total([](const ClassReport& c) { return c.num_gt; });
    if (key == "num_pred") return total([](const ClassReport& c) { return c.num_pred; });
    if (key == "t_fn") return total([](const ClassReport& c) { return c.inspect.t_fn; });
    if (key == "h_fp") return total([](const ClassReport& c) { return c.inspect.h_fp; });
    if (key == "h_tp") return total([](const ClassReport& c) { return c.inspect.h_tp; });
    if (key == "id_switches") return total([](const ClassReport& c) { return c.mot.id_switches; });
    if (key == "inferior_tracks") return static_cast<double>(life_cycle.inferior.size());
    if (key == "gt_tracks") return static_cast<double>(life_cycle.num_tracks);
    throw Error("unknown_metric", "unknown metric " + name);
  }

  const auto cls = parse_class(scope);
  if (!cls) throw Error("unknown_metric", "unknown class in metric " + name);
  const ClassReport* c = find(*cls);
  if (c == nullptr) throw Error("unknown_metric", "no data for class " + scope);
  const std::map<std::string, double> values{
      {"num_gt", static_cast<double>(c->num_gt)},
      {"num_pred", static_cast<double>(c->num_pred)},
      {"ap_3d", c->ap_3d},
      {"ap_bev", c->ap_bev},
      {"mota", c->mot.mota},
      {"motp", c->mot.motp},
      {"ids_pct", c->mot.ids_pct},
      {"id_switches", static_cast<double>(c->mot.id_switches)},
      {"t_fn", static_cast<double>(c->inspect.t_fn)},
      {"t_fn_ratio", c->inspect.t_fn_ratio},
      {"h_fp", static_cast<double>(c->inspect.h_fp)},
      {"h_fp_ratio", c->inspect.h_fp_ratio},
      {"h_tp", static_cast<double>(c->inspect.h_tp)},
      {"h_tp_ratio", c->inspect.h_tp_ratio},
      {"s_t", c->inspect.s_t},
  };
  auto it = values.find(key);
  if (it == values.end()) throw Error("unknown_metric", "unknown metric " + name);
  return it->second;
}

std::string EvalReport::render_text() const {
  std::ostringstream os;
  for (const auto& c : classes) {
    os << "[" << to_string(c.cls) << "]\n";
    os << "  gt " << c.num_gt << "  pred " << c.num_pred << "\n";
    if (c.has_gt) {
      os << "  AP_3D " << fmt(c.ap_3d) << "  AP_BEV " << fmt(c.ap_bev) << "\n";
    } else {
      os << "  AP_3D n/a  AP_BEV n/a\n";
    }
    os << "  MOTA " << fmt(c.mot.mota) << "  MOTP " << fmt(c.mot.motp) << "  IDS% " << fmt(c.mot.ids_pct)
       << "  (switches " << c.mot.id_switches << ")\n";
    const auto& in = c.inspect;
    os << "  T-FN " << in.t_fn << " (" << fmt(in.t_fn_ratio) << ")  H-FP " << in.h_fp << " (" << fmt(in.h_fp_ratio)
       << ")  H-TP " << in.h_tp << " (" << fmt(in.h_tp_ratio) << ")  s_t " << fmt(in.s_t)
       << (in.s_t_flagged ? " [recall<50%]" : "") << "\n";
  }
  os << "[life-cycle]\n  gt tracks " << life_cycle.num_tracks << "  inferior " << life_cycle.inferior.size() << "\n";
  for (std::size_t b = 0; b < life_cycle.all_tracks.size(); ++b) {
    os << "  " << fmt(static_cast<double>(b) * life_cycle.bin_width_s).substr(0, 6) << "s  " << life_cycle.all_tracks[b]
       << "  inferior " << life_cycle.inferior_tracks[b] << "\n";
  }
  return os.str();
}

std::string EvalReport::render_csv() const {
  std::ostringstream os;
  os << "class,num_gt,num_pred,ap_3d,ap_bev,mota,motp,ids_pct,id_switches,t_fn,t_fn_ratio,h_fp,h_fp_ratio,h_tp,"
        "h_tp_ratio,s_t,s_t_flagged\n";
  for (const auto& c : classes) {
    const auto& in = c.inspect;
    os << to_string(c.cls) << ',' << c.num_gt << ',' << c.num_pred << ',' << fmt(c.ap_3d) << ',' << fmt(c.ap_bev)
       << ',' << fmt(c.mot.mota) << ',' << fmt(c.mot.motp) << ',' << fmt(c.mot.ids_pct) << ',' << c.mot.id_switches
       << ',' << in.t_fn << ',' << fmt(in.t_fn_ratio) << ',' << in.h_fp << ',' << fmt(in.h_fp_ratio) << ','
       << in.h_tp << ',' << fmt(in.h_tp_ratio) << ',' << fmt(in.s_t) << ',' << (in.s_t_flagged ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string EvalReport::render_json() const {
  nlohmann::ordered_json j;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes) {
    const auto& in = c.inspect;
    nlohmann::ordered_json e;
    e["class"] = to_string(c.cls);
    e["num_gt"] = c.num_gt;
    e["num_pred"] = c.num_pred;
    if (c.has_gt) {
      e["ap_3d"] = c.ap_3d;
      e["ap_bev"] = c.ap_bev;
    } else {
      e["ap_3d"] = nullptr;
      e["ap_bev"] = nullptr;
    }
    e["mota"] = c.mot.mota;
    e["motp"] = c.mot.motp;
    e["ids_pct"] = c.mot.ids_pct;
    e["id_switches"] = c.mot.id_switches;
    e["t_fn"] = in.t_fn;
    e["t_fn_ratio"] = in.t_fn_ratio;
    e["h_fp"] = in.h_fp;
    e["h_fp_ratio"] = in.h_fp_ratio;
    e["h_tp"] = in.h_tp;
    e["h_tp_ratio"] = in.h_tp_ratio;
    e["s_t"] = in.s_t;
    e["s_t_flagged"] = in.s_t_flagged;
    j["classes"].push_back(e);
  }
  auto& lc = j["life_cycle"];
  lc["bin_width_s"] = life_cycle.bin_width_s;
  lc["num_tracks"] = life_cycle.num_tracks;
  lc["all_tracks"] = life_cycle.all_tracks;
  lc["inferior_tracks"] = life_cycle.inferior_tracks;
  lc["inferior"] = nlohmann::ordered_json::array();
  for (const auto& t : life_cycle.inferior) {
    lc["inferior"].push_back({{"sequence_id", t.sequence_id},
                              {"gt_track_id", t.gt_track_id},
                              {"class", to_string(t.cls)},
                              {"boxes", t.boxes},
                              {"missed", t.missed}});
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::render_life_cycle_svg() const {
  const auto& all = life_cycle.all_tracks;
  const std::size_t bins = std::max<std::size_t>(all.size(), 1);
  const std::size_t peak = all.empty() ? 1 : std::max<std::size_t>(1, *std::max_element(all.begin(), all.end()));
  constexpr double kWidth = 640.0, kHeight = 360.0, kLeft = 50.0, kBottom = 40.0, kTop = 20.0, kRight = 20.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double bar_w = plot_w / static_cast<double>(bins);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t b = 0; b < all.size(); ++b) {
    const double x = kLeft + bar_w * static_cast<double>(b);
    const double h_all = plot_h * static_cast<double>(all[b]) / static_cast<double>(peak);
    const double h_inf = plot_h * static_cast<double>(life_cycle.inferior_tracks[b]) / static_cast<double>(peak);
    os << "<rect x=\"" << fmt(x + 1) << "\" y=\"" << fmt(kTop + plot_h - h_all) << "\" width=\"" << fmt(bar_w - 2)
       << "\" height=\"" << fmt(h_all) << "\" fill=\"#9ecae1\"><title>" << all[b] << " tracks</title></rect>\n";
    os << "<rect x=\"" << fmt(x + 1) << "\" y=\"" << fmt(kTop + plot_h - h_inf) << "\" width=\"" << fmt(bar_w - 2)
       << "\" height=\"" << fmt(h_inf) << "\" fill=\"#de2d26\"><title>" << life_cycle.inferior_tracks[b]
       << " inferior</title></rect>\n";
  }
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
     << kTop + plot_h << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\" font-size=\"12\">track length (s, bin " << life_cycle.bin_width_s
     << ")</text>\n";
  os << "<text x=\"12\" y=\"" << kTop + plot_h / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 "
     << kTop + plot_h / 2 << ")\" text-anchor=\"middle\">GT tracks (max " << peak << ")</text>\n";
  os << "</svg>\n";
  return os.str();
}

EvalReport evaluate(std::span<const EvalBox> preds, std::span<const EvalBox> gts, const EvalConfig& cfg) {
  EvalReport report;
  std::vector<char> missed(gts.size(), 0);
  const IouFn iou_3d = [](const Box7& a, const Box7& b) { return iou3d(a, b); };
  const IouFn iou_bev = [](const Box7& a, const Box7& b) { return bev_iou(a, b); };

  for (ObjectClass cls : kAllClasses) {
    std::vector<std::size_t> gt_index;
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (gts[i].cls == cls) gt_index.push_back(i);
    }
    const auto p = of_class(preds, cls);
    const auto g = of_class(gts, cls);
    if (p.empty() && g.empty()) continue;

    ClassReport c;
    c.cls = cls;
    c.num_gt = g.size();
    c.num_pred = p.size();
    c.has_gt = !g.empty();
    const double thr = at(cfg.iou_threshold, cls);
    if (c.has_gt) {
      c.ap_3d = average_precision(p, g, iou_3d, thr, cfg.interpolation);
      c.ap_bev = average_precision(p, g, iou_bev, thr, cfg.interpolation);
    }
    c.mot = clear_mot(p, g, thr);
    c.inspect = inspection(p, g, thr, at(cfg.htp_bev_iou, cls), cfg.max_predictions_per_frame);
    for (std::size_t k = 0; k < gt_index.size(); ++k) missed[gt_index[k]] = c.inspect.gt_missed[k];
    c.inspect.gt_missed.clear();
    report.classes.push_back(std::move(c));
  }
  report.life_cycle = life_cycle_analysis(gts, missed, cfg);
  return report;
}

}  // namespace offtrack::evaluation
