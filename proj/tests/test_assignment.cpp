#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "assignment.hpp"
#include "error.hpp"
#include "support.hpp"

using namespace offtrack;
using namespace offtrack::assignment;
using offtrack::testing::box;

namespace {

tracking::Tracklet pred_track(std::uint64_t id, const std::vector<std::pair<int, Box7>>& boxes,
                              ObjectClass cls = ObjectClass::Vehicle) {
  tracking::Tracklet t;
  t.track_id = id;
  t.cls = cls;
  for (const auto& [f, b] : boxes) t.entries.push_back({f, b, 0.9, tracking::Origin::Detected});
  return t;
}

GtTrack gt_track(std::uint64_t id, const std::vector<std::pair<int, Box7>>& boxes,
                 ObjectClass cls = ObjectClass::Vehicle) {
  GtTrack g;
  g.gt_track_id = id;
  g.cls = cls;
  for (const auto& [f, b] : boxes) g.entries.push_back({f, b, 50});
  return g;
}

std::vector<std::pair<int, Box7>> constant(int lo, int hi, const Box7& b) {
  std::vector<std::pair<int, Box7>> out;
  for (int f = lo; f < hi; ++f) out.emplace_back(f, b);
  return out;
}

// Direct evaluation of the track IoU definition with frame sets.
double tiou_oracle(const std::map<int, Box7>& a, const std::map<int, Box7>& b) {
  std::set<int> uni;
  double sum = 0;
  for (const auto& [f, box] : a) {
    uni.insert(f);
    if (auto it = b.find(f); it != b.end()) sum += iou3d(box, it->second);
  }
  for (const auto& [f, box] : b) uni.insert(f);
  return sum / static_cast<double>(uni.size());
}

std::map<int, Box7> as_map(const tracking::Tracklet& t) {
  std::map<int, Box7> m;
  for (const auto& e : t.entries) m[e.frame_index] = e.box;
  return m;
}

std::map<int, Box7> as_map(const GtTrack& t) {
  std::map<int, Box7> m;
  for (const auto& e : t.entries) m[e.frame_index] = e.box;
  return m;
}

}  // namespace

TEST(Tiou, Examples) {
  const Box7 b = box(0, 0, 0, 4, 2, 1.5);
  const auto a = frame_boxes(pred_track(1, constant(0, 10, b)));
  const auto same = frame_boxes(gt_track(1, constant(0, 10, b)));
  EXPECT_EQ(tiou(a, same), 1.0);
  const auto disjoint = frame_boxes(gt_track(2, constant(10, 20, b)));
  EXPECT_EQ(tiou(a, disjoint), 0.0);
  const auto shifted = frame_boxes(gt_track(3, constant(5, 15, b)));
  EXPECT_DOUBLE_EQ(tiou(a, shifted), 5.0 / 15.0);
}

TEST(Tiou, BothEmptyThrows) {
  try {
    tiou(std::vector<FrameBox>{}, std::vector<FrameBox>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_tracks");
  }
  const std::vector<FrameBox> one{{0, box(0, 0, 0, 1, 1, 1)}};
  EXPECT_EQ(tiou(one, std::vector<FrameBox>{}), 0.0);
}

TEST(Tiou, SymmetricBoundedMatchesOracle) {
  CounterRng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::pair<int, Box7>> pa, pb;
    const Box7 base = offtrack::testing::random_box(rng, 1.0);
    for (int f = 0; f < 20; ++f) {
      if (rng.bernoulli(0.6)) {
        Box7 x = base;
        x.cx += rng.normal(0, 0.3);
        pa.emplace_back(f, x);
      }
      if (rng.bernoulli(0.6)) {
        Box7 x = base;
        x.cy += rng.normal(0, 0.3);
        x.yaw = normalize_yaw(x.yaw + rng.normal(0, 0.2));
        pb.emplace_back(f, x);
      }
    }
    if (pa.empty() && pb.empty()) continue;
    const auto ta = pred_track(1, pa);
    const auto tb = gt_track(1, pb);
    const auto fa = frame_boxes(ta);
    const auto fb = frame_boxes(tb);
    const double v = tiou(fa, fb);
    EXPECT_EQ(v, tiou(fb, fa));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, tiou_oracle(as_map(ta), as_map(tb)), 1e-12);
    if (!fa.empty()) EXPECT_DOUBLE_EQ(tiou(fa, fa), 1.0);
  }
}

TEST(Tiou, ZeroIouFrameStrictlyDecreases) {
  const Box7 b = box(0, 0, 0, 4, 2, 1.5);
  auto a = frame_boxes(pred_track(1, constant(0, 10, b)));
  const auto g = frame_boxes(gt_track(1, constant(0, 12, b)));
  const double before = tiou(a, g);
  a.push_back({12, box(40, 0, 0, 4, 2, 1.5)});
  EXPECT_LT(tiou(a, g), before);
  a.push_back({30, b});
  EXPECT_LT(tiou(a, g), before);
}

TEST(SoftTarget, ClampFormula) {
  EXPECT_EQ(soft_target(0.25), 0.0);
  EXPECT_EQ(soft_target(0.5), 0.5);
  EXPECT_EQ(soft_target(0.75), 1.0);
  EXPECT_EQ(soft_target(0.0), 0.0);
  EXPECT_EQ(soft_target(1.0), 1.0);
  double prev = -1;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    const double q = soft_target(x);
    EXPECT_EQ(q, std::min(1.0, std::max(0.0, 2 * x - 0.5)));
    EXPECT_GE(q, prev);
    prev = q;
  }
  // Slopes on either side of the breakpoints.
  const double e = 1e-6;
  EXPECT_EQ(soft_target(0.25 - e), 0.0);
  EXPECT_NEAR(soft_target(0.25 + e), 2 * e, 1e-15);
  EXPECT_NEAR(soft_target(0.75 - e), 1 - 2 * e, 1e-15);
  EXPECT_EQ(soft_target(0.75 + e), 1.0);
}

TEST(Residual, Encoding) {
  const Box7 p = box(3, 4, 1, 4, 2, 1.5, 0.6);
  for (double r : residual_target(p, p)) EXPECT_EQ(r, 0.0);
  Box7 g = p;
  g.cx += std::cos(p.yaw);
  g.cy += std::sin(p.yaw);
  const Residual r = residual_target(p, g);
  EXPECT_NEAR(r[0], 1.0 / std::sqrt(20.0), 1e-12);
  for (int k = 1; k < 7; ++k) EXPECT_NEAR(r[static_cast<std::size_t>(k)], 0.0, 1e-12);
}

TEST(Residual, DecodeRoundTrip) {
  CounterRng rng(43);
  for (int i = 0; i < 500; ++i) {
    const Box7 p = offtrack::testing::random_box(rng, 10.0);
    const Box7 g = offtrack::testing::random_box(rng, 10.0);
    const Box7 d = decode_residual(p, residual_target(p, g));
    EXPECT_NEAR(d.cx, g.cx, 1e-9);
    EXPECT_NEAR(d.cy, g.cy, 1e-9);
    EXPECT_NEAR(d.cz, g.cz, 1e-9);
    EXPECT_NEAR(d.l, g.l, 1e-9);
    EXPECT_NEAR(d.w, g.w, 1e-9);
    EXPECT_NEAR(d.h, g.h, 1e-9);
    EXPECT_NEAR(std::abs(normalize_yaw(d.yaw - g.yaw)), 0.0, 1e-9);
    const Residual r = residual_target(p, g);
    EXPECT_GT(r[6], -kPi);
    EXPECT_LE(r[6], kPi);
  }
}

TEST(TwoRound, SingleMatch) {
  const Box7 b = box(0, 0, 0, 4, 2, 1.5);
  Box7 near = b;
  near.cx += 0.1;
  const std::vector<tracking::Tracklet> preds{pred_track(1, constant(0, 10, near))};
  const std::vector<GtTrack> gts{gt_track(7, constant(0, 10, b))};
  const auto out = two_round_assign(preds, gts, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].matched);
  ASSERT_EQ(out[0].proposals.size(), 10u);
  for (const auto& p : out[0].proposals) {
    ASSERT_TRUE(p.positive());
    EXPECT_EQ(*p.gt_track_id, 7u);
    EXPECT_EQ(p.gt_box, b);
    EXPECT_EQ(p.soft_target, soft_target(p.iou));
    EXPECT_TRUE(p.residual.has_value());
  }
}

TEST(TwoRound, NoCandidateAllNegative) {
  const std::vector<tracking::Tracklet> preds{pred_track(1, constant(0, 10, box(0, 0, 0, 4, 2, 1.5)))};
  const std::vector<GtTrack> gts{gt_track(7, constant(0, 10, box(30, 0, 0, 4, 2, 1.5))),
                                 gt_track(8, constant(0, 10, box(0, 0, 0, 4, 2, 1.5)), ObjectClass::Cyclist)};
  const auto out = two_round_assign(preds, gts, 0.3);
  EXPECT_FALSE(out[0].matched);
  EXPECT_TRUE(out[0].candidates.empty());
  for (const auto& p : out[0].proposals) {
    EXPECT_FALSE(p.positive());
    EXPECT_EQ(p.soft_target, 0.0);
    EXPECT_FALSE(p.residual.has_value());
  }
}

TEST(TwoRound, HigherTiouWinsOverHigherFrameIou) {
  // GT1 is a close fit at frame 2 only; GT2 follows the whole track a little off.
  const Box7 p = box(0, 0, 0, 4, 2, 1.5);
  const std::vector<tracking::Tracklet> preds{pred_track(1, constant(0, 5, p))};
  const std::vector<GtTrack> gts{gt_track(1, {{2, box(0.05, 0, 0, 4, 2, 1.5)}}),
                                 gt_track(2, constant(0, 5, box(0.3, 0, 0, 4, 2, 1.5)))};
  ASSERT_GT(iou3d(p, gts[0].entries[0].box), iou3d(p, gts[1].entries[2].box));
  const auto out = two_round_assign(preds, gts, 0.1);
  ASSERT_EQ(out[0].candidates.size(), 2u);
  EXPECT_EQ(out[0].candidates[0].first, 2u);
  EXPECT_EQ(*out[0].proposals[2].gt_track_id, 2u);
  EXPECT_EQ(out[0].proposals[2].gt_box, gts[1].entries[2].box);
}

TEST(TwoRound, MissingBoxFallsBackToNextCandidate) {
  const Box7 p = box(0, 0, 0, 4, 2, 1.5);
  const std::vector<tracking::Tracklet> preds{pred_track(1, constant(0, 6, p))};
  auto g2 = constant(0, 6, p);
  g2.erase(g2.begin() + 3);
  const std::vector<GtTrack> gts{gt_track(1, constant(2, 5, box(0.2, 0, 0, 4, 2, 1.5))), gt_track(2, g2)};
  const auto out = two_round_assign(preds, gts, 0.2);
  ASSERT_EQ(out[0].candidates.size(), 2u);
  EXPECT_EQ(*out[0].proposals[2].gt_track_id, 2u);
  EXPECT_EQ(*out[0].proposals[3].gt_track_id, 1u);
}

TEST(TwoRound, TieGoesToLowerId) {
  const Box7 p = box(0, 0, 0, 4, 2, 1.5);
  const std::vector<tracking::Tracklet> preds{pred_track(1, constant(0, 4, p))};
  const std::vector<GtTrack> gts{gt_track(9, constant(0, 4, p)), gt_track(4, constant(0, 4, p))};
  const auto out = two_round_assign(preds, gts, 0.3);
  EXPECT_EQ(out[0].candidates[0].first, 4u);
  for (const auto& pr : out[0].proposals) EXPECT_EQ(*pr.gt_track_id, 4u);
}

TEST(TwoRound, MatchesExhaustiveOracle) {
  CounterRng rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    const int frames = 1 + static_cast<int>(rng.below(10));
    const int n_gt = 1 + static_cast<int>(rng.below(4));
    const int n_pred = 1 + static_cast<int>(rng.below(4));
    const Box7 anchor = box(0, 0, 0, 4, 2, 1.5);
    auto jitter = [&](const Box7& b) {
      Box7 x = b;
      x.cx += rng.normal(0, 0.6);
      x.cy += rng.normal(0, 0.4);
      return x;
    };
    std::vector<GtTrack> gts;
    for (int g = 0; g < n_gt; ++g) {
      std::vector<std::pair<int, Box7>> e;
      for (int f = 0; f < frames; ++f) {
        if (rng.bernoulli(0.7)) e.emplace_back(f, jitter(anchor));
      }
      // Two GT tracks may share an id-order tie in TIoU only by accident; ids are distinct.
      gts.push_back(gt_track(static_cast<std::uint64_t>(10 + g), e));
    }
    std::vector<tracking::Tracklet> preds;
    for (int p = 0; p < n_pred; ++p) {
      std::vector<std::pair<int, Box7>> e;
      for (int f = 0; f < frames; ++f) {
        if (rng.bernoulli(0.7)) e.emplace_back(f, jitter(anchor));
      }
      if (e.empty()) e.emplace_back(0, anchor);
      preds.push_back(pred_track(static_cast<std::uint64_t>(p + 1), e));
    }
    const double thr = 0.3;
    const auto out = two_round_assign(preds, gts, thr);
    ASSERT_EQ(out.size(), preds.size());

    for (std::size_t p = 0; p < preds.size(); ++p) {
      const auto pm = as_map(preds[p]);
      std::vector<double> t(gts.size());
      for (std::size_t g = 0; g < gts.size(); ++g) t[g] = tiou_oracle(pm, as_map(gts[g]));
      // Enumerate candidate subsets; keep the one equal to {g : t > thr}.
      unsigned cand = 0;
      for (unsigned mask = 0; mask < (1u << gts.size()); ++mask) {
        bool ok = true;
        for (std::size_t g = 0; g < gts.size(); ++g) ok = ok && (((mask >> g) & 1u) != 0) == (t[g] > thr);
        if (ok) cand = mask;
      }
      EXPECT_EQ(out[p].matched, cand != 0);
      ASSERT_EQ(out[p].proposals.size(), preds[p].entries.size());
      for (std::size_t k = 0; k < preds[p].entries.size(); ++k) {
        const int f = preds[p].entries[k].frame_index;
        // Every selection among candidates present at f; best by (TIoU desc, id asc).
        std::optional<std::size_t> best;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (((cand >> g) & 1u) == 0 || gts[g].find(f) == nullptr) continue;
          if (!best || t[g] > t[*best] || (t[g] == t[*best] && gts[g].gt_track_id < gts[*best].gt_track_id)) {
            best = g;
          }
        }
        const auto& got = out[p].proposals[k];
        EXPECT_EQ(got.frame_index, f);
        if (!best) {
          EXPECT_FALSE(got.positive());
        } else {
          ASSERT_TRUE(got.positive());
          EXPECT_EQ(*got.gt_track_id, gts[*best].gt_track_id);
          EXPECT_EQ(got.gt_box, gts[*best].find(f)->box);
          EXPECT_EQ(got.iou, iou3d(preds[p].entries[k].box, got.gt_box));
        }
      }
    }
  }
}

TEST(ObjectCentric, Thresholds) {
  const Box7 g = box(0, 0, 0, 4, 2, 1.5);
  // Shift along x until iou3d = 0.44: (4 - d) / (4 + d) = 0.44.
  const double d = 4 * (1 - 0.44) / (1 + 0.44);
  const Box7 p = box(d, 0, 0, 4, 2, 1.5);
  ASSERT_NEAR(iou3d(p, g), 0.44, 1e-12);
  const std::vector<GtTrack> gts{gt_track(3, {{0, g}})};
  auto out = object_centric_assign(std::vector{pred_track(1, {{0, p}})}, gts, {});
  EXPECT_FALSE(out[0].proposals[0].positive());
  out = object_centric_assign(std::vector{pred_track(1, {{0, g}})}, gts, {});
  EXPECT_TRUE(out[0].proposals[0].positive());

  const std::vector<GtTrack> peds{gt_track(3, {{0, g}}, ObjectClass::Pedestrian)};
  out = object_centric_assign(std::vector{pred_track(1, {{0, p}}, ObjectClass::Pedestrian)}, peds, {});
  EXPECT_TRUE(out[0].proposals[0].positive());
}

TEST(ObjectCentric, MatchesArgmaxOracle) {
  CounterRng rng(53);
  const ObjectCentricThresholds thr;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GtTrack> gts;
    for (int g = 0; g < 4; ++g) {
      std::vector<std::pair<int, Box7>> e;
      for (int f = 0; f < 5; ++f) {
        if (rng.bernoulli(0.7)) e.emplace_back(f, offtrack::testing::random_box(rng, 1.5));
      }
      gts.push_back(gt_track(static_cast<std::uint64_t>(g + 1), e));
    }
    std::vector<std::pair<int, Box7>> e;
    for (int f = 0; f < 5; ++f) e.emplace_back(f, offtrack::testing::random_box(rng, 1.5));
    const auto pred = pred_track(1, e);
    const auto out = object_centric_assign(std::vector{pred}, gts, thr);
    for (std::size_t k = 0; k < pred.entries.size(); ++k) {
      double best = -1;
      std::uint64_t id = 0;
      for (const auto& g : gts) {
        const GtEntry* ge = g.find(pred.entries[k].frame_index);
        if (ge == nullptr) continue;
        const double v = iou3d(pred.entries[k].box, ge->box);
        if (v > best) {
          best = v;
          id = g.gt_track_id;
        }
      }
      const auto& got = out[0].proposals[k];
      EXPECT_EQ(got.positive(), best >= thr.vehicle);
      if (got.positive()) EXPECT_EQ(*got.gt_track_id, id);
    }
  }
}
