#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "egoyaw/evaluation.hpp"

using namespace egoyaw;

namespace {

LabeledObject car(double x, double z, double u, std::optional<double> score = std::nullopt) {
  LabeledObject o;
  o.box2d = {u, 100, u + 80, 160};
  o.box3d = {{x, 1.0, z}, {1.5, 1.6, 3.9}, Angle(0.2)};
  o.alpha = Angle(0.1);
  o.score = score;
  return o;
}

// Two GT cars; predictions scored 0.9 (hit), 0.8 (miss), 0.7 (hit).
std::vector<FrameObjects> fixture() {
  FrameObjects f;
  f.gt = {car(-4, 20, 100), car(4, 25, 700)};
  f.pred = {car(-4, 20, 100, 0.9), car(0, 40, 400, 0.8), car(4, 25, 700, 0.7)};
  return {f};
}

}  // namespace

TEST(Median, Examples) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(MedianAngleError, Examples) {
  const std::vector<Angle> t{Angle(0.1), Angle(-2.0), Angle(3.0)};
  EXPECT_EQ(median_angle_error_deg(t, t), 0.0);
  const std::vector<Angle> truth{Angle(), Angle(), Angle()};
  const std::vector<Angle> pred{Angle::from_degrees(1), Angle::from_degrees(2), Angle::from_degrees(100)};
  EXPECT_NEAR(median_angle_error_deg(pred, truth), 2.0, 1e-9);
  const std::vector<Angle> p1{Angle::from_degrees(179)};
  const std::vector<Angle> t1{Angle::from_degrees(-179)};
  EXPECT_NEAR(median_angle_error_deg(p1, t1), 2.0, 1e-9);
  EXPECT_THROW(median_angle_error_deg({}, {}), std::invalid_argument);
  EXPECT_THROW(median_angle_error_deg(p1, truth), std::invalid_argument);
}

TEST(MedianAngleError, InvariantUnderCommonRotation) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> any(-kPi, kPi);
  std::vector<Angle> p, t, p2, t2;
  const Angle shift(any(rng));
  for (int i = 0; i < 101; ++i) {
    p.emplace_back(any(rng));
    t.emplace_back(any(rng));
    p2.push_back(p.back() + shift);
    t2.push_back(t.back() + shift);
  }
  EXPECT_NEAR(median_angle_error_deg(p, t), median_angle_error_deg(p2, t2), 1e-9);
  EXPECT_LE(median_angle_error_deg(p, t), 180.0);
}

TEST(ComponentErrors, IdenticalSets) {
  FrameObjects f;
  f.gt = {car(-4, 20, 100), car(4, 25, 700)};
  f.pred = f.gt;
  const std::vector<FrameObjects> frames{f};
  const ComponentErrors e = component_errors(frames, {});
  EXPECT_EQ(e.matched, 2u);
  EXPECT_EQ(*e.z, 0.0);
  EXPECT_EQ(*e.yaw_deg, 0.0);
  EXPECT_EQ(*e.h, 0.0);
}

TEST(ComponentErrors, DepthOffset) {
  FrameObjects f;
  f.gt = {car(0, 20, 300)};
  f.pred = {car(0, 22.89, 300)};
  const std::vector<FrameObjects> frames{f};
  const ComponentErrors e = component_errors(frames, {});
  EXPECT_NEAR(*e.z, 2.89, 1e-12);
  EXPECT_EQ(*e.x, 0.0);
}

TEST(ComponentErrors, NoMatches) {
  FrameObjects f;
  f.gt = {car(0, 20, 100)};
  f.pred = {car(0, 20, 900)};
  const std::vector<FrameObjects> frames{f};
  const ComponentErrors e = component_errors(frames, {});
  EXPECT_EQ(e.matched, 0u);
  EXPECT_EQ(e.unmatched_pred, 1u);
  EXPECT_EQ(e.unmatched_gt, 1u);
  EXPECT_FALSE(e.z.has_value());
}

TEST(GreedyMatch, OneToOne) {
  FrameObjects f;
  f.gt = {car(0, 20, 100)};
  f.pred = {car(0, 20, 100), car(0, 20, 105)};
  const auto m = greedy_match_2d(f, 0, 0.5);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].pred, 0u);
}

TEST(InterpolatedAp, Fixture) {
  const std::vector<bool> hits{true, false, true};
  EXPECT_NEAR(interpolated_ap(hits, 2, ApInterpolation::k40Point), (20 * 1.0 + 20 * (2.0 / 3.0)) / 40, 1e-12);
  EXPECT_NEAR(interpolated_ap(hits, 2, ApInterpolation::k11Point), (6 * 1.0 + 5 * (2.0 / 3.0)) / 11, 1e-12);
  EXPECT_EQ(interpolated_ap({}, 2, ApInterpolation::k40Point), 0.0);
}

TEST(AveragePrecision, FixtureAllModes) {
  const auto frames = fixture();
  for (ApMode mode : {ApMode::k2D, ApMode::kBev, ApMode::k3D}) {
    const ApResult r = average_precision(frames, mode, Difficulty::kEasy, {});
    EXPECT_NEAR(r.ap, 0.8333333333, 1e-6) << ap_mode_name(mode);
    EXPECT_EQ(r.true_positives, 2u);
    EXPECT_EQ(r.false_positives, 1u);
  }
  EXPECT_NEAR(average_precision(frames, ApMode::k3D, Difficulty::kEasy, {}, ApInterpolation::k11Point).ap,
              0.8484848485, 1e-6);
}

TEST(AveragePrecision, PerfectAndEmpty) {
  auto frames = fixture();
  frames[0].pred = {car(-4, 20, 100, 0.5), car(4, 25, 700, 0.6)};
  EXPECT_NEAR(average_precision(frames, ApMode::k3D, Difficulty::kHard, {}).ap, 1.0, 1e-12);
  frames[0].pred.clear();
  EXPECT_EQ(average_precision(frames, ApMode::k3D, Difficulty::kHard, {}).ap, 0.0);
}

TEST(AveragePrecision, IgnoresGroundTruthOutsideBin) {
  auto frames = fixture();
  frames[0].gt[1].occluded = 2;
  frames[0].pred = {car(-4, 20, 100, 0.9), car(4, 25, 700, 0.7)};
  const ApResult easy = average_precision(frames, ApMode::k3D, Difficulty::kEasy, {});
  EXPECT_EQ(easy.gt_count, 1u);
  EXPECT_EQ(easy.false_positives, 0u);
  EXPECT_NEAR(easy.ap, 1.0, 1e-12);
}

TEST(AveragePrecision, InvariantUnderMonotoneScoreMap) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0, 1);
  std::vector<FrameObjects> frames(5);
  for (auto& f : frames) {
    for (int k = 0; k < 4; ++k) f.gt.push_back(car(-9 + 6 * k, 15 + 5 * k, 20 + 300 * k));
    for (int k = 0; k < 4; ++k) {
      if (unit(rng) < 0.7) {
        LabeledObject p = car(-9 + 6 * k + 0.3 * unit(rng), 15 + 5 * k + 0.3 * unit(rng), 20 + 300 * k, unit(rng));
        f.pred.push_back(p);
      }
    }
    f.pred.push_back(car(0, 50, 1000, unit(rng)));
  }
  auto mapped = frames;
  for (auto& f : mapped) {
    for (auto& p : f.pred) p.score = 3.0 * *p.score * *p.score + 1.0;
  }
  for (ApMode mode : {ApMode::k2D, ApMode::kBev, ApMode::k3D}) {
    const double a = average_precision(frames, mode, Difficulty::kHard, {}).ap;
    EXPECT_NEAR(a, average_precision(mapped, mode, Difficulty::kHard, {}).ap, 1e-12);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(AveragePrecision, AddingFalsePositiveNeverHelps) {
  auto frames = fixture();
  const double before = average_precision(frames, ApMode::k3D, Difficulty::kEasy, {}).ap;
  frames[0].pred.push_back(car(0, 55, 1100, 0.95));
  EXPECT_LE(average_precision(frames, ApMode::k3D, Difficulty::kEasy, {}).ap, before);
}

TEST(Difficulty, Limits) {
  EXPECT_EQ(difficulty_limits(Difficulty::kEasy).min_height_px, 40.0);
  EXPECT_EQ(difficulty_limits(Difficulty::kModerate).max_occlusion, 1);
  EXPECT_EQ(difficulty_limits(Difficulty::kHard).max_truncation, 0.5);
  LabeledObject o = car(0, 20, 100);
  EXPECT_TRUE(in_difficulty(o, Difficulty::kEasy));
  o.truncated = 0.2;
  EXPECT_FALSE(in_difficulty(o, Difficulty::kEasy));
  EXPECT_TRUE(in_difficulty(o, Difficulty::kModerate));
}
