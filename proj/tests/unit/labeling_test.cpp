#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "affex/labeling/annotate.hpp"
#include "affex/labeling/dataset.hpp"
#include "affex/labeling/masks.hpp"
#include "affex/world/render.hpp"
#include "test_scenes.hpp"

namespace affex {
namespace {

using testing::AddObject;
using testing::EmptyRoom;

AgentState AgentAt(double x, double y, int yaw_index = 0, int pitch_index = 0) {
  AgentState a;
  a.cell_x = static_cast<int>(std::lround(x / 0.25));
  a.cell_y = static_cast<int>(std::lround(y / 0.25));
  a.yaw_index = yaw_index;
  a.pitch_index = pitch_index;
  return a;
}

// Sort-based nearest-rank percentile, written independently of the library.
float OraclePercentile(std::vector<float> v, double q) {
  std::sort(v.begin(), v.end());
  long rank = static_cast<long>(std::ceil(q * static_cast<double>(v.size()) - 1e-9));
  rank = std::max(1L, std::min(rank, static_cast<long>(v.size())));
  return v[static_cast<std::size_t>(rank - 1)];
}

LabelState OracleRule(const std::vector<std::vector<float>>& frames, float pos_t, float neg_t) {
  bool any = false, pos = false, neg = false;
  for (const auto& f : frames) {
    if (f.empty()) continue;
    any = true;
    pos |= OraclePercentile(f, 0.95) > pos_t;
    neg |= OraclePercentile(f, 0.05) < neg_t;
  }
  if (!any || pos == neg) return LabelState::kUnknown;
  return pos ? LabelState::kPositive : LabelState::kNegative;
}

ObjectLevelMap MapWith(std::initializer_list<int> ids) {
  ObjectLevelMap m(Aabb{{0, 0, 0}, {10, 10, 3}});
  for (int id : ids) m.EnsureInstance(id);
  return m;
}

TEST(AnnotateByInteraction, SuccessAndFailure) {
  ObjectLevelMap m = MapWith({3, 4});
  AnnotateByInteraction(m, 3, Affordance::kPickup, true);
  AnnotateByInteraction(m, 4, Affordance::kPickup, false);
  EXPECT_EQ(m.instance(3).label(Affordance::kPickup),
            (AffordanceLabel{LabelState::kPositive, LabelSource::kInteraction}));
  EXPECT_EQ(m.instance(4).label(Affordance::kPickup),
            (AffordanceLabel{LabelState::kNegative, LabelSource::kInteraction}));
  EXPECT_EQ(m.instance(4).interaction(Affordance::kPickup), InteractionState::kFailed);
  EXPECT_EQ(m.instance(4).interaction(Affordance::kPush), InteractionState::kNone);
}

TEST(AnnotateByInteraction, OverridesConfidenceLabel) {
  ObjectLevelMap m = MapWith({3});
  m.mutable_instance(3).label(Affordance::kPush) = {LabelState::kPositive, LabelSource::kConfidence};
  AnnotateByInteraction(m, 3, Affordance::kPush, false);
  EXPECT_EQ(m.instance(3).label(Affordance::kPush),
            (AffordanceLabel{LabelState::kNegative, LabelSource::kInteraction}));
}

TEST(AnnotateByInteraction, SuccessIsNotUndoneByLaterFailure) {
  ObjectLevelMap m = MapWith({3});
  AnnotateByInteraction(m, 3, Affordance::kPush, true);
  AnnotateByInteraction(m, 3, Affordance::kPush, false);
  EXPECT_EQ(m.instance(3).label(Affordance::kPush).state, LabelState::kPositive);
  EXPECT_EQ(m.instance(3).interaction(Affordance::kPush), InteractionState::kSucceeded);
}

TEST(AnnotateByInteraction, UnknownInstanceThrows) {
  ObjectLevelMap m = MapWith({3});
  EXPECT_THROW(AnnotateByInteraction(m, 9, Affordance::kPickup, true), ContractViolation);
}

TEST(Percentile, MatchesSortOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.Int(1, 60);
    std::vector<float> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.Uniform());
    for (int q : {5, 50, 95, 100}) {
      auto copy = v;
      EXPECT_EQ(NearestRankPercentile(copy, q), OraclePercentile(v, q / 100.0)) << n << " " << q;
    }
  }
}

TEST(Percentile, TwentyValues) {
  std::vector<float> v;
  for (int i = 1; i <= 20; ++i) v.push_back(static_cast<float>(i));
  EXPECT_EQ(NearestRankPercentile(v, 95), 19.0f);
  EXPECT_EQ(NearestRankPercentile(v, 5), 1.0f);
}

std::vector<float> Constant(int n, float v) { return std::vector<float>(static_cast<std::size_t>(n), v); }

TEST(ConfidenceRule, PositiveFromOneConfidentFrame) {
  const ConfidenceThresholds t;
  EXPECT_EQ(DecideByConfidence({Constant(20, 0.85f), Constant(20, 0.92f), Constant(20, 0.70f)}, t),
            LabelState::kPositive);
}

TEST(ConfidenceRule, ExactThresholdsAbstain) {
  const ConfidenceThresholds t;
  EXPECT_EQ(DecideByConfidence({Constant(10, 0.9f)}, t), LabelState::kUnknown);
  EXPECT_EQ(DecideByConfidence({Constant(10, 0.1f), Constant(10, 0.5f)}, t), LabelState::kUnknown);
}

TEST(ConfidenceRule, ConflictAbstains) {
  const ConfidenceThresholds t;
  EXPECT_EQ(DecideByConfidence({Constant(10, 0.95f), Constant(10, 0.05f)}, t), LabelState::kUnknown);
  EXPECT_EQ(DecideByConfidence({Constant(10, 0.05f)}, t), LabelState::kNegative);
}

TEST(ConfidenceRule, EmptyFramesSkipped) {
  const ConfidenceThresholds t;
  EXPECT_EQ(DecideByConfidence({{}, Constant(4, 0.99f)}, t), LabelState::kPositive);
  EXPECT_EQ(DecideByConfidence({{}, {}}, t), LabelState::kUnknown);
}

TEST(ConfidenceRule, RandomizedAgainstOracle) {
  Rng rng(5);
  const ConfidenceThresholds t;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<float>> frames(static_cast<std::size_t>(rng.Int(1, 6)));
    const double centre = rng.Uniform();
    for (auto& f : frames) {
      f.resize(static_cast<std::size_t>(rng.Int(0, 40)));
      for (auto& x : f) {
        // Hit the thresholds exactly now and then.
        const double u = rng.Uniform();
        x = u < 0.05 ? 0.9f : u < 0.1 ? 0.1f : static_cast<float>(std::clamp(centre + 0.3 * rng.Normal(), 0.0, 1.0));
      }
    }
    EXPECT_EQ(DecideByConfidence(frames, t), OracleRule(frames, 0.9f, 0.1f)) << trial;
  }
}

// Two-instance frame: left half id 1, right half id 2.
Frame SplitFrame(int step) {
  Frame f;
  f.depth = Image<float>(4, 4, 1, 1.0f);
  f.instance_ids = Image<std::int32_t>(4, 4);
  f.appearance = Image<float>(4, 4, 3);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) f.instance_ids(r, c) = c < 2 ? 1 : 2;
  f.intrinsics = {4, 4, 2.0};
  f.step_index = step;
  return f;
}

TEST(AnnotateByConfidence, LabelsOnlyCandidates) {
  ObjectLevelMap m = MapWith({1, 2});
  AnnotateByInteraction(m, 2, Affordance::kPickup, false);
  const std::vector<Frame> frames = {SplitFrame(0), SplitFrame(1)};
  std::vector<Image<float>> preds(2, Image<float>(4, 4, kNumAffordances, 0.5f));
  for (std::size_t p = 0; p < 16; ++p) preds[1].at_pixel(p, 0) = 0.99f;
  const int n = AnnotateByConfidence(m, frames, preds, ConfidenceThresholds{});
  EXPECT_EQ(n, 1);
  EXPECT_EQ(m.instance(1).label(Affordance::kPickup),
            (AffordanceLabel{LabelState::kPositive, LabelSource::kConfidence}));
  EXPECT_EQ(m.instance(2).label(Affordance::kPickup).source, LabelSource::kInteraction);
  EXPECT_EQ(m.instance(1).label(Affordance::kPush).state, LabelState::kUnknown);
}

TEST(AnnotateByConfidence, PercentilesUseInstancePixelsOnly) {
  ObjectLevelMap m = MapWith({1, 2});
  const std::vector<Frame> frames = {SplitFrame(0)};
  std::vector<Image<float>> preds(1, Image<float>(4, 4, kNumAffordances, 0.5f));
  for (int r = 0; r < 4; ++r) preds[0](r, 3, 1) = 0.01f;  // half of instance 2
  AnnotateByConfidence(m, frames, preds, ConfidenceThresholds{});
  EXPECT_EQ(m.instance(1).label(Affordance::kPush).state, LabelState::kUnknown);
  EXPECT_EQ(m.instance(2).label(Affordance::kPush).state, LabelState::kNegative);
}

struct EpisodeFixture : public ::testing::Test {
  Scene scene = EmptyRoom();
  WorldConfig w;
  CameraConfig cam;
  int box = 0, cup = 0, table = 0;
  std::vector<std::shared_ptr<const Frame>> frames;
  ObjectLevelMap map{scene.room};

  void SetUp() override {
    box = AddObject(scene, "box", 5.0, 6.5, 0.0, {0.5, 0.5, 0.5});
    table = AddObject(scene, "side_table", 3.5, 6.5, 0.0, {0.6, 0.6, 0.6});
    cup = AddObject(scene, "cup", 3.5, 6.5, 0.6, {0.08, 0.08, 0.1});
    int step = 0;
    for (const auto& a : {AgentAt(5, 5, 0, -1), AgentAt(4, 5, 0, -1), AgentAt(5, 5, 6, 0), AgentAt(4, 5.5, 11, -2),
                          AgentAt(6, 5, 10, -1), AgentAt(5, 4, 2, 0)}) {
      frames.push_back(std::make_shared<Frame>(Render(scene, a, w, cam, 2, step++)));
      map.IntegrateFrame(*frames.back());
    }
  }
};

TEST_F(EpisodeFixture, NoLabelsGiveEmptyMasks) {
  for (const auto& af : PropagateToFrames(map, frames)) EXPECT_FALSE(HasAnyLabel(af.labels));
}

TEST_F(EpisodeFixture, PropagationCoversEveryVisibleFrameExactly) {
  AnnotateByInteraction(map, box, Affordance::kPush, true);
  AnnotateByInteraction(map, table, Affordance::kPickup, false);
  const auto annotated = PropagateToFrames(map, frames);
  ASSERT_EQ(annotated.size(), frames.size());
  int box_frames = 0;
  for (const auto& af : annotated) {
    bool has_box = false;
    for (std::size_t p = 0; p < af.labels.pixel_count(); ++p) {
      const int id = af.frame->instance_ids.at_pixel(p);
      has_box |= id == box;
      EXPECT_EQ(af.labels.at_pixel(p, 1) == kLabelPositive, id == box);
      EXPECT_EQ(af.labels.at_pixel(p, 0) == kLabelNegative, id == table);
      EXPECT_EQ(af.labels.at_pixel(p, 0) == kLabelPositive, false);
      EXPECT_EQ(af.labels.at_pixel(p, 1) == kLabelNegative, false);
    }
    box_frames += has_box;
  }
  EXPECT_GT(box_frames, 1);
  EXPECT_EQ(static_cast<std::size_t>(box_frames), map.instance(box).frames_seen.size());
}

TEST(SphereAnnotation, DiskOnFacingWall) {
  const Scene scene = EmptyRoom();
  const WorldConfig w;
  const CameraConfig cam;
  const AgentState a = AgentAt(5.0, 9.0);  // wall 1 m ahead
  auto f = std::make_shared<Frame>(Render(scene, a, w, cam, 1, 0));
  const Vec3 centre = f->camera.position + f->camera.Forward() * 1.0;
  const InteractionEvent e{0, Affordance::kPush, true, centre, kWallId};
  const std::vector<std::shared_ptr<const Frame>> frames = {f};
  const auto out = SphereAnnotation(std::span(&e, 1), frames);
  // Plane perpendicular at 1 m: lateral offset equals pixel offset / focal.
  const double r_px = f->intrinsics.focal * 0.20 / 1.0;
  int mismatches = 0, labelled = 0;
  for (int r = 0; r < f->height(); ++r)
    for (int c = 0; c < f->width(); ++c) {
      const double dr = r + 0.5 - 0.5 * f->height(), dc = c + 0.5 - 0.5 * f->width();
      const bool inside = dr * dr + dc * dc <= r_px * r_px;
      const bool got = out[0].labels(r, c, 1) == kLabelPositive;
      labelled += got;
      mismatches += inside != got;
      EXPECT_EQ(out[0].labels(r, c, 0), kLabelUnknown);
    }
  EXPECT_LE(mismatches, 4);
  EXPECT_NEAR(labelled, M_PI * r_px * r_px, 0.1 * M_PI * r_px * r_px);
}

TEST_F(EpisodeFixture, SphereWindowZeroLabelsOnlyEventFrame) {
  const InteractionEvent e{2, Affordance::kPickup, false, scene.Find(box)->Bounds().Center(), box};
  const auto out = SphereAnnotation(std::span(&e, 1), frames, 0.2, 0);
  for (const auto& af : out) {
    if (af.frame->step_index != 2) {
      EXPECT_FALSE(HasAnyLabel(af.labels));
    }
  }
}

TEST_F(EpisodeFixture, SphereSpillsBeyondSmallObject) {
  const ObjectInstance* c = scene.Find(cup);
  const Vec3 top = c->Bounds().Center();
  const InteractionEvent e{0, Affordance::kPickup, true, top, cup};
  const auto out = SphereAnnotation(std::span(&e, 1), frames, 0.2, 10);
  int cup_px = 0, spill = 0;
  for (const auto& af : out)
    for (std::size_t p = 0; p < af.labels.pixel_count(); ++p) {
      const bool lab = af.labels.at_pixel(p, 0) == kLabelPositive;
      const bool is_cup = af.frame->instance_ids.at_pixel(p) == cup;
      cup_px += is_cup;
      spill += lab && !is_cup;
    }
  ASSERT_GT(cup_px, 0);
  EXPECT_GT(spill, 0);
}

AnnotatedFrame Synthetic(int step, bool balanced) {
  auto f = std::make_shared<Frame>(SplitFrame(step));
  AnnotatedFrame af{f, UnlabeledMask(*f)};
  af.labels.at_pixel(0, 0) = kLabelPositive;
  if (balanced) af.labels.at_pixel(5, 0) = kLabelNegative;
  else af.labels.at_pixel(5, 1) = kLabelNegative;
  return af;
}

TEST(ExtractDataset, BalancedFilter) {
  std::vector<AnnotatedFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(Synthetic(i, i % 3 == 0));
  const EpisodeDataset ds = ExtractDataset(frames, {}, 1);
  EXPECT_EQ(ds.size(), 4u);
  EXPECT_EQ(ds.usage_count, 0);
  for (const auto* part : {&ds.train, &ds.val, &ds.test})
    for (const auto& s : *part) EXPECT_TRUE(IsBalanced(s.labels));
}

TEST(ExtractDataset, SplitSizesAndDeterminism) {
  std::vector<AnnotatedFrame> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(Synthetic(i, true));
  const EpisodeDataset a = ExtractDataset(frames, {0.7, 0.15, 0.15}, 9);
  EXPECT_EQ(a.train.size(), 14u);
  EXPECT_EQ(a.val.size(), 3u);
  EXPECT_EQ(a.test.size(), 3u);
  const EpisodeDataset b = ExtractDataset(frames, {0.7, 0.15, 0.15}, 9);
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].frame, b.train[i].frame);
  std::vector<int> steps;
  for (const auto* part : {&a.train, &a.val, &a.test})
    for (const auto& s : *part) steps.push_back(s.frame->step_index);
  std::sort(steps.begin(), steps.end());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(steps[static_cast<std::size_t>(i)], i);
}

TEST(ExtractDataset, NoQualifyingFramesGivesEmptyDataset) {
  std::vector<AnnotatedFrame> frames = {Synthetic(0, false)};
  EXPECT_TRUE(ExtractDataset(frames, {}, 1).empty());
  EXPECT_THROW(ExtractDataset(frames, {0.5, 0.5, 0.5}, 1), ContractViolation);
}

TEST_F(EpisodeFixture, DatasetPersistenceRoundTrip) {
  AnnotateByInteraction(map, box, Affordance::kPush, true);
  AnnotateByInteraction(map, table, Affordance::kPush, false);
  const EpisodeDataset ds = ExtractDataset(PropagateToFrames(map, frames), {}, 4, 12);
  ASSERT_FALSE(ds.empty());
  const auto dir = std::filesystem::temp_directory_path() / "affex_dataset_test";
  std::filesystem::remove_all(dir);
  WriteDataset(ds, dir);
  const EpisodeDataset back = ReadDataset(dir);
  EXPECT_EQ(back.episode_id, 12);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(*back.train[i].frame, *ds.train[i].frame);
    EXPECT_EQ(back.train[i].labels, ds.train[i].labels);
  }
  std::filesystem::remove(dir / "index.json");
  EXPECT_THROW(ReadDataset(dir), FormatError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace affex
