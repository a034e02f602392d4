#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "affex/world/render.hpp"
#include "affex/world/scene.hpp"
#include "affex/world/scene_io.hpp"
#include "affex/world/sim.hpp"
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

CameraConfig OddCamera() {
  CameraConfig c;
  c.width = 65;
  c.height = 65;
  return c;
}

TEST(SceneGeneration, DeterministicForSeed) {
  const SceneConfig cfg;
  EXPECT_EQ(SceneToJson(GenerateScene(7, cfg)).dump(), SceneToJson(GenerateScene(7, cfg)).dump());
  EXPECT_NE(SceneToJson(GenerateScene(7, cfg)).dump(), SceneToJson(GenerateScene(8, cfg)).dump());
}

TEST(SceneGeneration, ZeroObjectsGivesBareRoom) {
  const Scene s = EmptyRoom();
  EXPECT_TRUE(s.instances.empty());
  EXPECT_EQ(s.walls.size(), 4u);
}

// Validity checker applied to a sweep of seeds.
TEST(SceneGeneration, SeedSweepScenesAreValid) {
  const SceneConfig cfg;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Scene s = GenerateScene(seed, cfg);
    int pickupable = 0, inert = 0;
    std::set<int> ids;
    for (const auto& inst : s.instances) {
      const auto& cat = s.CategoryOf(inst);
      pickupable += cat.pickupable;
      inert += !cat.Interactable();
      EXPECT_TRUE(ids.insert(inst.id).second);
      EXPECT_GT(inst.id, 0);
      EXPECT_FALSE(s.Blocked(inst.Bounds(), {inst.id})) << "seed " << seed << " id " << inst.id;
      if (cat.placement == Placement::kFloor) {
        EXPECT_EQ(inst.pose.position.z, 0.0);
      }
    }
    EXPECT_GE(pickupable, 1) << "seed " << seed;
    EXPECT_GE(inert, 1) << "seed " << seed;
  }
}

TEST(SceneGeneration, PlacementFailureNamesCategory) {
  SceneConfig cfg;
  cfg.min_objects = cfg.max_objects = 3;
  cfg.max_placement_tries = 20;
  auto cats = DefaultCategories();
  for (auto& c : cats) {
    c.extent_min = {20.0, 20.0, 1.0};
    c.extent_max = {20.0, 20.0, 1.0};
  }
  try {
    GenerateScene(3, cfg, cats);
    FAIL() << "expected a placement failure";
  } catch (const SceneGenerationError& e) {
    EXPECT_FALSE(e.category().empty());
    EXPECT_NE(std::string(e.what()).find(e.category()), std::string::npos);
  }
}

TEST(SceneGeneration, InvalidExtentRangeRejected) {
  auto cats = DefaultCategories();
  cats[0].extent_min.x = 5.0;
  EXPECT_THROW(GenerateScene(1, SceneConfig{}, cats), ContractViolation);
}

TEST(SceneGeneration, RandomizeKeepsIdentities) {
  const SceneConfig cfg;
  const Scene base = GenerateScene(11, cfg);
  const Scene moved = RandomizeScene(base, 99, cfg);
  ASSERT_EQ(base.instances.size(), moved.instances.size());
  bool any_moved = false;
  for (std::size_t i = 0; i < base.instances.size(); ++i) {
    EXPECT_EQ(base.instances[i].id, moved.instances[i].id);
    EXPECT_EQ(base.instances[i].extent, moved.instances[i].extent);
    any_moved |= !(base.instances[i].pose == moved.instances[i].pose);
  }
  EXPECT_TRUE(any_moved);
}

TEST(SceneIo, JsonRoundTrip) {
  const Scene s = GenerateScene(5, SceneConfig{});
  const auto j = SceneToJson(s);
  EXPECT_EQ(SceneToJson(SceneFromJson(j)).dump(), j.dump());
  auto bad = j;
  bad["version"] = 2;
  EXPECT_THROW(SceneFromJson(bad), FormatError);
}

TEST(Render, WallAtOneMetre) {
  const Scene s = EmptyRoom();
  const WorldConfig w;
  const CameraConfig cam = OddCamera();
  const Frame f = Render(s, AgentAt(5.0, 9.0), w, cam, 1);
  EXPECT_NEAR(f.depth(32, 32), 1.0, 0.025);
  EXPECT_EQ(f.instance_ids(32, 32), kWallId);
}

TEST(Render, PitchedDownSeesFloor) {
  const Scene s = EmptyRoom();
  const WorldConfig w;
  const CameraConfig cam = OddCamera();
  const Frame f = Render(s, AgentAt(5.0, 5.0, 0, -4), w, cam, 1);
  EXPECT_NEAR(f.depth(32, 32), cam.mount_height / std::sin(DegToRad(60.0)), 1e-4);
  for (int c = 0; c < cam.width; ++c) EXPECT_EQ(f.instance_ids(cam.height - 1, c), kFloorId);
}

TEST(Render, Deterministic) {
  const Scene s = GenerateScene(3, SceneConfig{});
  const WorldConfig w;
  Rng rng(4);
  const AgentState a = SampleAgent(s, w, rng);
  EXPECT_EQ(Render(s, a, w, CameraConfig{}, 42), Render(s, a, w, CameraConfig{}, 42));
}

TEST(Render, DepthPositiveWhereHit) {
  const Scene s = GenerateScene(9, SceneConfig{});
  const WorldConfig w;
  Rng rng(1);
  for (int k = 0; k < 5; ++k) {
    const Frame f = Render(s, SampleAgent(s, w, rng), w, CameraConfig{}, k);
    for (std::size_t p = 0; p < f.depth.pixel_count(); ++p) {
      if (f.instance_ids.at_pixel(p) != kNoHitId) {
        EXPECT_GT(f.depth.at_pixel(p), 0.0f);
      } else {
        EXPECT_TRUE(std::isinf(f.depth.at_pixel(p)));
      }
    }
  }
}

TEST(DistanceImage, ZeroOffsetEqualsDepth) {
  const Scene s = GenerateScene(2, SceneConfig{});
  const WorldConfig w;
  Rng rng(2);
  const Frame f = Render(s, SampleAgent(s, w, rng), w, CameraConfig{}, 0);
  const Image<float> d = DistanceImage(f, f.camera.position);
  for (std::size_t p = 0; p < d.pixel_count(); ++p) {
    if (std::isinf(f.depth.at_pixel(p))) {
      EXPECT_TRUE(std::isinf(d.at_pixel(p)));
    } else {
      EXPECT_NEAR(d.at_pixel(p), f.depth.at_pixel(p), 1e-5);
    }
  }
}

TEST(DistanceImage, ArmBelowCamera) {
  const Scene s = EmptyRoom();
  const WorldConfig w;
  const CameraConfig cam = OddCamera();
  const AgentState a = AgentAt(5.0, 9.0);
  const Frame f = Render(s, a, w, cam, 0);
  const Image<float> d = DistanceImage(f, a.ArmBase(w, cam));
  EXPECT_NEAR(d(32, 32), std::sqrt(1.0 + 0.25), 1e-5);
}

class StepTest : public ::testing::Test {
 protected:
  Scene scene = EmptyRoom();
  WorldConfig w;
  CameraConfig cam;
};

TEST_F(StepTest, PickupCupWithinReach) {
  AddObject(scene, "dining_table", 5.0, 6.3, 0.0, {1.0, 0.6, 0.75});
  const int cup = AddObject(scene, "cup", 5.0, 6.0, 0.75, {0.08, 0.08, 0.1});
  AgentState a = AgentAt(5.0, 5.0);
  const StepResult r = Step(scene, a, Action::Pickup(4), cup, w, cam);
  EXPECT_TRUE(r.success);
  EXPECT_TRUE(scene.Find(cup)->held);
  EXPECT_EQ(a.inventory, cup);
  ASSERT_EQ(r.moved_instances.size(), 1u);
  EXPECT_EQ(r.moved_instances[0].id, cup);
}

TEST_F(StepTest, PickupSofaFails) {
  const int sofa = AddObject(scene, "sofa", 5.0, 6.5, 0.0, {2.0, 0.9, 0.8});
  AgentState a = AgentAt(5.0, 5.0);
  const StepResult r = Step(scene, a, Action::Pickup(4), sofa, w, cam);
  EXPECT_FALSE(r.success);
  EXPECT_FALSE(a.inventory.has_value());
  EXPECT_TRUE(r.moved_instances.empty());
}

TEST_F(StepTest, PickupOutOfReachOrWhileHoldingFails) {
  const int far_box = AddObject(scene, "box", 5.0, 8.0, 0.0, {0.3, 0.3, 0.3});
  const int near_box = AddObject(scene, "box", 5.0, 5.8, 0.0, {0.3, 0.3, 0.3});
  AgentState a = AgentAt(5.0, 5.0);
  EXPECT_FALSE(Step(scene, a, Action::Pickup(4), far_box, w, cam).success);
  EXPECT_FALSE(Step(scene, a, Action::Pickup(4), std::nullopt, w, cam).success);
  EXPECT_TRUE(Step(scene, a, Action::Pickup(4), near_box, w, cam).success);
  EXPECT_FALSE(Step(scene, a, Action::Pickup(4), far_box, w, cam).success);
}

TEST_F(StepTest, PushAgainstWallBlocked) {
  const int box = AddObject(scene, "box", 5.0, 9.85, 0.0, {0.3, 0.3, 0.3});
  AgentState a = AgentAt(5.0, 9.0);
  const Pose before = scene.Find(box)->pose;
  const StepResult r = Step(scene, a, Action::Push(4), box, w, cam);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(scene.Find(box)->pose, before);
}

TEST_F(StepTest, PushMovesAlongHeading) {
  const int box = AddObject(scene, "box", 6.0, 5.0, 0.0, {0.3, 0.3, 0.3});
  AgentState a = AgentAt(5.0, 5.0, 3);  // facing +x
  const StepResult r = Step(scene, a, Action::Push(4), box, w, cam);
  ASSERT_TRUE(r.success);
  EXPECT_NEAR(scene.Find(box)->pose.position.x, 6.25, 1e-12);
  EXPECT_NEAR(scene.Find(box)->pose.position.y, 5.0, 1e-12);
}

TEST_F(StepTest, PushCarriesRiders) {
  const int table = AddObject(scene, "side_table", 6.0, 5.0, 0.0, {0.5, 0.5, 0.55});
  const int cup = AddObject(scene, "cup", 6.0, 5.0, 0.55, {0.08, 0.08, 0.1});
  AgentState a = AgentAt(5.0, 5.0, 3);
  const StepResult r = Step(scene, a, Action::Push(4), table, w, cam);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.moved_instances.size(), 2u);
  EXPECT_NEAR(scene.Find(cup)->pose.position.x, 6.25, 1e-12);
  (void)table;
}

TEST_F(StepTest, PushNonPushableFails) {
  const int sofa = AddObject(scene, "sofa", 5.0, 6.0, 0.0, {2.0, 0.9, 0.8});
  AgentState a = AgentAt(5.0, 5.0);
  EXPECT_FALSE(Step(scene, a, Action::Push(4), sofa, w, cam).success);
}

TEST_F(StepTest, DropAndMoveHeld) {
  const int box = AddObject(scene, "box", 5.0, 5.8, 0.0, {0.3, 0.3, 0.3});
  AgentState a = AgentAt(5.0, 5.0);
  EXPECT_FALSE(Step(scene, a, {Action::kDrop}, std::nullopt, w, cam).success);
  EXPECT_FALSE(Step(scene, a, Action::MoveHeld(0), std::nullopt, w, cam).success);
  ASSERT_TRUE(Step(scene, a, Action::Pickup(4), box, w, cam).success);
  const Pose held = scene.Find(box)->pose;
  const StepResult up = Step(scene, a, Action::MoveHeld(4), std::nullopt, w, cam);
  ASSERT_TRUE(up.success);
  EXPECT_NEAR(scene.Find(box)->pose.position.z, held.position.z + 0.1, 1e-12);
  const StepResult drop = Step(scene, a, {Action::kDrop}, std::nullopt, w, cam);
  ASSERT_TRUE(drop.success);
  EXPECT_FALSE(scene.Find(box)->held);
  EXPECT_EQ(scene.Find(box)->pose.position.z, 0.0);
  EXPECT_FALSE(scene.Blocked(scene.Find(box)->Bounds(), {box}));
  EXPECT_FALSE(a.inventory.has_value());
}

TEST_F(StepTest, NavigationCollisionsFail) {
  AgentState a = AgentAt(5.0, 9.75);
  EXPECT_FALSE(Step(scene, a, {0}, std::nullopt, w, cam).success);
  EXPECT_EQ(a.cell_y, 39);
  a.pitch_index = 4;
  EXPECT_FALSE(Step(scene, a, {3}, std::nullopt, w, cam).success);
  EXPECT_TRUE(Step(scene, a, {4}, std::nullopt, w, cam).success);
  EXPECT_TRUE(Step(scene, a, {1}, std::nullopt, w, cam).success);
  EXPECT_EQ(a.yaw_index, 1);
  EXPECT_TRUE(Step(scene, a, {2}, std::nullopt, w, cam).success);
  EXPECT_TRUE(Step(scene, a, {2}, std::nullopt, w, cam).success);
  EXPECT_EQ(a.yaw_index, 11);
}

TEST_F(StepTest, MalformedActionRejected) {
  AgentState a = AgentAt(5.0, 5.0);
  EXPECT_THROW(Step(scene, a, {30}, std::nullopt, w, cam), ContractViolation);
  EXPECT_THROW(Step(scene, a, {-1}, std::nullopt, w, cam), ContractViolation);
}

// Random action streams: the simulator never reports success that the ground
// truth forbids, instance ids are conserved and the run is reproducible.
TEST(Simulator, RandomStreamInvariants) {
  const SceneConfig cfg;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Scene scene = GenerateScene(seed, cfg);
    std::vector<std::string> logs[2];
    for (int rep = 0; rep < 2; ++rep) {
      Rng rng(seed);
      Simulator sim(scene, SampleAgent(scene, WorldConfig{}, rng), WorldConfig{}, CameraConfig{}, seed);
      for (int t = 0; t < 150; ++t) {
        const Action act{static_cast<int>(rng.Index(Action::kCount))};
        std::optional<int> target;
        if (act.IsInteraction()) {
          const auto& insts = sim.scene().instances;
          target = insts[rng.Index(insts.size())].id;
        }
        const StepResult r = sim.Step(act, target);
        if (r.success && act.Kind() == ActionKind::kPickup) {
          EXPECT_TRUE(sim.scene().CategoryOf(*sim.scene().Find(*target)).pickupable);
        }
        if (r.success && act.Kind() == ActionKind::kPush) {
          EXPECT_TRUE(sim.scene().CategoryOf(*sim.scene().Find(*target)).pushable);
        }
        EXPECT_EQ(sim.scene().instances.size(), scene.instances.size());
        for (const auto& inst : sim.scene().instances) {
          if (!inst.held) {
            EXPECT_FALSE(sim.scene().Blocked(inst.Bounds(), {inst.id}));
          }
        }
        logs[rep].push_back(std::to_string(r.success) + ":" + std::to_string(r.moved_instances.size()) +
                            ":" + std::to_string(r.frame.depth(10, 10)));
      }
    }
    EXPECT_EQ(logs[0], logs[1]);
  }
}

TEST(Simulator, PushedInstanceRendersAtNewPose) {
  Scene scene = EmptyRoom();
  const int box = AddObject(scene, "box", 6.0, 5.0, 0.0, {0.3, 0.3, 0.3});
  AgentState a = AgentAt(5.0, 5.0, 3, -2);
  Simulator sim(scene, a, WorldConfig{}, CameraConfig{}, 1);
  const StepResult r = sim.Step(Action::Push(4), box);
  ASSERT_TRUE(r.success);
  const Aabb now = sim.scene().Find(box)->Bounds();
  int pixels = 0;
  for (int rr = 0; rr < r.frame.height(); ++rr)
    for (int c = 0; c < r.frame.width(); ++c)
      if (r.frame.instance_ids(rr, c) == box) {
        ++pixels;
        EXPECT_TRUE(now.Contains(BackProject(r.frame, rr, c), 1e-3));
      }
  EXPECT_GT(pixels, 0);
}

}  // namespace
}  // namespace affex
