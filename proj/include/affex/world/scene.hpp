#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/core/geometry.hpp"
#include "affex/core/random.hpp"

namespace affex {

using Rgb = std::array<double, 3>;

// Instance ids inside frames and maps. Objects use positive ids.
inline constexpr int kFloorId = 0;
inline constexpr int kWallId = -1;
inline constexpr int kNoHitId = -2;

inline constexpr int kNumAffordances = 2;
enum class Affordance : int { kPickup = 0, kPush = 1 };
inline constexpr std::array<const char*, kNumAffordances> kAffordanceNames = {"pickup", "push"};

enum class Placement { kFloor, kOnSurface };

struct ObjectCategory {
  std::string name;
  Vec3 extent_min;
  Vec3 extent_max;
  bool pickupable = false;
  bool pushable = false;
  Placement placement = Placement::kFloor;
  Rgb base_color{0.5, 0.5, 0.5};
  // Other objects may be placed on top.
  bool surface = false;

  bool Supports(Affordance a) const { return a == Affordance::kPickup ? pickupable : pushable; }
  bool Interactable() const { return pickupable || pushable; }
};

struct ObjectInstance {
  int id = 0;
  int category = 0;  // index into Scene::categories
  Pose pose;         // centre of the bottom face
  Vec3 extent;       // (w, d, h) in the object frame
  bool held = false;
  Rgb color{0.5, 0.5, 0.5};

  // World AABB. Exact for yaw in quarter turns, conservative otherwise.
  Aabb Bounds() const {
    const double c = std::abs(std::cos(pose.yaw));
    const double s = std::abs(std::sin(pose.yaw));
    const double hx = 0.5 * (extent.x * c + extent.y * s);
    const double hy = 0.5 * (extent.x * s + extent.y * c);
    const Vec3& p = pose.position;
    return {{p.x - hx, p.y - hy, p.z}, {p.x + hx, p.y + hy, p.z + extent.z}};
  }
  double MaxExtent() const { return std::max({extent.x, extent.y, extent.z}); }
};

struct SceneConfig {
  double room_width = 10.0;  // x
  double room_depth = 10.0;  // y
  double room_height = 3.0;
  int min_objects = 8;
  int max_objects = 14;
  // Splits the room in two along x with a doorway in the middle.
  bool two_rooms = false;
  double door_width = 1.2;
  double color_jitter = 0.06;
  int max_placement_tries = 400;
  double floor_clearance = 0.35;
};

std::vector<ObjectCategory> DefaultCategories();

struct Scene {
  std::uint64_t seed = 0;
  Aabb room;
  std::vector<Aabb> walls;
  std::vector<ObjectCategory> categories;
  std::vector<ObjectInstance> instances;

  const ObjectInstance* Find(int id) const {
    for (const auto& inst : instances)
      if (inst.id == id) return &inst;
    return nullptr;
  }
  ObjectInstance* Find(int id) {
    for (auto& inst : instances)
      if (inst.id == id) return &inst;
    return nullptr;
  }
  const ObjectCategory& CategoryOf(const ObjectInstance& inst) const {
    return categories.at(static_cast<std::size_t>(inst.category));
  }
  // Ground-truth affordance of any id appearing in a frame. Floor and walls
  // support nothing.
  bool Affords(int id, Affordance a) const {
    if (id <= 0) return false;
    const ObjectInstance* inst = Find(id);
    return inst != nullptr && CategoryOf(*inst).Supports(a);
  }
  bool Interactable(int id) const {
    return Affords(id, Affordance::kPickup) || Affords(id, Affordance::kPush);
  }

  // True when `box` leaves the room, touches a wall or overlaps a placed
  // object. Held objects do not collide.
  bool Blocked(const Aabb& box, std::initializer_list<int> ignore = {}) const {
    return Blocked(box, std::vector<int>(ignore));
  }
  bool Blocked(const Aabb& box, const std::vector<int>& ignore) const {
    constexpr double kEps = 1e-9;
    if (box.min.x < room.min.x - kEps || box.min.y < room.min.y - kEps ||
        box.max.x > room.max.x + kEps || box.max.y > room.max.y + kEps ||
        box.min.z < room.min.z - kEps)
      return true;
    for (const auto& w : walls)
      if (w.Overlaps(box)) return true;
    for (const auto& inst : instances) {
      if (inst.held) continue;
      bool skip = false;
      for (int id : ignore) skip |= id == inst.id;
      if (!skip && inst.Bounds().Overlaps(box)) return true;
    }
    return false;
  }
};

namespace detail {

inline double QuarterTurn(Rng& rng) {
  return static_cast<double>(rng.Int(0, 3)) * std::numbers::pi / 2.0;
}

inline Vec3 SampleExtent(const ObjectCategory& cat, Rng& rng) {
  return {rng.Uniform(cat.extent_min.x, cat.extent_max.x),
          rng.Uniform(cat.extent_min.y, cat.extent_max.y),
          rng.Uniform(cat.extent_min.z, cat.extent_max.z)};
}

// Keeps floor furniture out of the doorway so both rooms stay connected.
inline bool BlocksDoor(const Scene& scene, const SceneConfig& cfg, const Aabb& box) {
  if (!cfg.two_rooms) return false;
  const double mx = 0.5 * (scene.room.min.x + scene.room.max.x);
  const double my = 0.5 * (scene.room.min.y + scene.room.max.y);
  const Aabb door{{mx - 0.8, my - 0.5 * cfg.door_width - 0.1, 0.0},
                  {mx + 0.8, my + 0.5 * cfg.door_width + 0.1, 10.0}};
  return door.Overlaps(box);
}

inline bool PlaceOnFloor(Scene& scene, const SceneConfig& cfg, ObjectInstance& inst, Rng& rng) {
  for (int attempt = 0; attempt < cfg.max_placement_tries; ++attempt) {
    inst.pose.yaw = QuarterTurn(rng);
    inst.pose.position = {rng.Uniform(scene.room.min.x, scene.room.max.x),
                          rng.Uniform(scene.room.min.y, scene.room.max.y), 0.0};
    const Aabb b = inst.Bounds();
    if (scene.Blocked(b.InflatedXY(0.05), {inst.id}) || BlocksDoor(scene, cfg, b)) continue;
    bool crowded = false;
    for (const auto& other : scene.instances) {
      if (other.id == inst.id || other.held || other.pose.position.z > 0.0) continue;
      crowded |= other.Bounds().InflatedXY(cfg.floor_clearance).Overlaps(b);
    }
    if (!crowded) return true;
  }
  return false;
}

inline bool PlaceOnSurface(Scene& scene, const SceneConfig& cfg, ObjectInstance& inst,
                           const std::vector<int>& placed, Rng& rng) {
  std::vector<int> supports;
  for (int id : placed) {
    const ObjectInstance* s = scene.Find(id);
    if (s != nullptr && scene.CategoryOf(*s).surface) supports.push_back(id);
  }
  if (supports.empty()) return false;
  for (int attempt = 0; attempt < cfg.max_placement_tries; ++attempt) {
    const ObjectInstance& support =
        *scene.Find(supports[rng.Index(supports.size())]);
    const Aabb top = support.Bounds();
    inst.pose.yaw = QuarterTurn(rng);
    inst.pose.position = {rng.Uniform(top.min.x, top.max.x), rng.Uniform(top.min.y, top.max.y),
                          top.max.z};
    const Aabb b = inst.Bounds();
    if (b.min.x < top.min.x || b.max.x > top.max.x || b.min.y < top.min.y ||
        b.max.y > top.max.y)
      continue;
    if (!scene.Blocked(b.InflatedXY(0.02), {inst.id})) return true;
  }
  return false;
}

inline void PlaceAll(Scene& scene, const SceneConfig& cfg, Rng& rng) {
  // Instances are placed one at a time; unplaced ones are parked out of the
  // way by marking them held until positioned.
  for (auto& inst : scene.instances) inst.held = true;
  std::vector<int> placed;
  for (auto pass : {Placement::kFloor, Placement::kOnSurface}) {
    for (auto& inst : scene.instances) {
      const ObjectCategory& cat = scene.CategoryOf(inst);
      if (cat.placement != pass) continue;
      inst.held = false;
      // Surface items fall back to the floor when every surface is full.
      const bool ok = pass == Placement::kFloor
                          ? PlaceOnFloor(scene, cfg, inst, rng)
                          : PlaceOnSurface(scene, cfg, inst, placed, rng) ||
                                PlaceOnFloor(scene, cfg, inst, rng);
      if (!ok)
        throw SceneGenerationError(cat.name, "could not place an instance of category '" +
                                                 cat.name + "'");
      placed.push_back(inst.id);
    }
  }
}

inline std::vector<int> CategoriesWhere(const std::vector<ObjectCategory>& cats, auto pred) {
  std::vector<int> out;
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (pred(cats[i])) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

inline std::vector<ObjectCategory> DefaultCategories() {
  using P = Placement;
  // name, extent min, extent max, pickup, push, placement, colour, surface
  return {
      {"sofa", {1.6, 0.8, 0.7}, {2.2, 1.0, 0.9}, false, false, P::kFloor, {0.55, 0.27, 0.22}, false},
      {"cabinet", {0.8, 0.4, 0.8}, {1.2, 0.6, 1.1}, false, false, P::kFloor, {0.45, 0.33, 0.20}, true},
      {"dining_table", {1.0, 0.7, 0.7}, {1.6, 1.0, 0.8}, false, false, P::kFloor, {0.60, 0.45, 0.30}, true},
      {"armchair", {0.7, 0.7, 0.7}, {0.9, 0.9, 0.9}, false, true, P::kFloor, {0.25, 0.35, 0.55}, false},
      {"side_table", {0.45, 0.45, 0.5}, {0.6, 0.6, 0.6}, false, true, P::kFloor, {0.70, 0.60, 0.45}, true},
      {"ottoman", {0.4, 0.4, 0.35}, {0.6, 0.6, 0.45}, false, true, P::kFloor, {0.40, 0.55, 0.35}, false},
      {"box", {0.25, 0.25, 0.2}, {0.4, 0.4, 0.35}, true, true, P::kFloor, {0.75, 0.62, 0.38}, false},
      {"basket", {0.3, 0.3, 0.25}, {0.4, 0.4, 0.35}, true, true, P::kFloor, {0.80, 0.70, 0.30}, false},
      {"book", {0.15, 0.2, 0.03}, {0.25, 0.3, 0.06}, true, true, P::kOnSurface, {0.20, 0.45, 0.70}, false},
      {"cup", {0.06, 0.06, 0.08}, {0.09, 0.09, 0.12}, true, false, P::kOnSurface, {0.90, 0.30, 0.30}, false},
      {"bottle", {0.06, 0.06, 0.2}, {0.08, 0.08, 0.3}, true, false, P::kOnSurface, {0.30, 0.75, 0.40}, false},
      {"table_lamp", {0.15, 0.15, 0.3}, {0.25, 0.25, 0.5}, false, false, P::kOnSurface, {0.90, 0.85, 0.50}, false},
  };
}

// Empty room with boundary walls (and the optional partition).
inline Scene MakeRoom(std::uint64_t seed, const SceneConfig& cfg) {
  Scene scene;
  scene.seed = seed;
  const double w = cfg.room_width, d = cfg.room_depth, h = cfg.room_height, t = 0.1;
  scene.room = {{0.0, 0.0, 0.0}, {w, d, h}};
  scene.walls = {{{-t, -t, 0.0}, {0.0, d + t, h}},
                 {{w, -t, 0.0}, {w + t, d + t, h}},
                 {{-t, -t, 0.0}, {w + t, 0.0, h}},
                 {{-t, d, 0.0}, {w + t, d + t, h}}};
  if (cfg.two_rooms) {
    const double mx = 0.5 * w, my = 0.5 * d, half = 0.5 * cfg.door_width;
    scene.walls.push_back({{mx - 0.05, 0.0, 0.0}, {mx + 0.05, my - half, h}});
    scene.walls.push_back({{mx - 0.05, my + half, 0.0}, {mx + 0.05, d, h}});
  }
  return scene;
}

// Deterministic in (seed, config). The first two instances are a plain
// support surface and a pickupable item on it, so every scene with two or
// more objects has both an interactable and a non-interactable instance.
inline Scene GenerateScene(std::uint64_t seed, const SceneConfig& cfg,
                           std::vector<ObjectCategory> categories = DefaultCategories()) {
  AFFEX_REQUIRE(cfg.min_objects >= 0 && cfg.min_objects <= cfg.max_objects,
                "object count range is invalid");
  for (const auto& c : categories)
    AFFEX_REQUIRE(c.extent_min.x <= c.extent_max.x && c.extent_min.y <= c.extent_max.y &&
                      c.extent_min.z <= c.extent_max.z,
                  "category '" + c.name + "' has min extent above max extent");
  Scene scene = MakeRoom(seed, cfg);
  scene.categories = std::move(categories);
  Rng rng(seed);
  const int count = rng.Int(cfg.min_objects, cfg.max_objects);
  const auto& cats = scene.categories;
  const auto plain_surfaces = detail::CategoriesWhere(
      cats, [](const ObjectCategory& c) { return c.surface && !c.Interactable(); });
  const auto small_pickups = detail::CategoriesWhere(cats, [](const ObjectCategory& c) {
    return c.pickupable && c.placement == Placement::kOnSurface;
  });
  const auto any_surface = detail::CategoriesWhere(cats, [](const ObjectCategory& c) { return c.surface; });

  std::vector<int> chosen;
  if (count >= 2 && !plain_surfaces.empty() && !small_pickups.empty()) {
    chosen.push_back(plain_surfaces[rng.Index(plain_surfaces.size())]);
    chosen.push_back(small_pickups[rng.Index(small_pickups.size())]);
  }
  while (static_cast<int>(chosen.size()) < count) {
    int c = static_cast<int>(rng.Index(cats.size()));
    bool has_surface = false;
    for (int k : chosen) has_surface |= cats[k].surface;
    if (cats[c].placement == Placement::kOnSurface && !has_surface) {
      if (any_surface.empty()) continue;
      c = any_surface[rng.Index(any_surface.size())];
    }
    chosen.push_back(c);
  }
  int next_id = 1;
  for (int c : chosen) {
    ObjectInstance inst;
    inst.id = next_id++;
    inst.category = c;
    inst.extent = detail::SampleExtent(cats[c], rng);
    for (int k = 0; k < 3; ++k)
      inst.color[k] = std::clamp(cats[c].base_color[k] + rng.Uniform(-cfg.color_jitter, cfg.color_jitter), 0.0, 1.0);
    scene.instances.push_back(inst);
  }
  detail::PlaceAll(scene, cfg, rng);
  return scene;
}

// Same instances (ids, categories, sizes, colours), fresh poses.
inline Scene RandomizeScene(const Scene& base, std::uint64_t seed, const SceneConfig& cfg) {
  Scene scene = base;
  Rng rng(MixSeed(seed, 0x5ce9e));
  detail::PlaceAll(scene, cfg, rng);
  return scene;
}

}  // namespace affex
