#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/world/agent.hpp"
#include "affex/world/frame.hpp"
#include "affex/world/render.hpp"
#include "affex/world/scene.hpp"

namespace affex {

enum class ActionKind {
  kForward,
  kRotateRight,
  kRotateLeft,
  kLookUp,
  kLookDown,
  kDrop,
  kMoveHeld,
  kPickup,
  kPush,
};

// Discrete action index. 0..4 navigation, 5 drop, 6..11 move_held
// (+x,-x,+y,-y,+z,-z in the agent frame), 12..20 pickup(cell), 21..29
// push(cell).
struct Action {
  static constexpr int kCount = 30;
  static constexpr int kNumNavigation = 5;
  static constexpr int kDrop = 5;
  static constexpr int kMoveHeldBegin = 6;
  static constexpr int kPickupBegin = 12;
  static constexpr int kPushBegin = 21;
  static constexpr int kCells = 9;

  int index = 0;

  static Action Pickup(int cell) { return {kPickupBegin + cell}; }
  static Action Push(int cell) { return {kPushBegin + cell}; }
  static Action MoveHeld(int axis_dir) { return {kMoveHeldBegin + axis_dir}; }

  bool Valid() const { return index >= 0 && index < kCount; }
  ActionKind Kind() const {
    if (!Valid()) throw ContractViolation("action index " + std::to_string(index) + " out of range");
    if (index < kNumNavigation) return static_cast<ActionKind>(index);
    if (index == kDrop) return ActionKind::kDrop;
    if (index < kPickupBegin) return ActionKind::kMoveHeld;
    if (index < kPushBegin) return ActionKind::kPickup;
    return ActionKind::kPush;
  }
  bool IsNavigation() const { return Kind() <= ActionKind::kLookDown; }
  bool IsInteraction() const {
    const auto k = Kind();
    return k == ActionKind::kPickup || k == ActionKind::kPush;
  }
  std::optional<Affordance> AttemptedAffordance() const {
    switch (Kind()) {
      case ActionKind::kPickup: return Affordance::kPickup;
      case ActionKind::kPush: return Affordance::kPush;
      default: return std::nullopt;
    }
  }
  int Cell() const {
    const auto k = Kind();
    if (k == ActionKind::kPickup) return index - kPickupBegin;
    if (k == ActionKind::kPush) return index - kPushBegin;
    return -1;
  }
  int MoveAxis() const { return index - kMoveHeldBegin; }
  bool operator==(const Action&) const = default;
};

inline const char* ActionName(ActionKind k) {
  switch (k) {
    case ActionKind::kForward: return "forward";
    case ActionKind::kRotateRight: return "rotate_right";
    case ActionKind::kRotateLeft: return "rotate_left";
    case ActionKind::kLookUp: return "look_up";
    case ActionKind::kLookDown: return "look_down";
    case ActionKind::kDrop: return "drop";
    case ActionKind::kMoveHeld: return "move_held";
    case ActionKind::kPickup: return "pickup";
    case ActionKind::kPush: return "push";
  }
  return "?";
}

struct InstanceMotion {
  int id = 0;
  Pose old_pose;
  Pose new_pose;
  bool operator==(const InstanceMotion&) const = default;
};

struct RewardComponents {
  double nav = 0.0;
  double interaction = 0.0;
  double fail = 0.0;
  bool operator==(const RewardComponents&) const = default;
};

struct StepResult {
  Action action;
  std::optional<int> target;
  bool success = false;
  RewardComponents reward_components;  // filled in by the reward model
  Frame frame;                         // filled in by Simulator
  std::vector<InstanceMotion> moved_instances;
};

namespace detail {

inline double Quantize(double v, double q) { return q > 0.0 ? std::round(v / q) * q : v; }

inline Vec3 QuantizeHorizontal(const Vec3& v, double q) {
  return {Quantize(v.x, q), Quantize(v.y, q), v.z};
}

// Objects resting on top of `base` (bottom face on its top face).
inline std::vector<int> Riders(const Scene& scene, const ObjectInstance& base) {
  std::vector<int> out;
  const Aabb b = base.Bounds();
  for (const auto& o : scene.instances) {
    if (o.id == base.id || o.held) continue;
    const Aabb ob = o.Bounds();
    if (std::abs(ob.min.z - b.max.z) < 1e-6 && ob.OverlapsFootprint(b)) out.push_back(o.id);
  }
  return out;
}

// The object `inst` is resting on, if any.
inline const ObjectInstance* SupportOf(const Scene& scene, const ObjectInstance& inst) {
  const Aabb b = inst.Bounds();
  if (b.min.z <= 1e-9) return nullptr;
  for (const auto& o : scene.instances) {
    if (o.id == inst.id || o.held) continue;
    const Aabb ob = o.Bounds();
    if (std::abs(ob.max.z - b.min.z) < 1e-6 && ob.OverlapsFootprint(b)) return &o;
  }
  return nullptr;
}

inline bool FootprintInside(const Aabb& inner, const Aabb& outer) {
  constexpr double kEps = 1e-9;
  return inner.min.x >= outer.min.x - kEps && inner.max.x <= outer.max.x + kEps &&
         inner.min.y >= outer.min.y - kEps && inner.max.y <= outer.max.y + kEps;
}

inline double SnapQuarterTurn(double yaw) {
  const double q = std::numbers::pi / 2.0;
  return std::fmod(std::round(yaw / q) * q + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
}

}  // namespace detail

// Applies one action to the world. `target` is the instance resolved from
// the action's grid cell by the caller (interaction actions only). The
// returned frame is left empty.
inline StepResult Step(Scene& scene, AgentState& agent, const Action& action,
                       std::optional<int> target, const WorldConfig& w, const CameraConfig& cam) {
  StepResult res;
  res.action = action;
  res.target = target;
  const ActionKind kind = action.Kind();

  // Held objects travel with the agent.
  const auto carry_held = [&] {
    if (!agent.inventory) return;
    ObjectInstance* held = scene.Find(*agent.inventory);
    const Pose old_pose = held->pose;
    held->pose = agent.HoldPose(w);
    if (!(old_pose == held->pose)) res.moved_instances.push_back({held->id, old_pose, held->pose});
  };

  switch (kind) {
    case ActionKind::kForward: {
      const auto d = ForwardDelta(agent.yaw_index, w);
      AgentState next = agent;
      next.cell_x += d[0];
      next.cell_y += d[1];
      const Vec3 p0 = agent.Position(w);
      const Vec3 p1 = next.Position(w);
      if (AgentFits(scene, p1, w) && AgentFits(scene, (p0 + p1) * 0.5, w)) {
        agent = next;
        res.success = true;
        carry_held();
      }
      break;
    }
    case ActionKind::kRotateRight:
    case ActionKind::kRotateLeft: {
      const int n = YawSteps(w);
      agent.yaw_index = (agent.yaw_index + (kind == ActionKind::kRotateRight ? 1 : n - 1)) % n;
      res.success = true;
      carry_held();
      break;
    }
    case ActionKind::kLookUp:
    case ActionKind::kLookDown: {
      const int next = agent.pitch_index + (kind == ActionKind::kLookUp ? 1 : -1);
      if (std::abs(next) <= w.max_pitch_steps) {
        agent.pitch_index = next;
        res.success = true;
      }
      break;
    }
    case ActionKind::kPickup: {
      if (!target || agent.inventory) break;
      ObjectInstance* inst = scene.Find(*target);
      if (inst == nullptr || inst->held) break;
      if (!scene.CategoryOf(*inst).pickupable) break;
      const Vec3 arm = agent.ArmBase(w, cam);
      if (Distance(inst->Bounds().ClosestPoint(arm), arm) > w.reach) break;
      if (!detail::Riders(scene, *inst).empty()) break;
      const Pose old_pose = inst->pose;
      agent.inventory = inst->id;
      agent.held_offset = w.hold_offset;
      agent.held_relative_yaw = inst->pose.yaw - agent.Yaw(w);
      inst->held = true;
      inst->pose = agent.HoldPose(w);
      res.success = true;
      res.moved_instances.push_back({inst->id, old_pose, inst->pose});
      break;
    }
    case ActionKind::kPush: {
      if (!target) break;
      ObjectInstance* inst = scene.Find(*target);
      if (inst == nullptr || inst->held) break;
      if (!scene.CategoryOf(*inst).pushable) break;
      const Vec3 arm = agent.ArmBase(w, cam);
      if (Distance(inst->Bounds().ClosestPoint(arm), arm) > w.reach) break;
      const Vec3 delta =
          detail::QuantizeHorizontal(HeadingVector(agent.Yaw(w)) * w.push_distance, w.motion_quantum);
      std::vector<int> group = {inst->id};
      for (int id : detail::Riders(scene, *inst)) group.push_back(id);
      bool blocked = false;
      for (int id : group) {
        const ObjectInstance* g = scene.Find(id);
        blocked |= scene.Blocked(g->Bounds().Translated(delta), group);
      }
      if (!blocked && AgentFootprint(agent.Position(w), w).Overlaps(inst->Bounds().Translated(delta)))
        blocked = true;
      if (!blocked) {
        if (const ObjectInstance* support = detail::SupportOf(scene, *inst))
          blocked = !detail::FootprintInside(inst->Bounds().Translated(delta), support->Bounds());
      }
      if (blocked) break;
      for (int id : group) {
        ObjectInstance* g = scene.Find(id);
        const Pose old_pose = g->pose;
        g->pose.position = g->pose.position + delta;
        res.moved_instances.push_back({id, old_pose, g->pose});
      }
      res.success = true;
      break;
    }
    case ActionKind::kDrop: {
      if (!agent.inventory) break;
      ObjectInstance* inst = scene.Find(*agent.inventory);
      const Vec3 p = agent.Position(w);
      const Vec3 heading = HeadingVector(agent.Yaw(w));
      const Aabb agent_box = AgentFootprint(p, w);
      const Pose old_pose = inst->pose;
      ObjectInstance probe = *inst;
      probe.held = false;
      probe.pose.yaw = detail::SnapQuarterTurn(inst->pose.yaw);
      bool placed = false;
      const int steps = static_cast<int>(std::lround(w.drop_distance / w.motion_quantum));
      for (int k = steps; k >= 1 && !placed; --k) {
        const Vec3 xy = detail::QuantizeHorizontal(p + heading * (k * w.motion_quantum), w.motion_quantum);
        probe.pose.position = {xy.x, xy.y, 0.0};
        // Rest on the highest object below the footprint.
        double support_z = 0.0;
        const ObjectInstance* support = nullptr;
        const Aabb fp = probe.Bounds();
        for (const auto& o : scene.instances) {
          if (o.id == inst->id || o.held) continue;
          const Aabb ob = o.Bounds();
          if (ob.OverlapsFootprint(fp) && ob.max.z > support_z) {
            support_z = ob.max.z;
            support = &o;
          }
        }
        probe.pose.position.z = support_z;
        const Aabb box = probe.Bounds();
        if (support != nullptr && !detail::FootprintInside(box, support->Bounds())) continue;
        if (box.max.z > scene.room.max.z) continue;
        if (agent_box.Overlaps(box) || scene.Blocked(box, {inst->id})) continue;
        placed = true;
      }
      if (!placed) break;
      inst->pose = probe.pose;
      inst->held = false;
      agent.inventory.reset();
      res.success = true;
      res.moved_instances.push_back({inst->id, old_pose, inst->pose});
      break;
    }
    case ActionKind::kMoveHeld: {
      if (!agent.inventory) break;
      ObjectInstance* inst = scene.Find(*agent.inventory);
      static constexpr std::array<Vec3, 6> kAxes = {
          {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
      AgentState next = agent;
      next.held_offset = agent.held_offset + kAxes[static_cast<std::size_t>(action.MoveAxis())] * w.move_held_step;
      ObjectInstance probe = *inst;
      probe.held = false;
      probe.pose = next.HoldPose(w);
      const Vec3 arm = agent.ArmBase(w, cam);
      const Aabb box = probe.Bounds();
      if (Distance(box.Center(), arm) > w.reach) break;
      if (scene.Blocked(box, {inst->id}) || box.max.z > scene.room.max.z) break;
      const Pose old_pose = inst->pose;
      agent = next;
      inst->pose = probe.pose;
      res.success = true;
      res.moved_instances.push_back({inst->id, old_pose, inst->pose});
      break;
    }
  }
  return res;
}

// Owns one episode's world and renders after every step.
class Simulator {
 public:
  Simulator(Scene scene, AgentState agent, WorldConfig world, CameraConfig camera,
            std::uint64_t noise_seed)
      : scene_(std::move(scene)), agent_(agent), world_(world), camera_(camera),
        noise_seed_(noise_seed) {}

  Frame Observe() const {
    return Render(scene_, agent_, world_, camera_, MixSeed(noise_seed_, static_cast<std::uint64_t>(step_)), step_);
  }

  StepResult Step(const Action& action, std::optional<int> target) {
    StepResult res = affex::Step(scene_, agent_, action, target, world_, camera_);
    ++step_;
    res.frame = Observe();
    return res;
  }

  const Scene& scene() const { return scene_; }
  Scene& mutable_scene() { return scene_; }
  const AgentState& agent() const { return agent_; }
  AgentState& mutable_agent() { return agent_; }
  const WorldConfig& world() const { return world_; }
  const CameraConfig& camera() const { return camera_; }
  int step_index() const { return step_; }

 private:
  Scene scene_;
  AgentState agent_;
  WorldConfig world_;
  CameraConfig camera_;
  std::uint64_t noise_seed_;
  int step_ = 0;
};

}  // namespace affex
