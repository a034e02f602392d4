#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "affex/core/geometry.hpp"
#include "affex/core/random.hpp"
#include "affex/world/scene.hpp"

namespace affex {

// Kinematic and interaction constants of the simulated robot.
struct WorldConfig {
  double lattice = 0.25;      // forward step and position snapping
  double yaw_step_deg = 30.0;
  double pitch_step_deg = 15.0;
  int max_pitch_steps = 4;    // |pitch| <= 60 deg
  double agent_radius = 0.2;
  double agent_height = 1.6;
  double arm_offset = 0.5;    // arm base below the camera
  double reach = 1.5;
  double push_distance = 0.25;
  double drop_distance = 0.5;
  double move_held_step = 0.1;
  double motion_quantum = 0.05;  // object displacements snap to this grid
  Vec3 hold_offset{0.0, 0.5, 1.0};  // agent frame: right, forward, up from the floor
};

struct CameraConfig {
  int width = 64;
  int height = 64;
  double vfov_deg = 90.0;
  double max_range = 10.0;
  double noise_sigma = 0.02;
  double mount_height = 1.5;

  double Focal() const { return 0.5 * height / std::tan(DegToRad(vfov_deg) * 0.5); }
};

struct AgentState {
  int cell_x = 0;
  int cell_y = 0;
  int yaw_index = 0;    // multiples of the yaw step
  int pitch_index = 0;  // multiples of the pitch step, positive looks up
  std::optional<int> inventory;
  Vec3 held_offset;            // agent frame
  double held_relative_yaw = 0.0;

  bool operator==(const AgentState&) const = default;

  Vec3 Position(const WorldConfig& w) const { return {cell_x * w.lattice, cell_y * w.lattice, 0.0}; }
  double Yaw(const WorldConfig& w) const { return DegToRad(yaw_index * w.yaw_step_deg); }
  double Pitch(const WorldConfig& w) const { return DegToRad(pitch_index * w.pitch_step_deg); }
  Pose BasePose(const WorldConfig& w) const { return {Position(w), Yaw(w)}; }

  CameraPose Camera(const WorldConfig& w, const CameraConfig& cam) const {
    const Vec3 p = Position(w);
    return {{p.x, p.y, cam.mount_height}, Yaw(w), Pitch(w)};
  }
  Vec3 ArmBase(const WorldConfig& w, const CameraConfig& cam) const {
    const Vec3 p = Position(w);
    return {p.x, p.y, cam.mount_height - w.arm_offset};
  }
  Pose HoldPose(const WorldConfig& w) const {
    const Pose base = BasePose(w);
    return {base.Apply(held_offset), base.yaw + held_relative_yaw};
  }
};

inline Aabb AgentFootprint(const Vec3& p, const WorldConfig& w) {
  return {{p.x - w.agent_radius, p.y - w.agent_radius, 0.0},
          {p.x + w.agent_radius, p.y + w.agent_radius, w.agent_height}};
}

inline int YawSteps(const WorldConfig& w) {
  return static_cast<int>(std::lround(360.0 / w.yaw_step_deg));
}

// Lattice displacement of one forward step: nearest of the eight lattice
// directions to the heading.
inline std::array<int, 2> ForwardDelta(int yaw_index, const WorldConfig& w) {
  const double yaw = DegToRad(yaw_index * w.yaw_step_deg);
  const int octant = static_cast<int>(std::lround(yaw / (std::numbers::pi / 4.0))) % 8;
  static constexpr std::array<std::array<int, 2>, 8> kDirs = {
      {{0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}}};
  return kDirs[static_cast<std::size_t>((octant + 8) % 8)];
}

inline bool AgentFits(const Scene& scene, const Vec3& p, const WorldConfig& w) {
  return !scene.Blocked(AgentFootprint(p, w));
}

// Random collision-free lattice pose with a level-ish camera.
inline AgentState SampleAgent(const Scene& scene, const WorldConfig& w, Rng& rng) {
  AgentState a;
  const int nx = static_cast<int>(std::floor(scene.room.max.x / w.lattice));
  const int ny = static_cast<int>(std::floor(scene.room.max.y / w.lattice));
  for (int attempt = 0; attempt < 10000; ++attempt) {
    a.cell_x = rng.Int(1, nx - 1);
    a.cell_y = rng.Int(1, ny - 1);
    if (AgentFits(scene, a.Position(w), w)) break;
  }
  a.yaw_index = rng.Int(0, YawSteps(w) - 1);
  a.pitch_index = rng.Int(-2, 0);
  return a;
}

}  // namespace affex
