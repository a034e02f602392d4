#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "affex/core/random.hpp"
#include "affex/world/agent.hpp"
#include "affex/world/frame.hpp"
#include "affex/world/scene.hpp"

namespace affex {

inline constexpr Rgb kFloorColor{0.62, 0.56, 0.48};
inline constexpr Rgb kWallColor{0.86, 0.85, 0.80};

namespace detail {

struct RenderBox {
  Aabb box;
  int id;
  Rgb color;
};

inline std::vector<RenderBox> CollectRenderBoxes(const Scene& scene) {
  std::vector<RenderBox> boxes;
  boxes.reserve(scene.walls.size() + scene.instances.size());
  for (const auto& w : scene.walls) boxes.push_back({w, kWallId, kWallColor});
  for (const auto& inst : scene.instances)
    if (!inst.held) boxes.push_back({inst.Bounds(), inst.id, inst.color});
  return boxes;
}

}  // namespace detail

// Raycasts depth, instance ids and a shaded appearance image. Pixel noise is
// drawn from `noise_seed`, so identical inputs give identical frames.
inline Frame RenderCamera(const Scene& scene, const CameraPose& cam, const CameraConfig& cfg,
                          std::uint64_t noise_seed, int step_index = 0) {
  Frame f;
  f.camera = cam;
  f.intrinsics = Intrinsics::From(cfg);
  f.step_index = step_index;
  f.depth = Image<float>(cfg.height, cfg.width, 1, kInfDepth);
  f.instance_ids = Image<std::int32_t>(cfg.height, cfg.width, 1, kNoHitId);
  f.appearance = Image<float>(cfg.height, cfg.width, 3, 0.0f);

  const auto boxes = detail::CollectRenderBoxes(scene);
  const Vec3 light = Vec3{0.35, 0.25, 0.9} * (1.0 / Vec3{0.35, 0.25, 0.9}.Norm());
  Rng noise(noise_seed);
  const RayBasis basis(cam);

  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      const Vec3 dir = basis.Ray(f.intrinsics, r, c);
      double best = cfg.max_range;
      int id = kNoHitId;
      Rgb color{0.0, 0.0, 0.0};
      Vec3 normal{0.0, 0.0, 1.0};
      // Floor plane, bounded by the room.
      if (dir.z < -1e-12) {
        const double t = -cam.position.z / dir.z;
        const Vec3 p = cam.position + dir * t;
        if (t < best && scene.room.Contains({p.x, p.y, 0.0}, 1e-9)) {
          best = t;
          id = kFloorId;
          color = kFloorColor;
        }
      }
      RayHit hit;
      for (const auto& b : boxes) {
        if (IntersectRayAabb(cam.position, dir, b.box, 0.0, best, &hit) && hit.t < best) {
          best = hit.t;
          id = b.id;
          color = b.color;
          normal = hit.normal;
        }
      }
      if (id != kNoHitId) {
        f.depth(r, c) = static_cast<float>(best);
        f.instance_ids(r, c) = id;
        const double shade = 0.45 + 0.55 * std::max(0.0, Dot(normal, light));
        for (int k = 0; k < 3; ++k) {
          const double v = color[k] * shade + cfg.noise_sigma * noise.Normal();
          f.appearance(r, c, k) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      } else {
        for (int k = 0; k < 3; ++k) noise.Normal();
      }
    }
  }
  return f;
}

inline Frame Render(const Scene& scene, const AgentState& agent, const WorldConfig& world,
                    const CameraConfig& cfg, std::uint64_t noise_seed, int step_index = 0) {
  return RenderCamera(scene, agent.Camera(world, cfg), cfg, noise_seed, step_index);
}

// Euclidean distance from the arm base to every back-projected pixel.
inline Image<float> DistanceImage(const Frame& frame, const Vec3& arm_base) {
  Image<float> out(frame.height(), frame.width(), 1, kInfDepth);
  const std::vector<Vec3> pts = BackProjectAll(frame);
  for (std::size_t p = 0; p < out.pixel_count(); ++p)
    if (std::isfinite(frame.depth.at_pixel(p))) out.at_pixel(p) = static_cast<float>(Distance(pts[p], arm_base));
  return out;
}

}  // namespace affex
