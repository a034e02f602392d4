#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace affex {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr bool operator==(const Vec3&) const = default;

  double Norm() const { return std::sqrt(x * x + y * y + z * z); }
};

constexpr double Dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline double Distance(const Vec3& a, const Vec3& b) { return (a - b).Norm(); }

constexpr double DegToRad(double deg) { return deg * std::numbers::pi / 180.0; }

// Yaw is a compass heading: 0 faces +y, positive angles turn clockwise
// (towards +x) when viewed from above.
inline Vec3 HeadingVector(double yaw) { return {std::sin(yaw), std::cos(yaw), 0.0}; }
inline Vec3 RightVector(double yaw) { return {std::cos(yaw), -std::sin(yaw), 0.0}; }

// Position plus rotation about the vertical axis.
struct Pose {
  Vec3 position;
  double yaw = 0.0;

  bool operator==(const Pose&) const = default;

  // Maps a point expressed in this pose's frame (x right, y forward, z up)
  // into the world frame.
  Vec3 Apply(const Vec3& local) const {
    return position + RightVector(yaw) * local.x + HeadingVector(yaw) * local.y +
           Vec3{0.0, 0.0, local.z};
  }
  Vec3 Inverse(const Vec3& world) const {
    const Vec3 d = world - position;
    return {Dot(d, RightVector(yaw)), Dot(d, HeadingVector(yaw)), d.z};
  }
};

// Full camera pose: heading, pitch (positive looks up) and optical centre.
struct CameraPose {
  Vec3 position;
  double yaw = 0.0;
  double pitch = 0.0;

  bool operator==(const CameraPose&) const = default;

  Vec3 Forward() const {
    return {std::sin(yaw) * std::cos(pitch), std::cos(yaw) * std::cos(pitch), std::sin(pitch)};
  }
  Vec3 Right() const { return RightVector(yaw); }
  Vec3 Up() const {
    return {-std::sin(yaw) * std::sin(pitch), -std::cos(yaw) * std::sin(pitch), std::cos(pitch)};
  }
};

struct Aabb {
  Vec3 min;
  Vec3 max;

  bool operator==(const Aabb&) const = default;

  Vec3 Center() const { return (min + max) * 0.5; }
  Vec3 Size() const { return max - min; }
  bool Contains(const Vec3& p, double margin = 0.0) const {
    return p.x >= min.x - margin && p.x <= max.x + margin && p.y >= min.y - margin &&
           p.y <= max.y + margin && p.z >= min.z - margin && p.z <= max.z + margin;
  }
  // Strict overlap: touching faces do not count as a collision.
  bool Overlaps(const Aabb& o, double eps = 1e-9) const {
    return min.x < o.max.x - eps && o.min.x < max.x - eps && min.y < o.max.y - eps &&
           o.min.y < max.y - eps && min.z < o.max.z - eps && o.min.z < max.z - eps;
  }
  bool OverlapsFootprint(const Aabb& o, double eps = 1e-9) const {
    return min.x < o.max.x - eps && o.min.x < max.x - eps && min.y < o.max.y - eps &&
           o.min.y < max.y - eps;
  }
  Aabb Inflated(double m) const {
    return {{min.x - m, min.y - m, min.z - m}, {max.x + m, max.y + m, max.z + m}};
  }
  Aabb InflatedXY(double m) const {
    return {{min.x - m, min.y - m, min.z}, {max.x + m, max.y + m, max.z}};
  }
  Aabb Translated(const Vec3& d) const { return {min + d, max + d}; }
  Vec3 ClosestPoint(const Vec3& p) const {
    return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
            std::clamp(p.z, min.z, max.z)};
  }
};

struct RayHit {
  double t = 0.0;
  Vec3 normal;
};

// Slab test. Returns the entry distance and outward face normal of the first
// face hit for t in (t_min, t_max), or false when the ray misses.
inline bool IntersectRayAabb(const Vec3& origin, const Vec3& dir, const Aabb& box, double t_min,
                             double t_max, RayHit* hit) {
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double lo[3] = {box.min.x, box.min.y, box.min.z};
  const double hi[3] = {box.max.x, box.max.y, box.max.z};
  double t0 = t_min;
  double t1 = t_max;
  int axis = -1;
  double sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    const double inv = 1.0 / d[a];
    double ta = (lo[a] - o[a]) * inv;
    double tb = (hi[a] - o[a]) * inv;
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis = a;
      sign = s;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  // Origin inside the box: treat as no hit.
  if (axis < 0) return false;
  hit->t = t0;
  hit->normal = {axis == 0 ? sign : 0.0, axis == 1 ? sign : 0.0, axis == 2 ? sign : 0.0};
  return true;
}

}  // namespace affex
