#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "affex/core/geometry.hpp"
#include "affex/core/image.hpp"
#include "affex/world/agent.hpp"

namespace affex {

struct Intrinsics {
  int width = 64;
  int height = 64;
  double focal = 32.0;

  bool operator==(const Intrinsics&) const = default;
  static Intrinsics From(const CameraConfig& c) { return {c.width, c.height, c.Focal()}; }
};

// One sensor capture. Depth is the range along each pixel ray.
struct Frame {
  Image<float> depth;
  Image<std::int32_t> instance_ids;
  Image<float> appearance;  // 3 channels in [0, 1]
  CameraPose camera;
  Intrinsics intrinsics;
  int step_index = 0;

  int height() const { return depth.height(); }
  int width() const { return depth.width(); }
  bool operator==(const Frame&) const = default;
};

inline constexpr float kInfDepth = std::numeric_limits<float>::infinity();

// Camera axes, computed once per frame for per-pixel ray generation.
struct RayBasis {
  Vec3 forward, right, up;
  explicit RayBasis(const CameraPose& cam) : forward(cam.Forward()), right(cam.Right()), up(cam.Up()) {}

  // Unit direction of the ray through the centre of pixel (r, c).
  Vec3 Ray(const Intrinsics& in, double r, double c) const {
    const double x = (c + 0.5 - 0.5 * in.width) / in.focal;
    const double y = (0.5 * in.height - r - 0.5) / in.focal;
    const Vec3 d = forward + right * x + up * y;
    return d * (1.0 / d.Norm());
  }
};

inline Vec3 PixelRay(const CameraPose& cam, const Intrinsics& in, double r, double c) {
  return RayBasis(cam).Ray(in, r, c);
}

inline Vec3 BackProject(const Frame& f, int r, int c) {
  return f.camera.position + PixelRay(f.camera, f.intrinsics, r, c) * f.depth(r, c);
}

// Back-projected point of every pixel, row-major (non-finite where depth is
// infinite).
inline std::vector<Vec3> BackProjectAll(const Frame& f) {
  const RayBasis basis(f.camera);
  std::vector<Vec3> pts(f.depth.pixel_count());
  for (int r = 0; r < f.height(); ++r)
    for (int c = 0; c < f.width(); ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * f.width() + c;
      pts[p] = f.camera.position + basis.Ray(f.intrinsics, r, c) * f.depth.at_pixel(p);
    }
  return pts;
}

// Projects a world point into pixel coordinates; nullopt when behind the
// camera.
inline std::optional<std::array<double, 2>> ProjectPoint(const CameraPose& cam,
                                                         const Intrinsics& in, const Vec3& p) {
  const Vec3 d = p - cam.position;
  const double z = Dot(d, cam.Forward());
  if (z <= 1e-9) return std::nullopt;
  const double x = Dot(d, cam.Right()) / z * in.focal;
  const double y = Dot(d, cam.Up()) / z * in.focal;
  return std::array<double, 2>{0.5 * in.height - y - 0.5, x + 0.5 * in.width - 0.5};
}

}  // namespace affex
