#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "affex/world/frame.hpp"

namespace affex {

// depth, height, u, v, extent w/d/h, volume, distance to centroid, r, g, b
inline constexpr int kNumPixelFeatures = 12;

struct FeatureConfig {
  double max_depth = 10.0;  // stands in for depth on pixels without a hit
};

namespace detail {

struct InstanceStats {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  Vec3 sum;
  int count = 0;

  void Add(const Vec3& p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    sum = sum + p;
    ++count;
  }
};

}  // namespace detail

// Row-major n_pixels x kNumPixelFeatures matrix. Instance-level terms are
// computed from the instance's visible points in this frame only.
template <typename T>
void ComputePixelFeatures(const Frame& f, const FeatureConfig& cfg, std::vector<T>& out) {
  const std::size_t n = f.depth.pixel_count();
  const std::vector<Vec3> pts = BackProjectAll(f);
  int lo_id = 0, hi_id = 0;
  for (std::size_t p = 0; p < n; ++p) {
    lo_id = std::min(lo_id, f.instance_ids.at_pixel(p));
    hi_id = std::max(hi_id, f.instance_ids.at_pixel(p));
  }
  std::vector<detail::InstanceStats> stats(static_cast<std::size_t>(hi_id - lo_id + 1));
  for (std::size_t p = 0; p < n; ++p)
    if (std::isfinite(f.depth.at_pixel(p))) stats[f.instance_ids.at_pixel(p) - lo_id].Add(pts[p]);
  out.assign(n * kNumPixelFeatures, T(0));
  for (int r = 0; r < f.height(); ++r)
    for (int c = 0; c < f.width(); ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * f.width() + c;
      T* x = out.data() + p * kNumPixelFeatures;
      x[2] = static_cast<T>((c + 0.5) / f.width());
      x[3] = static_cast<T>((r + 0.5) / f.height());
      for (int k = 0; k < 3; ++k) x[9 + k] = static_cast<T>(f.appearance.at_pixel(p, k));
      if (!std::isfinite(f.depth.at_pixel(p))) {
        x[0] = static_cast<T>(cfg.max_depth);
        continue;
      }
      const auto& s = stats[f.instance_ids.at_pixel(p) - lo_id];
      const Vec3 ext = s.hi - s.lo;
      const Vec3 centroid = s.sum * (1.0 / s.count);
      x[0] = static_cast<T>(f.depth.at_pixel(p));
      x[1] = static_cast<T>(pts[p].z);
      x[4] = static_cast<T>(ext.x);
      x[5] = static_cast<T>(ext.y);
      x[6] = static_cast<T>(ext.z);
      x[7] = static_cast<T>(ext.x * ext.y * ext.z);
      x[8] = static_cast<T>(Distance(pts[p], centroid));
    }
}

}  // namespace affex
