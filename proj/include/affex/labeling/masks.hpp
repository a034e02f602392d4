#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "affex/core/image.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/world/frame.hpp"

namespace affex {

inline constexpr std::int8_t kLabelPositive = 1;
inline constexpr std::int8_t kLabelNegative = 0;
inline constexpr std::int8_t kLabelUnknown = -1;

// H x W x A ternary labels, one channel per affordance.
using PixelLabelMask = Image<std::int8_t>;

struct AnnotatedFrame {
  std::shared_ptr<const Frame> frame;
  PixelLabelMask labels;
};

inline PixelLabelMask UnlabeledMask(const Frame& f) {
  return PixelLabelMask(f.height(), f.width(), kNumAffordances, kLabelUnknown);
}

inline bool HasAnyLabel(const PixelLabelMask& m) {
  for (auto v : m.raw())
    if (v != kLabelUnknown) return true;
  return false;
}

// True when at least one affordance channel has both classes present.
inline bool IsBalanced(const PixelLabelMask& m) {
  for (int a = 0; a < m.channels(); ++a) {
    bool pos = false, neg = false;
    for (std::size_t p = 0; p < m.pixel_count(); ++p) {
      pos |= m.at_pixel(p, a) == kLabelPositive;
      neg |= m.at_pixel(p, a) == kLabelNegative;
    }
    if (pos && neg) return true;
  }
  return false;
}

// Paints every labelled instance's state onto each frame through the frame's
// segmentation.
inline std::vector<AnnotatedFrame> PropagateToFrames(const ObjectLevelMap& map,
                                                     std::span<const std::shared_ptr<const Frame>> frames) {
  std::vector<AnnotatedFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    AnnotatedFrame af{f, UnlabeledMask(*f)};
    for (std::size_t p = 0; p < af.labels.pixel_count(); ++p) {
      const int id = f->instance_ids.at_pixel(p);
      if (id == kNoHitId || !map.Has(id)) continue;
      const auto& rec = map.instance(id);
      for (int a = 0; a < kNumAffordances; ++a) {
        if (rec.labels[a].state == LabelState::kPositive) af.labels.at_pixel(p, a) = kLabelPositive;
        else if (rec.labels[a].state == LabelState::kNegative) af.labels.at_pixel(p, a) = kLabelNegative;
      }
    }
    out.push_back(std::move(af));
  }
  return out;
}

struct InteractionEvent {
  int step_index = 0;
  Affordance affordance = Affordance::kPickup;
  bool success = false;
  Vec3 point;            // 3D interaction point on the target surface
  int instance_id = 0;   // simulator id of the target, bookkeeping only
};

// Baseline without segmentation: every frame within `window` steps of an
// interaction gets the pixels whose back-projected point lies inside a
// sphere around the interaction point labelled with its outcome. Later
// events overwrite earlier ones.
inline std::vector<AnnotatedFrame> SphereAnnotation(std::span<const InteractionEvent> events,
                                                    std::span<const std::shared_ptr<const Frame>> frames,
                                                    double radius = 0.20, int window = 10) {
  std::vector<AnnotatedFrame> out;
  out.reserve(frames.size());
  const double r2 = radius * radius;
  for (const auto& f : frames) {
    AnnotatedFrame af{f, UnlabeledMask(*f)};
    std::vector<Vec3> points;
    for (const auto& e : events) {
      if (std::abs(e.step_index - f->step_index) > window) continue;
      if (points.empty()) points = BackProjectAll(*f);
      const std::int8_t v = e.success ? kLabelPositive : kLabelNegative;
      const int a = static_cast<int>(e.affordance);
      for (std::size_t p = 0; p < points.size(); ++p) {
        if (!std::isfinite(f->depth.at_pixel(p))) continue;
        const Vec3 d = points[p] - e.point;
        if (Dot(d, d) <= r2) af.labels.at_pixel(p, a) = v;
      }
    }
    out.push_back(std::move(af));
  }
  return out;
}

}  // namespace affex
