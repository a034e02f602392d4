#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/core/geometry.hpp"
#include "affex/world/frame.hpp"
#include "affex/world/scene.hpp"
#include "affex/world/sim.hpp"

namespace affex {

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;
  bool operator==(const VoxelIndex&) const = default;
  auto operator<=>(const VoxelIndex&) const = default;
};

using VoxelKey = std::uint64_t;

inline VoxelKey PackVoxel(const VoxelIndex& v) {
  constexpr std::int64_t kOffset = 1 << 20;
  constexpr std::uint64_t kMask = (1u << 21) - 1;
  return ((static_cast<std::uint64_t>(v.x + kOffset) & kMask) << 42) |
         ((static_cast<std::uint64_t>(v.y + kOffset) & kMask) << 21) |
         (static_cast<std::uint64_t>(v.z + kOffset) & kMask);
}

// Key of the voxel's vertical column (z dropped).
inline VoxelKey ColumnOf(VoxelKey k) { return k >> 21; }

inline VoxelIndex UnpackVoxel(VoxelKey k) {
  constexpr int kOffset = 1 << 20;
  constexpr std::uint64_t kMask = (1u << 21) - 1;
  return {static_cast<int>((k >> 42) & kMask) - kOffset, static_cast<int>((k >> 21) & kMask) - kOffset,
          static_cast<int>(k & kMask) - kOffset};
}

enum class LabelState : std::int8_t { kUnknown = 0, kPositive = 1, kNegative = 2 };
enum class LabelSource : std::int8_t { kNone = 0, kInteraction = 1, kConfidence = 2 };
enum class InteractionState : std::int8_t { kNone = 0, kSucceeded = 1, kFailed = 2 };

struct AffordanceLabel {
  LabelState state = LabelState::kUnknown;
  LabelSource source = LabelSource::kNone;
  bool operator==(const AffordanceLabel&) const = default;
};

struct FrameVisibility {
  int step_index = 0;
  int pixel_count = 0;
  bool operator==(const FrameVisibility&) const = default;
};

struct InstanceRecord {
  int id = 0;
  std::unordered_set<VoxelKey> voxel_set;
  // Voxel count per (x, y) column, kept in sync with voxel_set.
  std::unordered_map<VoxelKey, int> columns;
  std::vector<FrameVisibility> frames_seen;
  std::array<AffordanceLabel, kNumAffordances> labels{};
  std::array<InteractionState, kNumAffordances> interacted{};

  bool AnyInteracted() const {
    return std::any_of(interacted.begin(), interacted.end(),
                       [](InteractionState s) { return s != InteractionState::kNone; });
  }
  AffordanceLabel& label(Affordance a) { return labels[static_cast<std::size_t>(a)]; }
  const AffordanceLabel& label(Affordance a) const { return labels[static_cast<std::size_t>(a)]; }
  InteractionState& interaction(Affordance a) { return interacted[static_cast<std::size_t>(a)]; }
  InteractionState interaction(Affordance a) const { return interacted[static_cast<std::size_t>(a)]; }
};

struct VoxelEntry {
  int instance_id = 0;
  int weight = 0;
  bool operator==(const VoxelEntry&) const = default;
};

struct MapConfig {
  double resolution = 0.05;
  // Back-projected points are pushed this far past the surface along the ray
  // so that they land inside the observed object.
  double surface_offset = 0.01;
  double bounds_margin = 0.1;
};

// Sparse voxel grid where every occupied voxel belongs to one instance.
// Identity comes straight from the simulator's segmentation.
class ObjectLevelMap {
 public:
  ObjectLevelMap() = default;
  ObjectLevelMap(const Aabb& room, const MapConfig& cfg = {})
      : cfg_(cfg), room_(room), bounds_(room.Inflated(cfg.bounds_margin)) {}

  double resolution() const { return cfg_.resolution; }
  const MapConfig& config() const { return cfg_; }
  const Aabb& room() const { return room_; }
  const Aabb& bounds() const { return bounds_; }
  const std::unordered_map<VoxelKey, VoxelEntry>& voxels() const { return voxels_; }
  const std::map<int, InstanceRecord>& instances() const { return instances_; }
  std::size_t skipped_pixels() const { return skipped_pixels_; }
  std::size_t dropped_voxels() const { return dropped_voxels_; }

  bool Has(int id) const { return instances_.count(id) != 0; }
  const InstanceRecord& instance(int id) const {
    auto it = instances_.find(id);
    if (it == instances_.end()) throw ContractViolation("unknown instance " + std::to_string(id));
    return it->second;
  }
  InstanceRecord& mutable_instance(int id) {
    auto it = instances_.find(id);
    if (it == instances_.end()) throw ContractViolation("unknown instance " + std::to_string(id));
    return it->second;
  }
  InstanceRecord& EnsureInstance(int id) {
    auto [it, inserted] = instances_.try_emplace(id);
    if (inserted) it->second.id = id;
    return it->second;
  }

  VoxelIndex IndexOf(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x / cfg_.resolution)),
            static_cast<int>(std::floor(p.y / cfg_.resolution)),
            static_cast<int>(std::floor(p.z / cfg_.resolution))};
  }
  Vec3 CenterOf(const VoxelIndex& v) const {
    return {(v.x + 0.5) * cfg_.resolution, (v.y + 0.5) * cfg_.resolution, (v.z + 0.5) * cfg_.resolution};
  }
  bool InBounds(const VoxelIndex& v) const { return bounds_.Contains(CenterOf(v)); }

  void IntegrateFrame(const Frame& frame) {
    // Vote per voxel first so that a frame's contribution does not depend on
    // pixel order.
    std::vector<std::pair<VoxelKey, int>> hits;
    hits.reserve(frame.depth.pixel_count());
    std::map<int, int> visible;
    const RayBasis basis(frame.camera);
    for (int r = 0; r < frame.height(); ++r) {
      for (int c = 0; c < frame.width(); ++c) {
        const int id = frame.instance_ids(r, c);
        const float d = frame.depth(r, c);
        if (id == kNoHitId || !std::isfinite(d)) continue;
        ++visible[id];
        const Vec3 dir = basis.Ray(frame.intrinsics, r, c);
        const Vec3 p = frame.camera.position + dir * (d + cfg_.surface_offset);
        const VoxelIndex v = IndexOf(p);
        if (!InBounds(v)) {
          ++skipped_pixels_;
          continue;
        }
        hits.emplace_back(PackVoxel(v), id);
      }
    }
    std::sort(hits.begin(), hits.end());
    for (std::size_t i = 0; i < hits.size();) {
      const VoxelKey key = hits[i].first;
      int best_id = hits[i].second, best_count = 0;
      std::size_t j = i;
      while (j < hits.size() && hits[j].first == key) {
        std::size_t k = j;
        while (k < hits.size() && hits[k].first == key && hits[k].second == hits[j].second) ++k;
        const int count = static_cast<int>(k - j);
        if (count > best_count) {
          best_count = count;
          best_id = hits[j].second;
        }
        j = k;
      }
      Fuse(key, best_id, best_count);
      i = j;
    }
    for (const auto& [id, count] : visible) {
      InstanceRecord& rec = EnsureInstance(id);
      if (!rec.frames_seen.empty() && rec.frames_seen.back().step_index >= frame.step_index) {
        if (rec.frames_seen.back().step_index == frame.step_index)
          rec.frames_seen.back().pixel_count = std::max(rec.frames_seen.back().pixel_count, count);
        continue;
      }
      rec.frames_seen.push_back({frame.step_index, count});
    }
  }

  // Rigidly moves each listed instance's voxels from its old pose to its new
  // one. Labels and identity are untouched.
  void ApplyMotion(const std::vector<InstanceMotion>& moved) {
    for (const auto& m : moved) {
      if (!Has(m.id)) continue;  // never observed, nothing to move
      InstanceRecord& rec = mutable_instance(m.id);
      const double res = cfg_.resolution;
      const Vec3 delta = m.new_pose.position - m.old_pose.position;
      const double dyaw = m.new_pose.yaw - m.old_pose.yaw;
      const auto integral = [res](double v, int* out) {
        const double s = v / res;
        const double rounded = std::round(s);
        *out = static_cast<int>(rounded);
        return std::abs(s - rounded) < 1e-6;
      };
      int sx = 0, sy = 0, sz = 0;
      const bool pure_shift = std::abs(dyaw) < 1e-12 && integral(delta.x, &sx) &&
                              integral(delta.y, &sy) && integral(delta.z, &sz);

      std::vector<std::pair<VoxelKey, int>> sources;
      sources.reserve(rec.voxel_set.size());
      for (VoxelKey k : rec.voxel_set) sources.emplace_back(k, voxels_.at(k).weight);
      std::sort(sources.begin(), sources.end());
      for (const auto& [k, w] : sources) voxels_.erase(k);
      rec.voxel_set.clear();
      rec.columns.clear();

      std::map<VoxelKey, int> targets;
      for (const auto& [k, w] : sources) {
        const VoxelIndex v = UnpackVoxel(k);
        VoxelIndex t;
        if (pure_shift) {
          t = {v.x + sx, v.y + sy, v.z + sz};
        } else {
          t = IndexOf(m.new_pose.Apply(m.old_pose.Inverse(CenterOf(v))));
        }
        if (!InBounds(t)) {
          ++dropped_voxels_;
          continue;
        }
        int& slot = targets[PackVoxel(t)];
        slot = std::max(slot, w);
      }
      for (const auto& [k, w] : targets) Assign(k, m.id, w);
    }
  }

  // Direct voxel write, used by snapshot loading and tests.
  void InsertVoxel(const VoxelIndex& v, int id, int weight = 1) {
    AFFEX_REQUIRE(weight >= 1, "voxel weight must be positive");
    EnsureInstance(id);
    Assign(PackVoxel(v), id, weight);
  }

 private:
  void Assign(VoxelKey key, int id, int weight) {
    auto it = voxels_.find(key);
    if (it != voxels_.end() && it->second.instance_id != id) {
      InstanceRecord& old = instances_.at(it->second.instance_id);
      if (old.voxel_set.erase(key)) {
        auto col = old.columns.find(ColumnOf(key));
        if (--col->second == 0) old.columns.erase(col);
      }
    }
    voxels_[key] = {id, weight};
    InstanceRecord& rec = EnsureInstance(id);
    if (rec.voxel_set.insert(key).second) ++rec.columns[ColumnOf(key)];
  }

  void Fuse(VoxelKey key, int id, int count) {
    auto it = voxels_.find(key);
    if (it == voxels_.end()) {
      Assign(key, id, count);
      return;
    }
    VoxelEntry& e = it->second;
    if (e.instance_id == id) {
      e.weight += count;
      return;
    }
    const int remaining = e.weight - count;
    if (remaining > 0) {
      e.weight = remaining;
    } else {
      Assign(key, id, std::max(1, -remaining));
    }
  }

  MapConfig cfg_;
  Aabb room_;
  Aabb bounds_;
  std::unordered_map<VoxelKey, VoxelEntry> voxels_;
  std::map<int, InstanceRecord> instances_;
  std::size_t skipped_pixels_ = 0;
  std::size_t dropped_voxels_ = 0;
};

}  // namespace affex
