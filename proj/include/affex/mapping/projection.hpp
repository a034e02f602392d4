#pragma once

#include <cmath>
#include <cstdint>

#include "affex/core/grid2d.hpp"
#include "affex/core/image.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/world/agent.hpp"

namespace affex {

enum class ProjectionKind { kOccupancy, kInteracted, kNonInteracted };

struct MapProjections {
  Grid2D occupancy;
  Grid2D interacted;
  Grid2D non_interacted;

  const Grid2D& get(ProjectionKind k) const {
    switch (k) {
      case ProjectionKind::kOccupancy: return occupancy;
      case ProjectionKind::kInteracted: return interacted;
      case ProjectionKind::kNonInteracted: return non_interacted;
    }
    return occupancy;
  }
};

inline Grid2D EmptyRoomGrid(const Aabb& room, double res) {
  const int cols = static_cast<int>(std::lround((room.max.x - room.min.x) / res));
  const int rows = static_cast<int>(std::lround((room.max.y - room.min.y) / res));
  return Grid2D(rows, cols, res, room.min.x, room.min.y);
}

// Column-wise projection of the voxel map onto the room floor plan, one cell
// per voxel column. Floor voxels are not obstacles and are left out of all
// three layers, so occupancy is exactly interacted | non_interacted.
inline MapProjections ProjectAll(const ObjectLevelMap& map) {
  MapProjections out;
  out.occupancy = EmptyRoomGrid(map.room(), map.resolution());
  out.interacted = out.occupancy;
  out.non_interacted = out.occupancy;
  const int x0 = static_cast<int>(std::lround(map.room().min.x / map.resolution()));
  const int y0 = static_cast<int>(std::lround(map.room().min.y / map.resolution()));
  const int rows = out.occupancy.rows;
  for (const auto& [id, rec] : map.instances()) {
    if (id == kFloorId) continue;
    Grid2D& layer = rec.AnyInteracted() ? out.interacted : out.non_interacted;
    for (const auto& [col, n] : rec.columns) {
      const VoxelIndex v = UnpackVoxel(col << 21);
      const int c = v.x - x0;
      const int r = rows - 1 - (v.y - y0);
      if (!out.occupancy.InBounds(r, c)) continue;
      out.occupancy.at(r, c) = 1.0f;
      layer.at(r, c) = 1.0f;
    }
  }
  return out;
}

inline Grid2D Project2D(const ObjectLevelMap& map, ProjectionKind kind) {
  return ProjectAll(map).get(kind);
}

// Resamples `grid` into a cells x cells window of side `side` metres centred
// on `position` and rotated so that `yaw` points to row 0. Nearest-neighbour
// lookup; anything outside the source grid reads as zero.
inline Grid2D EgocentricCrop(const Grid2D& grid, const Vec3& position, double yaw, double side, int cells) {
  Grid2D out(cells, cells, side / cells);
  const double cs = side / cells;
  const Vec3 fwd = HeadingVector(yaw);
  const Vec3 right = RightVector(yaw);
  const double half = 0.5 * cells;
  for (int r = 0; r < cells; ++r) {
    const double f = (half - r - 0.5) * cs;
    for (int c = 0; c < cells; ++c) {
      const double s = (c - half + 0.5) * cs;
      out.at(r, c) = grid.Sample(position.x + f * fwd.x + s * right.x, position.y + f * fwd.y + s * right.y);
    }
  }
  return out;
}

inline Grid2D EgocentricCrop(const Grid2D& grid, const AgentState& agent, const WorldConfig& w, double side) {
  return EgocentricCrop(grid, agent.Position(w), agent.Yaw(w), side,
                        static_cast<int>(std::lround(side / grid.resolution)));
}

enum class NavNovelty { kNone, kNewYaw, kNewCell };

// Visited lattice cells and, per cell, the headings already seen there.
class VisitGrid {
 public:
  VisitGrid() = default;
  VisitGrid(const Aabb& room, const WorldConfig& w) : lattice_(w.lattice), yaw_bins_(YawSteps(w)) {
    cols_ = static_cast<int>(std::floor((room.max.x - room.min.x) / lattice_)) + 1;
    rows_ = static_cast<int>(std::floor((room.max.y - room.min.y) / lattice_)) + 1;
    x0_ = room.min.x;
    y0_ = room.min.y;
    masks_.assign(static_cast<std::size_t>(rows_) * cols_, 0);
  }

  // Read-only novelty lookup for the given agent pose.
  NavNovelty Lookup(const AgentState& a) const {
    const std::uint16_t m = masks_[Cell(a)];
    if (m == 0) return NavNovelty::kNewCell;
    if ((m & Bit(a)) == 0) return NavNovelty::kNewYaw;
    return NavNovelty::kNone;
  }
  void Mark(const AgentState& a) { masks_[Cell(a)] |= Bit(a); }
  NavNovelty Visit(const AgentState& a) {
    const NavNovelty n = Lookup(a);
    Mark(a);
    return n;
  }
  std::uint16_t YawMask(const AgentState& a) const { return masks_[Cell(a)]; }
  int yaw_bins() const { return yaw_bins_; }

  // Visited cells as a raster: a cell value of 1 means any heading visited.
  Grid2D AsGrid() const {
    Grid2D g(rows_, cols_, lattice_, x0_ - 0.5 * lattice_, y0_ - 0.5 * lattice_);
    for (int iy = 0; iy < rows_; ++iy)
      for (int ix = 0; ix < cols_; ++ix)
        g.at(rows_ - 1 - iy, ix) = masks_[static_cast<std::size_t>(iy) * cols_ + ix] ? 1.0f : 0.0f;
    return g;
  }

 private:
  std::size_t Cell(const AgentState& a) const {
    const int ix = std::clamp(a.cell_x - static_cast<int>(std::lround(x0_ / lattice_)), 0, cols_ - 1);
    const int iy = std::clamp(a.cell_y - static_cast<int>(std::lround(y0_ / lattice_)), 0, rows_ - 1);
    return static_cast<std::size_t>(iy) * cols_ + ix;
  }
  std::uint16_t Bit(const AgentState& a) const {
    return static_cast<std::uint16_t>(1u << (((a.yaw_index % yaw_bins_) + yaw_bins_) % yaw_bins_));
  }

  double lattice_ = 0.25;
  int yaw_bins_ = 12;
  int rows_ = 0;
  int cols_ = 0;
  double x0_ = 0.0;
  double y0_ = 0.0;
  std::vector<std::uint16_t> masks_;
};

enum class InteractionMark : std::int8_t { kNoAttempt = 0, kSuccess = 1, kFailure = -1 };

// Per-pixel interaction history of the instance under each pixel. An
// instance with any successful affordance shows as success.
inline Image<std::int8_t> InteractedObjectsMask(const ObjectLevelMap& map, const Frame& frame) {
  Image<std::int8_t> out(frame.height(), frame.width(), 1, static_cast<std::int8_t>(InteractionMark::kNoAttempt));
  std::map<int, InteractionMark> cache;
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const int id = frame.instance_ids.at_pixel(p);
    if (id == kNoHitId) continue;
    auto it = cache.find(id);
    if (it == cache.end()) {
      InteractionMark mark = InteractionMark::kNoAttempt;
      if (map.Has(id)) {
        const auto& rec = map.instance(id);
        for (auto s : rec.interacted) {
          if (s == InteractionState::kSucceeded) mark = InteractionMark::kSuccess;
          else if (s == InteractionState::kFailed && mark == InteractionMark::kNoAttempt)
            mark = InteractionMark::kFailure;
        }
      }
      it = cache.emplace(id, mark).first;
    }
    out.at_pixel(p) = static_cast<std::int8_t>(it->second);
  }
  return out;
}

}  // namespace affex
