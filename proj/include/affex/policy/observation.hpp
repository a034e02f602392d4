#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "affex/core/grid2d.hpp"
#include "affex/core/image.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/mapping/projection.hpp"
#include "affex/policy/network.hpp"
#include "affex/world/render.hpp"
#include "affex/world/sim.hpp"

namespace affex {

enum class Arm { kFull, kNoMapSeg, kNoMapNoSeg };

inline const char* ArmName(Arm a) {
  switch (a) {
    case Arm::kFull: return "full";
    case Arm::kNoMapSeg: return "no_map_seg";
    case Arm::kNoMapNoSeg: return "no_map_no_seg";
  }
  return "?";
}

inline std::optional<Arm> ParseArm(const std::string& s) {
  for (Arm a : {Arm::kFull, Arm::kNoMapSeg, Arm::kNoMapNoSeg})
    if (s == ArmName(a)) return a;
  return std::nullopt;
}

inline bool UsesMap(Arm a) { return a == Arm::kFull; }

struct ObservationConfig {
  int grid = 16;
  int history = 5;
  double local_side = 2.0;
  double global_side = 10.0;
  int local_pool = 2;    // projection max-pool factor before the local crop
  int global_pool = 10;  // and before the global crop
  double ema_decay = 0.9;
};

// Planes that need no map: appearance (3), distance (1), affordances (A).
inline constexpr int kSensorPlanes = 4 + kNumAffordances;
// Map planes: visited local/global, interacted mask, occupancy/interacted/
// non-interacted local and global.
inline constexpr int kMapPlanes = 9;

inline int ObservationPlanes(Arm arm) { return UsesMap(arm) ? kSensorPlanes + kMapPlanes : 2 * kSensorPlanes; }
inline int FlatDim(const ObservationConfig& cfg, int num_actions) { return cfg.history * (num_actions + 2) + 1; }

inline PolicyNetConfig MakePolicyNetConfig(Arm arm, const ObservationConfig& cfg, int num_actions) {
  PolicyNetConfig p;
  p.channels = ObservationPlanes(arm);
  p.grid = cfg.grid;
  p.flat_dim = FlatDim(cfg, num_actions);
  p.num_actions = num_actions;
  return p;
}

struct HistoryEntry {
  int action = 0;
  bool success = false;
  double reward = 0.0;
};

struct Observation {
  std::vector<float> image;  // planes x grid x grid
  std::vector<float> flat;
};

namespace detail {

inline void AppendPooled(const Image<float>& img, int grid, std::vector<float>& out) {
  AFFEX_REQUIRE(img.height() % grid == 0 && img.width() % grid == 0, "image side must be a multiple of the grid");
  AFFEX_REQUIRE(img.height() == img.width(), "observation images must be square");
  const Image<float> pooled = AveragePool(img, img.height() / grid);
  for (int ch = 0; ch < pooled.channels(); ++ch)
    for (int r = 0; r < grid; ++r)
      for (int c = 0; c < grid; ++c) out.push_back(pooled(r, c, ch));
}

inline void AppendGrid(const Grid2D& g, std::vector<float>& out) { out.insert(out.end(), g.cells.begin(), g.cells.end()); }

}  // namespace detail

// Builds policy observations. The no-map arms replace all map planes with
// an exponential moving average of the sensor planes, which is the only
// state carried between steps besides the action history.
class ObservationBuilder {
 public:
  ObservationBuilder(Arm arm, const ObservationConfig& cfg, int num_actions)
      : arm_(arm), cfg_(cfg), num_actions_(num_actions) {}

  const ObservationConfig& config() const { return cfg_; }

  void Record(int action, bool success, double reward) {
    history_.push_back({action, success, reward});
    while (static_cast<int>(history_.size()) > cfg_.history) history_.pop_front();
  }

  // `map` and `visits` may be null for the no-map arms.
  Observation Build(const Frame& f, const Image<float>& predictions, const AgentState& agent,
                    const WorldConfig& w, const CameraConfig& cam, const ObjectLevelMap* map,
                    const VisitGrid* visits) {
    Observation o;
    const int g = cfg_.grid;
    o.image.reserve(static_cast<std::size_t>(ObservationPlanes(arm_)) * g * g);
    detail::AppendPooled(f.appearance, g, o.image);
    Image<float> dist = DistanceImage(f, agent.ArmBase(w, cam));
    for (auto& v : dist.raw()) v = std::isfinite(v) ? std::min(v, static_cast<float>(cam.max_range)) / static_cast<float>(cam.max_range) : 1.0f;
    detail::AppendPooled(dist, g, o.image);
    detail::AppendPooled(predictions, g, o.image);
    if (UsesMap(arm_)) {
      AFFEX_REQUIRE(map != nullptr && visits != nullptr, "the full arm needs the map and visit grid");
      const Vec3 pos = agent.Position(w);
      const double yaw = agent.Yaw(w);
      const Grid2D visited = visits->AsGrid();
      detail::AppendGrid(EgocentricCrop(visited, pos, yaw, cfg_.local_side, g), o.image);
      detail::AppendGrid(EgocentricCrop(visited, pos, yaw, cfg_.global_side, g), o.image);
      const Image<std::int8_t> mask = InteractedObjectsMask(*map, f);
      Image<float> maskf(mask.height(), mask.width());
      for (std::size_t p = 0; p < mask.pixel_count(); ++p) maskf.at_pixel(p) = mask.at_pixel(p);
      detail::AppendPooled(maskf, g, o.image);
      const MapProjections proj = ProjectAll(*map);
      for (const auto* layer : {&proj.occupancy, &proj.interacted, &proj.non_interacted})
        detail::AppendGrid(EgocentricCrop(MaxPool(*layer, cfg_.local_pool), pos, yaw, cfg_.local_side, g), o.image);
      for (const auto* layer : {&proj.occupancy, &proj.interacted, &proj.non_interacted})
        detail::AppendGrid(EgocentricCrop(MaxPool(*layer, cfg_.global_pool), pos, yaw, cfg_.global_side, g), o.image);
    } else {
      const std::size_t n = o.image.size();
      if (ema_.empty()) ema_.assign(o.image.begin(), o.image.end());
      const float d = static_cast<float>(cfg_.ema_decay);
      for (std::size_t i = 0; i < n; ++i) ema_[i] = d * ema_[i] + (1.0f - d) * o.image[i];
      o.image.insert(o.image.end(), ema_.begin(), ema_.end());
    }
    o.flat.assign(static_cast<std::size_t>(FlatDim(cfg_, num_actions_)), 0.0f);
    // Most recent action first.
    int slot = 0;
    for (auto it = history_.rbegin(); it != history_.rend(); ++it, ++slot) {
      float* s = o.flat.data() + static_cast<std::size_t>(slot) * (num_actions_ + 2);
      s[it->action] = 1.0f;
      s[num_actions_] = it->success ? 1.0f : 0.0f;
      s[num_actions_ + 1] = static_cast<float>(it->reward);
    }
    o.flat.back() = agent.inventory ? 1.0f : 0.0f;
    return o;
  }

 private:
  Arm arm_;
  ObservationConfig cfg_;
  int num_actions_;
  std::deque<HistoryEntry> history_;
  std::vector<float> ema_;
};

}  // namespace affex
