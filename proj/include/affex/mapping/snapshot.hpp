#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affex/core/error.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/world/scene_io.hpp"

namespace affex {

inline constexpr int kMapSchemaVersion = 1;

// Map snapshot layout (JSON, schema "affex.map" v1):
//   resolution, room {min,max}
//   instances: [{id, labels: [[state, source] per affordance],
//                interacted: [state per affordance],
//                frames_seen: [[step, pixels], ...],
//                runs: [[x, y, z, length, w0, w1, ...], ...]}]
// A run covers voxels (x..x+length-1, y, z) with one weight per voxel. Runs
// are sorted by (z, y, x). Enum values use their integer codes.
inline nlohmann::json MapToJson(const ObjectLevelMap& map) {
  using nlohmann::json;
  json insts = json::array();
  for (const auto& [id, rec] : map.instances()) {
    std::vector<VoxelIndex> vs;
    vs.reserve(rec.voxel_set.size());
    for (VoxelKey k : rec.voxel_set) vs.push_back(UnpackVoxel(k));
    std::sort(vs.begin(), vs.end(), [](const VoxelIndex& a, const VoxelIndex& b) {
      return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
    });
    json runs = json::array();
    for (std::size_t i = 0; i < vs.size();) {
      std::size_t j = i + 1;
      while (j < vs.size() && vs[j].z == vs[i].z && vs[j].y == vs[i].y && vs[j].x == vs[j - 1].x + 1) ++j;
      json run = {vs[i].x, vs[i].y, vs[i].z, j - i};
      for (std::size_t k = i; k < j; ++k) run.push_back(map.voxels().at(PackVoxel(vs[k])).weight);
      runs.push_back(run);
      i = j;
    }
    json labels = json::array();
    json interacted = json::array();
    for (int a = 0; a < kNumAffordances; ++a) {
      labels.push_back({static_cast<int>(rec.labels[a].state), static_cast<int>(rec.labels[a].source)});
      interacted.push_back(static_cast<int>(rec.interacted[a]));
    }
    json seen = json::array();
    for (const auto& f : rec.frames_seen) seen.push_back({f.step_index, f.pixel_count});
    insts.push_back({{"id", id}, {"labels", labels}, {"interacted", interacted}, {"frames_seen", seen}, {"runs", runs}});
  }
  return {{"schema", "affex.map"},
          {"version", kMapSchemaVersion},
          {"resolution", map.resolution()},
          {"room", detail::ToJson(map.room())},
          {"instances", insts}};
}

inline ObjectLevelMap MapFromJson(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "affex.map") throw FormatError("not a map snapshot");
    if (j.at("version").get<int>() != kMapSchemaVersion) throw FormatError("unsupported map schema version");
    MapConfig cfg;
    cfg.resolution = j.at("resolution").get<double>();
    ObjectLevelMap map(detail::AabbFromJson(j.at("room")), cfg);
    for (const auto& ij : j.at("instances")) {
      const int id = ij.at("id").get<int>();
      InstanceRecord& rec = map.EnsureInstance(id);
      for (int a = 0; a < kNumAffordances; ++a) {
        rec.labels[a].state = static_cast<LabelState>(ij.at("labels").at(a).at(0).get<int>());
        rec.labels[a].source = static_cast<LabelSource>(ij.at("labels").at(a).at(1).get<int>());
        rec.interacted[a] = static_cast<InteractionState>(ij.at("interacted").at(a).get<int>());
      }
      for (const auto& f : ij.at("frames_seen")) rec.frames_seen.push_back({f.at(0).get<int>(), f.at(1).get<int>()});
      for (const auto& run : ij.at("runs")) {
        const int x = run.at(0).get<int>(), y = run.at(1).get<int>(), z = run.at(2).get<int>();
        const int len = run.at(3).get<int>();
        if (static_cast<int>(run.size()) != 4 + len) throw FormatError("voxel run length mismatch");
        for (int k = 0; k < len; ++k) map.InsertVoxel({x + k, y, z}, id, run.at(4 + k).get<int>());
      }
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed map snapshot: ") + e.what());
  }
}

inline void WriteMapSnapshot(const ObjectLevelMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << MapToJson(map).dump() << "\n";
}

}  // namespace affex
