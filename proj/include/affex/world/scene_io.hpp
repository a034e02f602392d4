#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "affex/core/error.hpp"
#include "affex/world/scene.hpp"

namespace affex {

inline constexpr int kSceneSchemaVersion = 1;

namespace detail {

inline nlohmann::json ToJson(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
inline Vec3 Vec3FromJson(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}
inline nlohmann::json ToJson(const Aabb& b) { return {{"min", ToJson(b.min)}, {"max", ToJson(b.max)}}; }
inline Aabb AabbFromJson(const nlohmann::json& j) {
  return {Vec3FromJson(j.at("min")), Vec3FromJson(j.at("max"))};
}

}  // namespace detail

inline nlohmann::json SceneToJson(const Scene& s) {
  using nlohmann::json;
  json cats = json::array();
  for (const auto& c : s.categories)
    cats.push_back({{"name", c.name},
                    {"extent_min", detail::ToJson(c.extent_min)},
                    {"extent_max", detail::ToJson(c.extent_max)},
                    {"pickupable", c.pickupable},
                    {"pushable", c.pushable},
                    {"placement", c.placement == Placement::kFloor ? "floor" : "on_surface"},
                    {"base_color", c.base_color},
                    {"surface", c.surface}});
  json insts = json::array();
  for (const auto& i : s.instances)
    insts.push_back({{"id", i.id},
                     {"category", i.category},
                     {"position", detail::ToJson(i.pose.position)},
                     {"yaw", i.pose.yaw},
                     {"extent", detail::ToJson(i.extent)},
                     {"held", i.held},
                     {"color", i.color}});
  json walls = json::array();
  for (const auto& w : s.walls) walls.push_back(detail::ToJson(w));
  return {{"schema", "affex.scene"},
          {"version", kSceneSchemaVersion},
          {"seed", s.seed},
          {"room", detail::ToJson(s.room)},
          {"walls", walls},
          {"categories", cats},
          {"instances", insts}};
}

inline Scene SceneFromJson(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "affex.scene")
      throw FormatError("not a scene document");
    if (j.at("version").get<int>() != kSceneSchemaVersion)
      throw FormatError("unsupported scene schema version");
    Scene s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.room = detail::AabbFromJson(j.at("room"));
    for (const auto& w : j.at("walls")) s.walls.push_back(detail::AabbFromJson(w));
    for (const auto& c : j.at("categories")) {
      ObjectCategory cat;
      cat.name = c.at("name").get<std::string>();
      cat.extent_min = detail::Vec3FromJson(c.at("extent_min"));
      cat.extent_max = detail::Vec3FromJson(c.at("extent_max"));
      cat.pickupable = c.at("pickupable").get<bool>();
      cat.pushable = c.at("pushable").get<bool>();
      cat.placement = c.at("placement").get<std::string>() == "floor" ? Placement::kFloor : Placement::kOnSurface;
      cat.base_color = c.at("base_color").get<Rgb>();
      cat.surface = c.at("surface").get<bool>();
      s.categories.push_back(cat);
    }
    for (const auto& i : j.at("instances")) {
      ObjectInstance inst;
      inst.id = i.at("id").get<int>();
      inst.category = i.at("category").get<int>();
      inst.pose.position = detail::Vec3FromJson(i.at("position"));
      inst.pose.yaw = i.at("yaw").get<double>();
      inst.extent = detail::Vec3FromJson(i.at("extent"));
      inst.held = i.at("held").get<bool>();
      inst.color = i.at("color").get<Rgb>();
      if (inst.category < 0 || inst.category >= static_cast<int>(s.categories.size()))
        throw FormatError("instance refers to unknown category");
      s.instances.push_back(inst);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scene: ") + e.what());
  }
}

inline void WriteScene(const Scene& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << SceneToJson(s).dump(1) << "\n";
}

inline Scene ReadScene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scene file: ") + e.what());
  }
  return SceneFromJson(j);
}

}  // namespace affex
