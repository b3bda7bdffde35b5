#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/sim/primitives.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::sim {

inline constexpr const char* kSceneSchema = "hetplan.scene";
inline constexpr int kSceneVersion = 1;

using nlohmann::json;

inline json to_json(const Workspace& ws) {
  json regions = json::array();
  for (const auto& r : ws.regions()) {
    json rects = json::array();
    for (const auto& rc : r.rects) rects.push_back({rc.x0, rc.y0, rc.x1, rc.y1});
    regions.push_back({{"name", r.name}, {"kind", to_string(r.kind)}, {"rects", rects}});
  }
  return {{"name", ws.name()},
          {"width", ws.width()},
          {"depth", ws.depth()},
          {"cell_size", ws.cell_size()},
          {"level_height", ws.level_height()},
          {"wall_height", ws.wall_height()},
          {"gripper_opening", ws.gripper_opening()},
          {"height_map", ws.height_map()},
          {"constraint_regions", regions}};
}

inline std::vector<ConstraintRegion> regions_from_json(const json& j) {
  std::vector<ConstraintRegion> out;
  for (const auto& r : j) {
    ConstraintRegion cr;
    cr.name = r.at("name").get<std::string>();
    cr.kind = region_from_string(r.at("kind").get<std::string>());
    for (const auto& rc : r.at("rects")) {
      if (rc.size() != 4) throw FormatError("constraint rect needs 4 integers");
      cr.rects.push_back({rc[0].get<int>(), rc[1].get<int>(), rc[2].get<int>(), rc[3].get<int>()});
    }
    out.push_back(std::move(cr));
  }
  return out;
}

inline std::shared_ptr<const Workspace> workspace_from_json(const json& j) {
  return std::make_shared<const Workspace>(
      j.at("name").get<std::string>(), j.at("width").get<int>(), j.at("depth").get<int>(),
      j.at("height_map").get<std::vector<int>>(), regions_from_json(j.at("constraint_regions")),
      j.at("gripper_opening").get<double>(), j.at("level_height").get<double>(),
      j.at("wall_height").get<double>(), j.at("cell_size").get<double>());
}

inline json to_json(const ObjectInstance& o) {
  return {{"id", o.id},
          {"shape", to_string(o.shape)},
          {"footprint_w", o.width},
          {"footprint_d", o.depth},
          {"height", o.height},
          {"pose", {o.pose.x, o.pose.y}},
          {"level", o.pose.level}};
}

inline ObjectInstance object_from_json(const json& j) {
  ObjectInstance o;
  o.id = j.at("id").get<std::string>();
  o.shape = shape_from_string(j.value("shape", std::string("block")));
  o.width = j.at("footprint_w").get<double>();
  o.depth = j.at("footprint_d").get<double>();
  o.height = j.at("height").get<double>();
  const auto& p = j.at("pose");
  if (p.size() != 2) throw FormatError("pose of '" + o.id + "' needs [x, y]");
  o.pose = {p[0].get<double>(), p[1].get<double>(), j.at("level").get<int>()};
  return o;
}

inline json to_json(const SceneState& s) {
  json cur = json::array(), goals = json::array();
  for (const auto& o : s.current) cur.push_back(to_json(o));
  for (const auto& o : s.goals) goals.push_back(to_json(o));
  return {{"schema", kSceneSchema}, {"version", kSceneVersion}, {"workspace", to_json(*s.workspace)},
          {"tau", s.tau},           {"objects", cur},           {"goals", goals}};
}

inline SceneState scene_from_json(const json& j) {
  try {
    if (j.value("schema", std::string()) != kSceneSchema) throw FormatError("not a scene document");
    if (j.at("version").get<int>() != kSceneVersion)
      throw FormatError("unsupported scene version " + j.at("version").dump());
    SceneState s;
    s.workspace = workspace_from_json(j.at("workspace"));
    s.tau = j.value("tau", kDefaultTau);
    for (const auto& o : j.at("objects")) s.current.push_back(object_from_json(o));
    if (j.contains("goals"))
      for (const auto& o : j.at("goals")) s.goals.push_back(object_from_json(o));
    else
      s.goals = s.current;
    validate_scene(s);
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("scene: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("scene: ") + e.what());
  }
}

inline std::string dump_scene(const SceneState& s) { return to_json(s).dump() + "\n"; }

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("write failed for '" + path + "'");
}

inline SceneState load_scene(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return scene_from_json(j);
}

inline void save_scene(const std::string& path, const SceneState& s) { write_text(path, dump_scene(s)); }

}  // namespace hetplan::sim
