#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/sim/scene_io.hpp"
#include "hetplan/sim/types.hpp"

#ifndef HETPLAN_DATA_DIR
#define HETPLAN_DATA_DIR "data"
#endif

namespace hetplan::data {

/// Root of the bundled data files; HETPLAN_DATA_DIR in the environment wins.
inline std::string data_dir() {
  if (const char* env = std::getenv("HETPLAN_DATA_DIR")) return env;
  return HETPLAN_DATA_DIR;
}

inline const std::vector<std::string>& training_envs() {
  static const std::vector<std::string> envs = {"tabletop", "shelf", "bins"};
  return envs;
}

inline const std::vector<std::string>& all_envs() {
  static const std::vector<std::string> envs = {"tabletop", "shelf", "bins", "pantry"};
  return envs;
}

/// Builds a workspace from a template document: a flat table raised to
/// the listed levels, plus the constraint regions verbatim.
inline std::shared_ptr<const sim::Workspace> workspace_from_template(const nlohmann::json& j) {
  try {
    const int width = j.at("width").get<int>(), depth = j.at("depth").get<int>();
    if (width <= 0 || depth <= 0) throw DomainError("template dimensions must be positive");
    std::vector<int> height(static_cast<std::size_t>(width * depth), 0);
    for (const auto& lv : j.value("levels", nlohmann::json::array())) {
      const int level = lv.at("level").get<int>();
      const auto r = lv.at("rect").get<std::vector<int>>();
      if (r.size() != 4 || r[0] < 0 || r[1] < 0 || r[2] > width || r[3] > depth)
        throw DomainError("level rect must be [x0, y0, x1, y1] inside the grid");
      for (int y = r[1]; y < r[3]; ++y)
        for (int x = r[0]; x < r[2]; ++x) height[static_cast<std::size_t>(y * width + x)] = level;
    }
    return std::make_shared<const sim::Workspace>(
        j.at("name").get<std::string>(), width, depth, std::move(height),
        sim::regions_from_json(j.value("constraint_regions", nlohmann::json::array())),
        j.value("gripper_opening", 8.0), j.value("level_height", 15.0), j.value("wall_height", 10.0));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("environment template: ") + e.what());
  }
}

/// `name_or_path` is either a bundled template name or a path to a JSON file.
inline std::shared_ptr<const sim::Workspace> load_env(const std::string& name_or_path) {
  const bool is_path = name_or_path.find('/') != std::string::npos ||
                       (name_or_path.size() > 5 && name_or_path.ends_with(".json"));
  const std::string path = is_path ? name_or_path : data_dir() + "/envs/" + name_or_path + ".json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(sim::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return workspace_from_template(j);
}

}  // namespace hetplan::data
