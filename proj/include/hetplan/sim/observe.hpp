#pragma once

#include <string>
#include <vector>

#include "hetplan/perception/voxel.hpp"
#include "hetplan/sim/geometry.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::sim {

struct ObservedObject {
  std::string handle;  // simulator id; actors use it to address primitives
  perception::VoxelGrid grid;
  Pose pose;
  double width = 0.0, depth = 0.0, height = 0.0;
  std::vector<int> mask;  // flat cell indices covered by the footprint
};

struct Observation {
  int width = 0, depth = 0;
  std::vector<int> instance_map;  // cell -> object slot, -1 when empty
  std::vector<ObservedObject> objects;
};

struct ObserveOptions {
  bool occlusion = false;
  perception::VoxelMode mode = perception::VoxelMode::metric;
};

/// Axis-aligned world box of an object: [x0,x1) x [y0,y1) x [z0,z1).
struct WorldBox {
  double x0, x1, y0, y1, z0, z1;
};

inline WorldBox world_box(const ObjectInstance& o, const Workspace& ws) {
  const double z = ws.level_z(o.pose.level);
  return {o.pose.x - o.width / 2, o.pose.x + o.width / 2, o.pose.y - o.depth / 2,
          o.pose.y + o.depth / 2, z, z + o.height};
}

/// The camera looks along +y: a point is hidden when the horizontal ray
/// toward -y passes through another object's box.
inline bool occluded(const std::vector<WorldBox>& boxes, std::size_t self, double x, double y, double z) {
  for (std::size_t j = 0; j < boxes.size(); ++j) {
    if (j == self) continue;
    const WorldBox& b = boxes[j];
    if (x >= b.x0 && x < b.x1 && z >= b.z0 && z < b.z1 && b.y0 < y) return true;
  }
  return false;
}

/// Ground-truth observation of the objects in `objs`. With occlusion on,
/// shape voxels whose view ray is blocked by another object are dropped.
inline Observation observe_objects(const Workspace& ws, const std::vector<ObjectInstance>& objs,
                                   const ObserveOptions& opt = {}) {
  Observation obs;
  obs.width = ws.width();
  obs.depth = ws.depth();
  obs.instance_map.assign(static_cast<std::size_t>(ws.width() * ws.depth()), -1);
  std::vector<WorldBox> boxes;
  for (const auto& o : objs) boxes.push_back(world_box(o, ws));
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const ObjectInstance& o = objs[i];
    ObservedObject oo;
    oo.handle = o.id;
    oo.pose = o.pose;
    oo.width = o.width;
    oo.depth = o.depth;
    oo.height = o.height;
    oo.grid = perception::voxelize(o, opt.mode);
    if (opt.occlusion) {
      const int r = oo.grid.resolution;
      const double edge = perception::voxel_edge(o, opt.mode, r);
      const double cz = ws.level_z(o.pose.level) + o.height / 2;
      for (int z = 0; z < r; ++z)
        for (int y = 0; y < r; ++y)
          for (int x = 0; x < r; ++x) {
            const std::size_t k = oo.grid.index(x, y, z);
            if (!oo.grid.cells[k]) continue;
            double dx, dy, dz;
            perception::voxel_offset(x, y, z, r, edge, dx, dy, dz);
            if (occluded(boxes, i, o.pose.x + dx, o.pose.y + dy, cz + dz)) oo.grid.cells[k] = 0;
          }
    }
    const Rect fp = footprint_cells(o);
    for (int y = std::max(0, fp.y0); y < std::min(ws.depth(), fp.y1); ++y)
      for (int x = std::max(0, fp.x0); x < std::min(ws.width(), fp.x1); ++x) {
        const int cell = static_cast<int>(ws.index(x, y));
        oo.mask.push_back(cell);
        obs.instance_map[static_cast<std::size_t>(cell)] = static_cast<int>(i);
      }
    obs.objects.push_back(std::move(oo));
  }
  return obs;
}

inline Observation observe(const SceneState& s, const ObserveOptions& opt = {}) {
  return observe_objects(*s.workspace, s.current, opt);
}

inline Observation observe_goals(const SceneState& s, const ObserveOptions& opt = {}) {
  return observe_objects(*s.workspace, s.goals, opt);
}

}  // namespace hetplan::sim
