#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hetplan/core/error.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::perception {

inline constexpr int kGridResolution = 32;
/// Edge length of one voxel in metric mode; the grid spans 16 cm.
inline constexpr double kMetricVoxel = 0.5;

/// Binary occupancy, x fastest then y then z: index (z * R + y) * R + x.
struct VoxelGrid {
  int resolution = kGridResolution;
  std::vector<std::uint8_t> cells;

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * resolution + y) * resolution + x;
  }
  bool at(int x, int y, int z) const { return cells[index(x, y, z)] != 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }

  std::vector<double> as_values() const { return {cells.begin(), cells.end()}; }
  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

/// metric: fixed 0.5 cm voxels so size stays visible to the encoder.
/// normalized: the largest extent fills the grid.
enum class VoxelMode { metric, normalized };

inline double voxel_edge(const sim::ObjectInstance& o, VoxelMode mode, int resolution) {
  if (mode == VoxelMode::metric) return kMetricVoxel * kGridResolution / resolution;
  return std::max({o.width, o.depth, o.height}) / resolution;
}

/// Offset of voxel (x, y, z) center from the object's bounding-box center.
inline void voxel_offset(int x, int y, int z, int resolution, double edge, double& dx, double& dy,
                         double& dz) {
  const double half = resolution / 2.0;
  dx = (x + 0.5 - half) * edge;
  dy = (y + 0.5 - half) * edge;
  dz = (z + 0.5 - half) * edge;
}

inline bool inside_shape(const sim::ObjectInstance& o, double dx, double dy, double dz) {
  if (std::abs(dz) >= o.height / 2) return false;
  if (o.shape == sim::ShapeKind::block) return std::abs(dx) < o.width / 2 && std::abs(dy) < o.depth / 2;
  const double u = dx / (o.width / 2), v = dy / (o.depth / 2);
  return u * u + v * v < 1.0;
}

/// Object-centered occupancy grid. The pose is ignored by construction.
/// `shift` moves the sampling lattice (cm), used to model sensor jitter.
inline VoxelGrid voxelize(const sim::ObjectInstance& o, VoxelMode mode = VoxelMode::metric,
                          int resolution = kGridResolution, std::array<double, 3> shift = {0, 0, 0}) {
  if (!(o.width > 0 && o.depth > 0 && o.height > 0)) throw DomainError("cannot voxelize an empty shape");
  if (resolution < 2) throw DomainError("voxel resolution must be at least 2");
  VoxelGrid g{resolution, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution * resolution, 0)};
  const double edge = voxel_edge(o, mode, resolution);
  for (int z = 0; z < resolution; ++z)
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x) {
        double dx, dy, dz;
        voxel_offset(x, y, z, resolution, edge, dx, dy, dz);
        if (inside_shape(o, dx + shift[0], dy + shift[1], dz + shift[2])) g.cells[g.index(x, y, z)] = 1;
      }
  if (g.count() == 0) {
    // Thinner than one voxel: keep the center voxel so the grid is never empty.
    const int c = resolution / 2;
    g.cells[g.index(c, c, c)] = 1;
  }
  return g;
}

}  // namespace hetplan::perception
