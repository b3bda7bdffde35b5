#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "hetplan/core/rng.hpp"
#include "hetplan/perception/encoder.hpp"
#include "hetplan/perception/matching.hpp"
#include "hetplan/perception/voxel.hpp"
#include "hetplan/sim/observe.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::perception {

inline constexpr std::size_t kDescriptorDim = 10;
inline constexpr std::size_t kLocationDim = 3;
inline constexpr std::size_t kEmbeddingDim = kCodeDim + kLocationDim;

/// 10 translation-invariant numbers from an occupancy grid, in cm where a
/// unit applies:
///   [0] cube root of volume, [1..3] bounding-box extents x/y/z,
///   [4..6] standard deviation of occupied voxels along x/y/z,
///   [7] signed sqrt of the x-y covariance, [8] bbox fill ratio,
///   [9] sqrt of the top-layer area.
inline std::vector<double> descriptor(const VoxelGrid& g, double edge) {
  const int R = g.resolution;
  double n = 0, sx = 0, sy = 0, sz = 0, sxx = 0, syy = 0, szz = 0, sxy = 0;
  int x0 = R, y0 = R, z0 = R, x1 = -1, y1 = -1, z1 = -1;
  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        if (!g.at(x, y, z)) continue;
        n += 1;
        sx += x, sy += y, sz += z;
        sxx += double(x) * x, syy += double(y) * y, szz += double(z) * z, sxy += double(x) * y;
        x0 = std::min(x0, x), y0 = std::min(y0, y), z0 = std::min(z0, z);
        x1 = std::max(x1, x), y1 = std::max(y1, y), z1 = std::max(z1, z);
      }
  std::vector<double> d(kDescriptorDim, 0.0);
  if (n == 0) return d;
  const double mx = sx / n, my = sy / n, mz = sz / n;
  const double bx = x1 - x0 + 1, by = y1 - y0 + 1, bz = z1 - z0 + 1;
  const double cov_xy = sxy / n - mx * my;
  double top = 0;
  for (int y = 0; y < R; ++y)
    for (int x = 0; x < R; ++x) top += g.at(x, y, z1);
  d[0] = std::cbrt(n) * edge;
  d[1] = bx * edge;
  d[2] = by * edge;
  d[3] = bz * edge;
  d[4] = std::sqrt(std::max(0.0, sxx / n - mx * mx)) * edge;
  d[5] = std::sqrt(std::max(0.0, syy / n - my * my)) * edge;
  d[6] = std::sqrt(std::max(0.0, szz / n - mz * mz)) * edge;
  d[7] = std::copysign(std::sqrt(std::abs(cov_xy)), cov_xy) * edge;
  d[8] = n / (bx * by * bz);
  d[9] = std::sqrt(top) * edge;
  return d;
}

struct ObjectFeature {
  std::string handle;  // simulator id, never read by the learned parts
  std::vector<double> descriptor;
  std::vector<double> shape_code;
  std::vector<double> location;  // x, y, level height in cm
};

/// Concatenation [shape_code(12) | x | y | z].
inline std::vector<double> node_embedding(const ObjectFeature& f) {
  if (f.shape_code.size() != kCodeDim || f.location.size() != kLocationDim)
    throw ShapeError("node embedding needs a 12-dim code and a 3-dim location");
  std::vector<double> e = f.shape_code;
  e.insert(e.end(), f.location.begin(), f.location.end());
  return e;
}

/// Memoizes encoder outputs by grid content; the encoder is frozen and the
/// same shapes recur across scenes. Safe for concurrent readers.
class CodeCache {
 public:
  explicit CodeCache(const ShapeEncoder& enc) : enc_(&enc) {}

  std::vector<double> code(const VoxelGrid& g) const {
    const std::string key(g.cells.begin(), g.cells.end());
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    std::vector<double> c = enc_->encode(g);
    std::lock_guard lock(mu_);
    return cache_.emplace(key, std::move(c)).first->second;
  }

  const ShapeEncoder& encoder() const { return *enc_; }

 private:
  const ShapeEncoder* enc_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::vector<double>> cache_;
};

struct PerceptionOptions {
  sim::ObserveOptions observe;
  double descriptor_noise = 0.0;  // Gaussian sigma added to each descriptor entry
};

/// Descriptors and locations of observed objects; shape codes are filled
/// only when `codes` is given.
inline std::vector<ObjectFeature> object_features(const sim::Workspace& ws, const sim::Observation& obs,
                                                  const CodeCache* codes, double noise = 0.0, Rng* rng = nullptr) {
  std::vector<ObjectFeature> out;
  for (const auto& o : obs.objects) {
    ObjectFeature f;
    f.handle = o.handle;
    const sim::ObjectInstance shape{o.handle, sim::ShapeKind::block, o.width, o.depth, o.height, o.pose};
    f.descriptor = descriptor(o.grid, voxel_edge(shape, VoxelMode::metric, o.grid.resolution));
    if (noise > 0.0 && rng != nullptr)
      for (double& v : f.descriptor) v += noise * rng->normal();
    if (codes) f.shape_code = codes->code(o.grid);
    f.location = {o.pose.x, o.pose.y, ws.level_z(o.pose.level)};
    out.push_back(std::move(f));
  }
  return out;
}

inline std::vector<ObjectFeature> object_features(const sim::Workspace& ws, const sim::Observation& obs,
                                                  const CodeCache& codes, double noise = 0.0, Rng* rng = nullptr) {
  return object_features(ws, obs, &codes, noise, rng);
}

inline Correspondence match_objects(const std::vector<ObjectFeature>& current, const std::vector<ObjectFeature>& goal) {
  std::vector<std::vector<double>> c, g;
  for (const auto& f : current) c.push_back(f.descriptor);
  for (const auto& f : goal) g.push_back(f.descriptor);
  return match_descriptors(c, g);
}

/// Occupancy of a constraint region's bounding box, scale-normalized:
/// region cells extruded to the level height (shelves) or wall height.
inline VoxelGrid voxelize_region(const sim::ConstraintRegion& r, const sim::Workspace& ws,
                                 int resolution = kGridResolution) {
  int x0 = ws.width(), y0 = ws.depth(), x1 = 0, y1 = 0;
  for (const auto& rc : r.rects) {
    x0 = std::min(x0, rc.x0), y0 = std::min(y0, rc.y0);
    x1 = std::max(x1, rc.x1), y1 = std::max(y1, rc.y1);
  }
  if (x1 <= x0 || y1 <= y0) throw DomainError("constraint region '" + r.name + "' is empty");
  const double h = r.impassable() ? ws.wall_height() : ws.level_height();
  const double bw = x1 - x0, bd = y1 - y0;
  const double edge = std::max({bw, bd, h}) / resolution;
  VoxelGrid g{resolution, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution * resolution, 0)};
  for (int z = 0; z < resolution; ++z)
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x) {
        double dx, dy, dz;
        voxel_offset(x, y, z, resolution, edge, dx, dy, dz);
        const double wx = (x0 + x1) / 2.0 + dx, wy = (y0 + y1) / 2.0 + dy;
        if (std::abs(dz) >= h / 2 || wx < x0 || wy < y0) continue;
        if (r.contains(static_cast<int>(std::floor(wx)), static_cast<int>(std::floor(wy))))
          g.cells[g.index(x, y, z)] = 1;
      }
  return g;
}

/// One feature per constraint region: code of its normalized grid plus the
/// centroid of its cells and their top height.
inline std::vector<ObjectFeature> constraint_features(const sim::Workspace& ws, const CodeCache* codes) {
  std::vector<ObjectFeature> out;
  for (const auto& r : ws.regions()) {
    ObjectFeature f;
    f.handle = r.name;
    double sx = 0, sy = 0, n = 0;
    int level = 0;
    for (const auto& rc : r.rects)
      for (int y = rc.y0; y < rc.y1; ++y)
        for (int x = rc.x0; x < rc.x1; ++x) {
          sx += x + 0.5, sy += y + 0.5, n += 1;
          level = std::max(level, ws.level_at(x, y));
        }
    const double top = r.impassable() ? ws.wall_height() : ws.level_z(level);
    if (codes) f.shape_code = codes->code(voxelize_region(r, ws));
    f.location = {sx / n, sy / n, top};
    out.push_back(std::move(f));
  }
  return out;
}

inline std::vector<ObjectFeature> constraint_features(const sim::Workspace& ws, const CodeCache& codes) {
  return constraint_features(ws, &codes);
}

}  // namespace hetplan::perception
