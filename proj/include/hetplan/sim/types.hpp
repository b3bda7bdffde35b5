#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "hetplan/core/error.hpp"

namespace hetplan::sim {

inline constexpr double kDefaultTau = 3.0;
inline constexpr int kPushCost = 1;
inline constexpr int kPickPlaceCost = 3;

enum class ShapeKind { block, cylinder };

inline const char* to_string(ShapeKind k) { return k == ShapeKind::block ? "block" : "cylinder"; }

inline ShapeKind shape_from_string(const std::string& s) {
  if (s == "block") return ShapeKind::block;
  if (s == "cylinder") return ShapeKind::cylinder;
  throw FormatError("unknown shape kind '" + s + "'");
}

/// Object center in cm plus the integer surface level it rests on.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  int level = 0;

  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Half-open rectangle of cells [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  int area() const { return std::max(0, x1 - x0) * std::max(0, y1 - y0); }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class RegionKind { shelf, wall, divider };

inline const char* to_string(RegionKind k) {
  switch (k) {
    case RegionKind::shelf: return "shelf";
    case RegionKind::wall: return "wall";
    case RegionKind::divider: return "divider";
  }
  return "?";
}

inline RegionKind region_from_string(const std::string& s) {
  if (s == "shelf") return RegionKind::shelf;
  if (s == "wall") return RegionKind::wall;
  if (s == "divider") return RegionKind::divider;
  throw FormatError("unknown constraint kind '" + s + "'");
}

/// Labeled set of cells. Walls and dividers cannot be crossed by a push or
/// occupied by an object; shelves only mark raised surfaces.
struct ConstraintRegion {
  std::string name;
  RegionKind kind = RegionKind::shelf;
  std::vector<Rect> rects;

  bool impassable() const { return kind != RegionKind::shelf; }
  bool contains(int x, int y) const {
    return std::any_of(rects.begin(), rects.end(), [&](const Rect& r) { return r.contains(x, y); });
  }
  friend bool operator==(const ConstraintRegion&, const ConstraintRegion&) = default;
};

/// Discretized tabletop with height levels, constraint geometry and the
/// gripper limit. One cell is one centimeter.
class Workspace {
 public:
  Workspace(std::string name, int width, int depth, std::vector<int> height_map,
            std::vector<ConstraintRegion> regions, double gripper_opening = 8.0,
            double level_height = 15.0, double wall_height = 10.0, double cell_size = 1.0)
      : name_(std::move(name)),
        width_(width),
        depth_(depth),
        cell_size_(cell_size),
        level_height_(level_height),
        wall_height_(wall_height),
        gripper_opening_(gripper_opening),
        height_map_(std::move(height_map)),
        regions_(std::move(regions)) {
    if (width_ <= 0 || depth_ <= 0) throw DomainError("workspace dimensions must be positive");
    if (height_map_.size() != static_cast<std::size_t>(width_ * depth_)) {
      throw DomainError("height map has " + std::to_string(height_map_.size()) +
                        " cells, workspace needs " + std::to_string(width_ * depth_));
    }
    if (!(gripper_opening_ > 0.0)) throw DomainError("gripper opening must be positive");
    if (cell_size_ != 1.0) throw DomainError("only 1 cm cells are supported");
    for (int lv : height_map_)
      if (lv < 0) throw DomainError("height levels must be non-negative");
    impassable_.assign(height_map_.size(), 0);
    for (const auto& r : regions_) {
      for (const auto& rect : r.rects) {
        if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > width_ || rect.y1 > depth_ ||
            rect.x0 >= rect.x1 || rect.y0 >= rect.y1) {
          throw DomainError("constraint region '" + r.name + "' leaves the grid");
        }
        if (!r.impassable()) continue;
        for (int y = rect.y0; y < rect.y1; ++y)
          for (int x = rect.x0; x < rect.x1; ++x) impassable_[index(x, y)] = 1;
      }
    }
    label_regions();
  }

  const std::string& name() const { return name_; }
  int width() const { return width_; }
  int depth() const { return depth_; }
  double cell_size() const { return cell_size_; }
  double level_height() const { return level_height_; }
  double wall_height() const { return wall_height_; }
  double gripper_opening() const { return gripper_opening_; }
  const std::vector<int>& height_map() const { return height_map_; }
  const std::vector<ConstraintRegion>& regions() const { return regions_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < depth_; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y * width_ + x); }
  int level_at(int x, int y) const { return height_map_[index(x, y)]; }
  bool impassable(int x, int y) const { return impassable_[index(x, y)] != 0; }
  int max_level() const { return *std::max_element(height_map_.begin(), height_map_.end()); }

  /// Connected component id of passable same-level cells, -1 for walls.
  int component(int x, int y) const { return component_[index(x, y)]; }

  double level_z(int level) const { return level * level_height_; }

 private:
  void label_regions() {
    component_.assign(height_map_.size(), -1);
    int next = 0;
    for (int y = 0; y < depth_; ++y)
      for (int x = 0; x < width_; ++x) {
        if (impassable(x, y) || component_[index(x, y)] >= 0) continue;
        const int level = level_at(x, y);
        std::queue<std::pair<int, int>> q;
        q.push({x, y});
        component_[index(x, y)] = next;
        while (!q.empty()) {
          auto [cx, cy] = q.front();
          q.pop();
          const int nbr[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
          for (auto [dx, dy] : nbr) {
            const int nx = cx + dx, ny = cy + dy;
            if (!in_bounds(nx, ny) || impassable(nx, ny) || component_[index(nx, ny)] >= 0 ||
                level_at(nx, ny) != level)
              continue;
            component_[index(nx, ny)] = next;
            q.push({nx, ny});
          }
        }
        ++next;
      }
  }

  std::string name_;
  int width_;
  int depth_;
  double cell_size_;
  double level_height_;
  double wall_height_;
  double gripper_opening_;
  std::vector<int> height_map_;
  std::vector<ConstraintRegion> regions_;
  std::vector<std::uint8_t> impassable_;
  std::vector<int> component_;
};

/// A rigid object with an axis-aligned footprint (width along x, depth
/// along y). Cylinders use their bounding square as footprint.
struct ObjectInstance {
  std::string id;
  ShapeKind shape = ShapeKind::block;
  double width = 1.0;
  double depth = 1.0;
  double height = 1.0;
  Pose pose;

  Point center() const { return {pose.x, pose.y}; }
  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

/// Full world configuration; an immutable value shared by reference to its
/// workspace.
struct SceneState {
  std::shared_ptr<const Workspace> workspace;
  std::vector<ObjectInstance> current;
  std::vector<ObjectInstance> goals;
  double tau = kDefaultTau;

  std::size_t size() const { return current.size(); }

  /// Index of an object in `current`, or size() when absent.
  std::size_t find(const std::string& id) const {
    for (std::size_t i = 0; i < current.size(); ++i)
      if (current[i].id == id) return i;
    return current.size();
  }

  std::size_t index_of(const std::string& id) const {
    const std::size_t i = find(id);
    if (i == current.size()) throw UnknownObject("no object with id '" + id + "'");
    return i;
  }

  /// Goal entry for the object at current index i.
  const ObjectInstance& goal_of(std::size_t i) const {
    for (const auto& g : goals)
      if (g.id == current[i].id) return g;
    throw UnknownObject("object '" + current[i].id + "' has no goal");
  }
};

enum class PrimitiveKind { push, pick_place };

inline const char* to_string(PrimitiveKind k) { return k == PrimitiveKind::push ? "PUSH" : "PICK_PLACE"; }

inline PrimitiveKind primitive_kind_from_string(const std::string& s) {
  if (s == "PUSH") return PrimitiveKind::push;
  if (s == "PICK_PLACE") return PrimitiveKind::pick_place;
  throw FormatError("unknown primitive '" + s + "'");
}

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::push;
  std::string object_id;
  Pose target;

  /// Nominal cost: 1 per push segment (1 for a direct push), 3 for pick-place.
  int cost() const { return kind == PrimitiveKind::push ? kPushCost : kPickPlaceCost; }
};

}  // namespace hetplan::sim
