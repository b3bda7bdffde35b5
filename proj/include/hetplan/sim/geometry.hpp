#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "hetplan/sim/types.hpp"

namespace hetplan::sim {

/// Cells whose centers lie in [x - w/2, x + w/2) x [y - d/2, y + d/2).
/// Half-open, so two footprints sharing an edge never share a cell.
inline Rect footprint_cells(double x, double y, double w, double d) {
  return {static_cast<int>(std::ceil(x - w / 2 - 0.5)), static_cast<int>(std::ceil(y - d / 2 - 0.5)),
          static_cast<int>(std::ceil(x + w / 2 - 0.5)), static_cast<int>(std::ceil(y + d / 2 - 0.5))};
}

inline Rect footprint_cells(const ObjectInstance& o, const Pose& p) {
  return footprint_cells(p.x, p.y, o.width, o.depth);
}

inline Rect footprint_cells(const ObjectInstance& o) { return footprint_cells(o, o.pose); }

inline bool rects_overlap(const Rect& a, const Rect& b) {
  return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

inline bool rect_inside(const Rect& r, const Workspace& ws) {
  return r.x0 >= 0 && r.y0 >= 0 && r.x1 <= ws.width() && r.y1 <= ws.depth() && r.x0 < r.x1 &&
         r.y0 < r.y1;
}

/// Cell-owner map of every object footprint (index into state.current).
inline std::vector<int> owner_map(const SceneState& s) {
  const Workspace& ws = *s.workspace;
  std::vector<int> owner(static_cast<std::size_t>(ws.width() * ws.depth()), -1);
  for (std::size_t i = 0; i < s.current.size(); ++i) {
    const Rect r = footprint_cells(s.current[i]);
    for (int y = std::max(0, r.y0); y < std::min(ws.depth(), r.y1); ++y)
      for (int x = std::max(0, r.x0); x < std::min(ws.width(), r.x1); ++x)
        owner[ws.index(x, y)] = static_cast<int>(i);
  }
  return owner;
}

/// Cells a moving object may not touch while at one level: other level,
/// impassable constraint cells, or cells held by another object. Prefix
/// sums answer "any blocked cell in this rectangle" in O(1).
class BlockedGrid {
 public:
  BlockedGrid(const SceneState& s, std::size_t mover, int level)
      : width_(s.workspace->width()), depth_(s.workspace->depth()) {
    const Workspace& ws = *s.workspace;
    blocked_.assign(static_cast<std::size_t>(width_ * depth_), 0);
    for (int y = 0; y < depth_; ++y)
      for (int x = 0; x < width_; ++x)
        if (ws.level_at(x, y) != level || ws.impassable(x, y)) blocked_[ws.index(x, y)] = 1;
    for (std::size_t i = 0; i < s.current.size(); ++i) {
      if (i == mover) continue;
      const Rect r = footprint_cells(s.current[i]);
      for (int y = std::max(0, r.y0); y < std::min(depth_, r.y1); ++y)
        for (int x = std::max(0, r.x0); x < std::min(width_, r.x1); ++x)
          blocked_[ws.index(x, y)] = 1;
    }
    build_prefix();
  }

  int width() const { return width_; }
  int depth() const { return depth_; }
  bool blocked(int x, int y) const { return blocked_[static_cast<std::size_t>(y * width_ + x)] != 0; }

  /// Number of blocked cells in r, which must lie inside the grid.
  int count(const Rect& r) const {
    const auto at = [&](int x, int y) { return prefix_[static_cast<std::size_t>(y * (width_ + 1) + x)]; };
    return at(r.x1, r.y1) - at(r.x0, r.y1) - at(r.x1, r.y0) + at(r.x0, r.y0);
  }

  bool inside(const Rect& r) const {
    return r.x0 >= 0 && r.y0 >= 0 && r.x1 <= width_ && r.y1 <= depth_ && r.x0 < r.x1 && r.y0 < r.y1;
  }

  /// True when a w x d footprint centered at p is inside and fully free.
  bool free_at(Point p, double w, double d) const {
    const Rect r = footprint_cells(p.x, p.y, w, d);
    return inside(r) && count(r) == 0;
  }

  /// Exact swept-rectangle test: the w x d footprint translated from a to b
  /// covers no blocked cell and never leaves the grid.
  bool sweep_clear(Point a, Point b, double w, double d) const {
    if (!free_at(a, w, d) || !free_at(b, w, d)) return false;
    const double hw = w / 2, hd = d / 2;
    const Rect box = footprint_cells((a.x + b.x) / 2, (a.y + b.y) / 2, std::abs(b.x - a.x) + w,
                                     std::abs(b.y - a.y) + d);
    if (!inside(box)) return false;
    if (count(box) == 0) return true;
    const double dx = b.x - a.x, dy = b.y - a.y;
    // A cell center c counts as swept when |x(t) - c| <= hw and likewise in y
    // for some t. The closed bound also catches the single instant at which a
    // diagonal move drags a footprint corner across a center.
    constexpr double kEps = 1e-9;
    const auto axis = [&](double c, double p0, double dp, double h, double& lo, double& hi) {
      if (std::abs(dp) < 1e-12) {
        if (std::abs(p0 - c) > h + kEps) hi = -1.0;
        return;
      }
      const double l = c - h - kEps, u = c + h + kEps;  // need l <= p0 + t*dp <= u
      double t0 = (l - p0) / dp, t1 = (u - p0) / dp;
      if (t0 > t1) std::swap(t0, t1);
      lo = std::max(lo, t0);
      hi = std::min(hi, t1);
    };
    for (int y = box.y0; y < box.y1; ++y) {
      for (int x = box.x0; x < box.x1; ++x) {
        if (!blocked(x, y)) continue;
        double lo = 0.0, hi = 1.0;
        axis(x + 0.5, a.x, dx, hw, lo, hi);
        axis(y + 0.5, a.y, dy, hd, lo, hi);
        if (lo <= hi) return false;
      }
    }
    return true;
  }

 private:
  void build_prefix() {
    prefix_.assign(static_cast<std::size_t>((width_ + 1) * (depth_ + 1)), 0);
    for (int y = 0; y < depth_; ++y)
      for (int x = 0; x < width_; ++x)
        prefix_[static_cast<std::size_t>((y + 1) * (width_ + 1) + x + 1)] =
            blocked_[static_cast<std::size_t>(y * width_ + x)] +
            prefix_[static_cast<std::size_t>(y * (width_ + 1) + x + 1)] +
            prefix_[static_cast<std::size_t>((y + 1) * (width_ + 1) + x)] -
            prefix_[static_cast<std::size_t>(y * (width_ + 1) + x)];
  }

  int width_;
  int depth_;
  std::vector<std::uint8_t> blocked_;
  std::vector<int> prefix_;
};

}  // namespace hetplan::sim
