#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/sim/geometry.hpp"
#include "hetplan/sim/primitives.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::data {

struct ShapeSpec {
  sim::ShapeKind shape = sim::ShapeKind::block;
  double width = 0, depth = 0, height = 0;
  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

inline constexpr int kPlacementAttempts = 1000;
inline constexpr double kDefaultUngraspableRatio = 0.3;

namespace detail {

inline std::vector<ShapeSpec> make_catalog(std::uint64_t seed, std::size_t count, int lo, int hi) {
  Rng rng(seed);
  std::vector<ShapeSpec> out;
  while (out.size() < count) {
    ShapeSpec s;
    s.shape = rng.below(2) == 0 ? sim::ShapeKind::block : sim::ShapeKind::cylinder;
    s.width = rng.range(lo, hi);
    s.depth = s.shape == sim::ShapeKind::cylinder ? s.width : rng.range(lo, hi);
    s.height = rng.range(3, 10);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

}  // namespace detail

/// Fixed object set: 36 graspable items (3-7 cm footprint, 3-10 cm tall)
/// and 16 ungraspable ones (10-16 cm footprint). Dimensions are whole
/// centimeters so footprints align with cells. Drawn from a fixed seed and
/// deduplicated, so every entry is a distinct shape.
inline const std::vector<ShapeSpec>& graspable_catalog() {
  static const std::vector<ShapeSpec> c = detail::make_catalog(0x5eed0001, 36, 3, 7);
  return c;
}

inline const std::vector<ShapeSpec>& ungraspable_catalog() {
  static const std::vector<ShapeSpec> c = detail::make_catalog(0x5eed0002, 16, 10, 16);
  return c;
}

struct SceneOptions {
  double ungraspable_ratio = kDefaultUngraspableRatio;
  double tau = sim::kDefaultTau;
};

inline sim::ObjectInstance make_object(const ShapeSpec& s, std::string id = {}) {
  return {std::move(id), s.shape, s.width, s.depth, s.height, {}};
}

namespace detail {

/// Draws a cell-aligned pose on a uniform surface. `want_level` < 0 means
/// any level; `want_component` >= 0 restricts to one connected region.
inline bool try_place(const sim::SceneState& s, std::size_t idx, Rng& rng, int want_level,
                      int want_component, sim::Pose& out) {
  const sim::Workspace& ws = *s.workspace;
  const sim::ObjectInstance& o = s.current[idx];
  const int w = static_cast<int>(o.width), d = static_cast<int>(o.depth);
  if (w > ws.width() || d > ws.depth()) return false;
  const int x0 = rng.range(0, ws.width() - w), y0 = rng.range(0, ws.depth() - d);
  const int level = ws.level_at(x0, y0);
  if (want_level >= 0 && level != want_level) return false;
  if (want_component >= 0 && ws.component(x0, y0) != want_component) return false;
  const sim::Pose p{x0 + o.width / 2, y0 + o.depth / 2, level};
  if (sim::placement(s, idx, p) != sim::Placement::ok) return false;
  // A footprint inside one level can still straddle two regions split by a wall.
  const sim::Rect r = sim::footprint_cells(o, p);
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      if (ws.component(x, y) != ws.component(x0, y0)) return false;
  out = p;
  return true;
}

inline std::vector<int> surface_levels(const sim::Workspace& ws) {
  std::set<int> lv;
  for (int y = 0; y < ws.depth(); ++y)
    for (int x = 0; x < ws.width(); ++x)
      if (!ws.impassable(x, y)) lv.insert(ws.level_at(x, y));
  return {lv.begin(), lv.end()};
}

}  // namespace detail

/// N distinct catalog objects on valid surfaces; current and goals both hold
/// the sampled poses. Ids follow the x (then y) order of the poses. The
/// first objects are steered to distinct levels so every level is used
/// when it fits.
inline sim::SceneState sample_scene(std::shared_ptr<const sim::Workspace> ws, int n, std::uint64_t seed,
                                    const SceneOptions& opt = {}) {
  if (n < 1) throw DomainError("scene needs at least one object");
  Rng rng(seed);
  std::vector<ShapeSpec> small = graspable_catalog(), large = ungraspable_catalog();
  rng.shuffle(small);
  rng.shuffle(large);
  std::size_t next_small = 0, next_large = 0;
  sim::SceneState s;
  s.workspace = ws;
  s.tau = opt.tau;
  const std::vector<int> levels = detail::surface_levels(*ws);
  for (int k = 0; k < n; ++k) {
    const bool big = rng.uniform() < opt.ungraspable_ratio && next_large < large.size();
    if (!big && next_small >= small.size()) throw SceneTooCrowded("object catalog exhausted");
    s.current.push_back(make_object(big ? large[next_large++] : small[next_small++]));
    const std::size_t idx = s.current.size() - 1;
    sim::Pose pose;
    bool placed = false;
    if (static_cast<std::size_t>(k) < levels.size())
      for (int a = 0; a < kPlacementAttempts && !placed; ++a)
        placed = detail::try_place(s, idx, rng, levels[static_cast<std::size_t>(k)], -1, pose);
    for (int a = 0; a < kPlacementAttempts && !placed; ++a) placed = detail::try_place(s, idx, rng, -1, -1, pose);
    if (!placed) {
      throw SceneTooCrowded("could not place object " + std::to_string(k + 1) + " of " + std::to_string(n) +
                            " in '" + ws->name() + "'");
    }
    s.current[idx].pose = pose;
  }
  std::stable_sort(s.current.begin(), s.current.end(), [](const auto& a, const auto& b) {
    return a.pose.x != b.pose.x ? a.pose.x < b.pose.x : a.pose.y < b.pose.y;
  });
  for (std::size_t i = 0; i < s.current.size(); ++i) s.current[i].id = "o" + std::to_string(i);
  s.goals = s.current;
  return s;
}

/// New poses for the same objects. Ungraspable objects stay in the region
/// they start in (a push cannot leave it); graspable ones go anywhere.
inline sim::SceneState resample_poses(const sim::SceneState& scene, std::uint64_t seed) {
  Rng rng(seed);
  const sim::Workspace& ws = *scene.workspace;
  sim::SceneState out;
  out.workspace = scene.workspace;
  out.tau = scene.tau;
  for (const auto& src : scene.current) {
    out.current.push_back(src);
    const std::size_t idx = out.current.size() - 1;
    int component = -1;
    if (!sim::is_graspable(src, ws)) {
      const sim::Rect r = sim::footprint_cells(src);
      component = ws.component(r.x0, r.y0);
    }
    sim::Pose pose;
    bool placed = false;
    for (int a = 0; a < kPlacementAttempts && !placed; ++a)
      placed = detail::try_place(out, idx, rng, -1, component, pose);
    if (!placed) throw SceneTooCrowded("could not re-place '" + src.id + "'");
    out.current[idx].pose = pose;
  }
  out.goals = out.current;
  return out;
}

/// Start taken from a's objects, goals from b's objects (ids must match).
inline sim::SceneState pair_scenes(const sim::SceneState& a, const sim::SceneState& b) {
  if (a.current.size() != b.current.size()) throw DomainError("scenes hold different object counts");
  sim::SceneState s = a;
  s.goals.clear();
  for (const auto& o : a.current) {
    const std::size_t j = b.find(o.id);
    if (j == b.size()) throw DomainError("goal scene lacks object '" + o.id + "'");
    s.goals.push_back(b.current[j]);
  }
  sim::validate_scene(s);
  return s;
}

/// Start/goal pair from one seed. Crowded draws are retried with derived
/// seeds; SceneTooCrowded escapes only after `attempts` failures.
inline sim::SceneState sample_pair(std::shared_ptr<const sim::Workspace> ws, int n, std::uint64_t seed,
                                   const SceneOptions& opt = {}, int attempts = 100) {
  for (int a = 0; a < attempts; ++a) {
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(a));
    try {
      const auto start = sample_scene(ws, n, s, opt);
      return pair_scenes(start, resample_poses(start, mix_seed(s, 1)));
    } catch (const SceneTooCrowded&) {
    }
  }
  throw SceneTooCrowded(std::to_string(n) + " objects do not fit in '" + ws->name() + "'");
}

}  // namespace hetplan::data
