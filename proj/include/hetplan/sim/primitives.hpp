#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hetplan/core/rng.hpp"
#include "hetplan/sim/geometry.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::sim {

inline bool is_graspable(const ObjectInstance& o, const Workspace& ws) {
  return std::min(o.width, o.depth) <= ws.gripper_opening();
}

enum class Placement { ok, out_of_bounds, off_level, impassable, occupied };

/// Can object `mover` rest at pose p, ignoring its own current footprint?
inline Placement placement(const SceneState& s, std::size_t mover, const Pose& p) {
  const Workspace& ws = *s.workspace;
  const ObjectInstance& o = s.current[mover];
  const Rect r = footprint_cells(o, p);
  if (!rect_inside(r, ws)) return Placement::out_of_bounds;
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) {
      if (ws.impassable(x, y)) return Placement::impassable;
      if (ws.level_at(x, y) != p.level) return Placement::off_level;
    }
  for (std::size_t j = 0; j < s.current.size(); ++j) {
    if (j == mover || s.current[j].pose.level != p.level) continue;
    if (rects_overlap(r, footprint_cells(s.current[j]))) return Placement::occupied;
  }
  return Placement::ok;
}

/// Ids of objects whose footprint overlaps object `mover` placed at p.
inline std::vector<std::size_t> occupants(const SceneState& s, std::size_t mover, const Pose& p) {
  std::vector<std::size_t> out;
  const Rect r = footprint_cells(s.current[mover], p);
  for (std::size_t j = 0; j < s.current.size(); ++j) {
    if (j == mover || s.current[j].pose.level != p.level) continue;
    if (rects_overlap(r, footprint_cells(s.current[j]))) out.push_back(j);
  }
  return out;
}

inline bool direct_push_path_exists(const SceneState& s, std::size_t i, const Pose& target) {
  const ObjectInstance& o = s.current.at(i);
  if (target.level != o.pose.level) return false;
  const BlockedGrid grid(s, i, o.pose.level);
  return grid.sweep_clear(o.center(), {target.x, target.y}, o.width, o.depth);
}

inline bool direct_push_path_exists(const SceneState& s, const std::string& id, const Pose& target) {
  return direct_push_path_exists(s, s.index_of(id), target);
}

/// Straight segments from the start pose to the target (both included).
struct PushRoute {
  std::vector<Point> waypoints;
  int segments() const { return static_cast<int>(waypoints.size()) - 1; }
};

inline constexpr int kMaxPushSegments = 3;

namespace detail {

struct Candidate {
  Point p;
  double key;
};

inline void sort_candidates(std::vector<Candidate>& v) {
  std::stable_sort(v.begin(), v.end(), [](const Candidate& a, const Candidate& b) { return a.key < b.key; });
}

}  // namespace detail

/// Fewest-segment push route at constant level. Waypoints sit on the
/// integer lattice anchored at the start center; three-segment routes use
/// a coarser lattice (every third point). Among equal segment counts the
/// shortest candidate in scan order wins, so the result is deterministic.
inline std::optional<PushRoute> find_push_route(const SceneState& s, std::size_t i, const Pose& target,
                                                int max_segments = kMaxPushSegments) {
  const ObjectInstance& o = s.current.at(i);
  if (target.level != o.pose.level) return std::nullopt;
  const BlockedGrid grid(s, i, o.pose.level);
  const Point a = o.center(), b{target.x, target.y};
  const double w = o.width, d = o.depth;
  if (!grid.free_at(a, w, d) || !grid.free_at(b, w, d)) return std::nullopt;
  if (grid.sweep_clear(a, b, w, d)) return PushRoute{{a, b}};
  if (max_segments < 2) return std::nullopt;

  // Free lattice points, scanned row-major.
  std::vector<Point> lattice;
  std::vector<std::pair<int, int>> lattice_ij;
  const int i0 = static_cast<int>(std::floor(-a.x)), i1 = static_cast<int>(std::ceil(grid.width() - a.x));
  const int j0 = static_cast<int>(std::floor(-a.y)), j1 = static_cast<int>(std::ceil(grid.depth() - a.y));
  for (int j = j0; j <= j1; ++j)
    for (int k = i0; k <= i1; ++k) {
      const Point p{a.x + k, a.y + j};
      if ((k == 0 && j == 0) || !grid.free_at(p, w, d)) continue;
      lattice.push_back(p);
      lattice_ij.emplace_back(k, j);
    }

  std::vector<detail::Candidate> from_start, to_goal;
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    const Point p = lattice[k];
    if (grid.sweep_clear(a, p, w, d)) from_start.push_back({p, distance(a, p) + distance(p, b)});
  }
  detail::sort_candidates(from_start);
  for (const auto& c : from_start)
    if (grid.sweep_clear(c.p, b, w, d)) return PushRoute{{a, c.p, b}};
  if (max_segments < 3) return std::nullopt;

  std::vector<detail::Candidate> first, last;
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    const auto [ki, kj] = lattice_ij[k];
    if (ki % 3 != 0 || kj % 3 != 0) continue;
    const Point p = lattice[k];
    if (grid.sweep_clear(a, p, w, d)) first.push_back({p, distance(a, p)});
    if (grid.sweep_clear(p, b, w, d)) last.push_back({p, distance(p, b)});
  }
  detail::sort_candidates(first);
  detail::sort_candidates(last);
  std::optional<PushRoute> best;
  double best_len = std::numeric_limits<double>::infinity();
  for (const auto& f : first) {
    if (f.key >= best_len) break;
    for (const auto& l : last) {
      const double len = f.key + distance(f.p, l.p) + l.key;
      if (len >= best_len) continue;
      if (grid.sweep_clear(f.p, l.p, w, d)) {
        best = PushRoute{{a, f.p, l.p, b}};
        best_len = len;
      }
    }
  }
  return best;
}

enum class PrimitiveStatus { ok, push_infeasible, target_occupied, not_graspable, invalid_target, unknown_object };

inline const char* to_string(PrimitiveStatus s) {
  switch (s) {
    case PrimitiveStatus::ok: return "ok";
    case PrimitiveStatus::push_infeasible: return "push_infeasible";
    case PrimitiveStatus::target_occupied: return "target_occupied";
    case PrimitiveStatus::not_graspable: return "not_graspable";
    case PrimitiveStatus::invalid_target: return "invalid_target";
    case PrimitiveStatus::unknown_object: return "unknown_object";
  }
  return "?";
}

struct PrimitiveOutcome {
  PrimitiveStatus status = PrimitiveStatus::ok;
  SceneState state;  // successor on success, the input state otherwise
  int cost = 0;
  std::vector<Point> route;

  bool ok() const { return status == PrimitiveStatus::ok; }
};

/// Optional uniform jitter on the final pose; falls back to the exact pose
/// when the jittered footprint would be invalid.
struct Jitter {
  Rng* rng = nullptr;
  double amplitude = 0.5;
};

namespace detail {

inline SceneState moved(const SceneState& s, std::size_t i, Pose p, const Jitter& jitter) {
  SceneState next = s;
  if (jitter.rng != nullptr) {
    Pose q = p;
    q.x += jitter.rng->uniform(-jitter.amplitude, jitter.amplitude);
    q.y += jitter.rng->uniform(-jitter.amplitude, jitter.amplitude);
    if (placement(s, i, q) == Placement::ok) p = q;
  }
  next.current[i].pose = p;
  return next;
}

inline PrimitiveOutcome fail(const SceneState& s, PrimitiveStatus st) { return {st, s, 0, {}}; }

}  // namespace detail

inline PrimitiveOutcome try_push(const SceneState& s, const std::string& id, const Pose& target,
                                 const Jitter& jitter = {}) {
  const std::size_t i = s.find(id);
  if (i == s.size()) return detail::fail(s, PrimitiveStatus::unknown_object);
  if (target.level != s.current[i].pose.level) return detail::fail(s, PrimitiveStatus::push_infeasible);
  switch (placement(s, i, target)) {
    case Placement::ok: break;
    case Placement::occupied: return detail::fail(s, PrimitiveStatus::target_occupied);
    default: return detail::fail(s, PrimitiveStatus::push_infeasible);
  }
  auto route = find_push_route(s, i, target);
  if (!route) return detail::fail(s, PrimitiveStatus::push_infeasible);
  return {PrimitiveStatus::ok, detail::moved(s, i, target, jitter), route->segments() * kPushCost,
          route->waypoints};
}

inline PrimitiveOutcome try_pick_place(const SceneState& s, const std::string& id, const Pose& target,
                                       const Jitter& jitter = {}) {
  const std::size_t i = s.find(id);
  if (i == s.size()) return detail::fail(s, PrimitiveStatus::unknown_object);
  if (!is_graspable(s.current[i], *s.workspace)) return detail::fail(s, PrimitiveStatus::not_graspable);
  switch (placement(s, i, target)) {
    case Placement::ok: break;
    case Placement::occupied: return detail::fail(s, PrimitiveStatus::target_occupied);
    default: return detail::fail(s, PrimitiveStatus::invalid_target);
  }
  return {PrimitiveStatus::ok, detail::moved(s, i, target, jitter), kPickPlaceCost, {}};
}

inline PrimitiveOutcome try_primitive(const SceneState& s, const Primitive& p, const Jitter& jitter = {}) {
  return p.kind == PrimitiveKind::push ? try_push(s, p.object_id, p.target, jitter)
                                       : try_pick_place(s, p.object_id, p.target, jitter);
}

struct StepResult {
  SceneState state;
  int cost = 0;
};

inline void throw_status(PrimitiveStatus st, const std::string& id) {
  switch (st) {
    case PrimitiveStatus::ok: return;
    case PrimitiveStatus::push_infeasible: throw PushInfeasible("no push route for '" + id + "'");
    case PrimitiveStatus::target_occupied: throw TargetOccupied("target of '" + id + "' is occupied");
    case PrimitiveStatus::not_graspable: throw NotGraspable("'" + id + "' is wider than the gripper");
    case PrimitiveStatus::invalid_target: throw InvalidTarget("target of '" + id + "' is not a free surface");
    case PrimitiveStatus::unknown_object: throw UnknownObject("no object with id '" + id + "'");
  }
}

inline StepResult apply_push(const SceneState& s, const std::string& id, const Pose& target,
                             const Jitter& jitter = {}) {
  auto out = try_push(s, id, target, jitter);
  throw_status(out.status, id);
  return {std::move(out.state), out.cost};
}

inline StepResult apply_pick_place(const SceneState& s, const std::string& id, const Pose& target,
                                   const Jitter& jitter = {}) {
  auto out = try_pick_place(s, id, target, jitter);
  throw_status(out.status, id);
  return {std::move(out.state), out.cost};
}

inline bool at_goal(const ObjectInstance& cur, const ObjectInstance& goal, double tau) {
  return cur.pose.level == goal.pose.level && distance(cur.center(), goal.center()) <= tau + 1e-9;
}

inline bool is_success(const SceneState& s) {
  for (std::size_t i = 0; i < s.current.size(); ++i)
    if (!at_goal(s.current[i], s.goal_of(i), s.tau)) return false;
  return true;
}

/// Throws DomainError naming the first violated scene invariant.
inline void validate_scene(const SceneState& s) {
  if (!s.workspace) throw DomainError("scene has no workspace");
  if (s.current.size() != s.goals.size()) throw DomainError("current and goal object counts differ");
  const auto check = [&](const std::vector<ObjectInstance>& objs, const char* what) {
    SceneState probe{s.workspace, objs, {}, s.tau};
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const auto& o = objs[i];
      if (!(o.width > 0 && o.depth > 0 && o.height > 0))
        throw DomainError(std::string(what) + " object '" + o.id + "' has empty extent");
      for (std::size_t j = 0; j < i; ++j)
        if (objs[j].id == o.id) throw DomainError(std::string(what) + " id '" + o.id + "' repeats");
      const Placement p = placement(probe, i, o.pose);
      if (p != Placement::ok) {
        static const char* names[] = {"ok", "outside the workspace", "off its level", "on a wall",
                                      "overlapping another object"};
        throw DomainError(std::string(what) + " object '" + o.id + "' is " + names[static_cast<int>(p)]);
      }
    }
  };
  check(s.current, "current");
  check(s.goals, "goal");
  for (const auto& c : s.current) {
    const bool found = std::any_of(s.goals.begin(), s.goals.end(), [&](const auto& g) {
      return g.id == c.id && g.width == c.width && g.depth == c.depth && g.height == c.height &&
             g.shape == c.shape;
    });
    if (!found) throw DomainError("object '" + c.id + "' has no matching goal");
  }
}

}  // namespace hetplan::sim
