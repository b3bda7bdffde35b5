#pragma once

// Brute-force references for the simulator. They share no code with the
// swept-rectangle test or the occlusion pass.

#include <cmath>
#include <string>
#include <vector>

#include "hetplan/core/rng.hpp"
#include "hetplan/data/envs.hpp"
#include "hetplan/data/scene_gen.hpp"
#include "hetplan/sim/primitives.hpp"

namespace hetplan::testing {

/// Does a w x d rectangle centered at (cx, cy) cover the center of cell
/// (x, y)? Same half-open rule as the simulator, written out directly.
inline bool covers(double cx, double cy, double w, double d, int x, int y) {
  const double px = x + 0.5, py = y + 0.5;
  return cx - w / 2 <= px && px < cx + w / 2 && cy - d / 2 <= py && py < cy + d / 2;
}

inline bool cell_blocked(const sim::SceneState& s, std::size_t mover, int level, int x, int y) {
  const auto& ws = *s.workspace;
  if (ws.level_at(x, y) != level || ws.impassable(x, y)) return true;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j == mover) continue;
    const auto& o = s.current[j];
    if (covers(o.pose.x, o.pose.y, o.width, o.depth, x, y)) return true;
  }
  return false;
}

/// Samples the segment every `step` cm and checks every covered cell.
inline bool sampled_sweep_clear(const sim::SceneState& s, std::size_t mover, sim::Point a, sim::Point b,
                                double step = 0.01) {
  const auto& o = s.current[mover];
  const auto& ws = *s.workspace;
  const int n = std::max(1, static_cast<int>(std::ceil(sim::distance(a, b) / step)));
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / n;
    const double cx = a.x + t * (b.x - a.x), cy = a.y + t * (b.y - a.y);
    const int x0 = static_cast<int>(std::floor(cx - o.width / 2)) - 1;
    const int y0 = static_cast<int>(std::floor(cy - o.depth / 2)) - 1;
    for (int y = y0; y <= y0 + static_cast<int>(o.depth) + 2; ++y)
      for (int x = x0; x <= x0 + static_cast<int>(o.width) + 2; ++x) {
        if (!covers(cx, cy, o.width, o.depth, x, y)) continue;
        if (!ws.in_bounds(x, y) || cell_blocked(s, mover, o.pose.level, x, y)) return false;
      }
  }
  return true;
}

/// Pairwise footprint overlap among objects that share a level.
inline int count_overlaps(const sim::SceneState& s) {
  int n = 0;
  const auto& ws = *s.workspace;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const auto &a = s.current[i], &b = s.current[j];
      if (a.pose.level != b.pose.level) continue;
      bool hit = false;
      for (int y = 0; y < ws.depth() && !hit; ++y)
        for (int x = 0; x < ws.width() && !hit; ++x)
          hit = covers(a.pose.x, a.pose.y, a.width, a.depth, x, y) &&
                covers(b.pose.x, b.pose.y, b.width, b.depth, x, y);
      n += hit;
    }
  return n;
}

struct FuzzReport {
  int applications = 0;
  int successes = 0;
  int overlaps = 0;
  int cross_level_pushes = 0;
  int cost_mismatches = 0;
  int nondeterministic = 0;
};

/// Random primitives on random scenes: checks no overlap after success,
/// pushes keep the level, cost is 1 per segment or 3, and replays agree.
inline FuzzReport fuzz_primitives(int applications, std::uint64_t seed) {
  FuzzReport rep;
  Rng rng(seed);
  const auto& envs = data::all_envs();
  std::vector<std::shared_ptr<const sim::Workspace>> spaces;
  for (const auto& e : envs) spaces.push_back(data::load_env(e));
  while (rep.applications < applications) {
    const auto& ws = spaces[rng.below(spaces.size())];
    sim::SceneState s;
    try {
      s = data::sample_scene(ws, rng.range(2, 6), rng.next());
    } catch (const SceneTooCrowded&) {
      continue;
    }
    for (int step = 0; step < 20 && rep.applications < applications; ++step) {
      const std::size_t i = rng.below(s.size());
      const auto& o = s.current[i];
      sim::Pose target;
      if (rng.uniform() < 0.5) {
        target = {o.pose.x + rng.range(-15, 15), o.pose.y + rng.range(-15, 15), o.pose.level};
      } else {
        const int x = rng.range(0, ws->width() - 1), y = rng.range(0, ws->depth() - 1);
        target = {x + (static_cast<int>(o.width) % 2 ? 0.5 : 0.0), y + (static_cast<int>(o.depth) % 2 ? 0.5 : 0.0),
                  rng.range(0, ws->max_level())};
      }
      const bool push = rng.uniform() < 0.6;
      const sim::Primitive prim{push ? sim::PrimitiveKind::push : sim::PrimitiveKind::pick_place, o.id, target};
      const auto out = sim::try_primitive(s, prim);
      const auto again = sim::try_primitive(s, prim);
      ++rep.applications;
      if (out.status != again.status || out.cost != again.cost ||
          out.state.current != again.state.current)
        ++rep.nondeterministic;
      if (!out.ok()) {
        if (out.cost != 0 || out.state.current != s.current) ++rep.cost_mismatches;
        continue;
      }
      ++rep.successes;
      if (push && out.state.current[i].pose.level != o.pose.level) ++rep.cross_level_pushes;
      const int expect = push ? static_cast<int>(out.route.size()) - 1 : 3;
      if (out.cost != expect || (push && (expect < 1 || expect > sim::kMaxPushSegments))) ++rep.cost_mismatches;
      if (push)
        for (std::size_t k = 0; k + 1 < out.route.size(); ++k)
          if (!sampled_sweep_clear(s, i, out.route[k], out.route[k + 1], 0.05)) ++rep.overlaps;
      rep.overlaps += count_overlaps(out.state);
      s = out.state;
    }
  }
  return rep;
}

}  // namespace hetplan::testing
