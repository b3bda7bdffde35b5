#pragma once

#include <vector>

#include "hetplan/graph/het_graph.hpp"
#include "hetplan/perception/features.hpp"
#include "hetplan/perception/matching.hpp"
#include "hetplan/sim/observe.hpp"
#include "hetplan/sim/primitives.hpp"

namespace hetplan::perception {

/// What the learned policy sees of one (current, goal) pair.
struct TaskView {
  graph::HetTaskGraph graph;
  Correspondence correspondence;
  std::vector<ObjectFeature> current, goals, constraints;
  /// Observed objects as a scene; goal i carries the handle of the current
  /// object it was matched to. Actors plan primitives against this.
  sim::SceneState perceived;
};

/// Observes both scenes, matches goals to current objects and builds the
/// task graph. Without `codes` the graph has structure and handles but
/// empty node features.
inline TaskView perceive_task(const sim::SceneState& s, const CodeCache* codes, const PerceptionOptions& opt = {},
                              Rng* rng = nullptr) {
  const sim::Workspace& ws = *s.workspace;
  const sim::Observation oc = sim::observe(s, opt.observe), og = sim::observe_goals(s, opt.observe);
  TaskView v;
  v.current = object_features(ws, oc, codes, opt.descriptor_noise, rng);
  v.goals = object_features(ws, og, codes, opt.descriptor_noise, rng);
  v.constraints = constraint_features(ws, codes);
  v.correspondence = match_objects(v.current, v.goals);

  const auto embed = [&](const std::vector<ObjectFeature>& fs) {
    std::vector<std::vector<double>> out;
    for (const auto& f : fs) out.push_back(codes ? node_embedding(f) : std::vector<double>{});
    return out;
  };
  v.graph = graph::build_graph(embed(v.current), embed(v.goals), embed(v.constraints), v.correspondence);
  const std::size_t n = v.current.size();
  for (std::size_t i = 0; i < n; ++i) v.graph.handles[i] = v.current[i].handle;
  for (std::size_t g = 0; g < n; ++g)
    v.graph.handles[n + g] = v.current[static_cast<std::size_t>(v.correspondence.goal_to_current[g])].handle;
  for (std::size_t k = 0; k < v.constraints.size(); ++k) v.graph.handles[2 * n + k] = v.constraints[k].handle;

  v.perceived.workspace = s.workspace;
  v.perceived.tau = s.tau;
  const auto as_object = [](const sim::ObservedObject& o, const std::string& id) {
    return sim::ObjectInstance{id, sim::ShapeKind::block, o.width, o.depth, o.height, o.pose};
  };
  for (const auto& o : oc.objects) v.perceived.current.push_back(as_object(o, o.handle));
  for (std::size_t g = 0; g < n; ++g)
    v.perceived.goals.push_back(as_object(og.objects[g], v.graph.handles[n + g]));
  return v;
}

inline TaskView perceive_task(const sim::SceneState& s, const CodeCache& codes, const PerceptionOptions& opt = {},
                              Rng* rng = nullptr) {
  return perceive_task(s, &codes, opt, rng);
}

/// Objects the perceived scene still has to move.
inline std::vector<char> pending_objects(const sim::SceneState& perceived) {
  std::vector<char> out(perceived.size(), 0);
  for (std::size_t i = 0; i < perceived.size(); ++i)
    out[i] = !sim::at_goal(perceived.current[i], perceived.goal_of(i), perceived.tau);
  return out;
}

}  // namespace hetplan::perception
