#pragma once

#include <algorithm>
#include <functional>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hetplan/coord/model.hpp"
#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/expert/planner.hpp"
#include "hetplan/perception/task_view.hpp"
#include "hetplan/sim/primitives.hpp"

namespace hetplan::eval {

enum class Policy { ours, model, plan, gnn, expert };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::ours: return "ours";
    case Policy::model: return "model";
    case Policy::plan: return "plan";
    case Policy::gnn: return "gnn";
    case Policy::expert: return "expert";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& s) {
  for (Policy p : {Policy::ours, Policy::model, Policy::plan, Policy::gnn, Policy::expert})
    if (s == to_string(p)) return p;
  throw DomainError("unknown policy '" + s + "'");
}

enum class FailureKind { none, timeout, primitive_error };

inline const char* to_string(FailureKind k) {
  switch (k) {
    case FailureKind::none: return "none";
    case FailureKind::timeout: return "timeout";
    case FailureKind::primitive_error: return "primitive_error";
  }
  return "?";
}

/// One executed (or attempted) primitive.
struct StepRecord {
  std::size_t step = 0;
  std::string object;
  sim::PrimitiveKind primitive = sim::PrimitiveKind::push;
  bool buffer = false;  // relocation rather than a goal move
  sim::Pose target;
  sim::PrimitiveStatus status = sim::PrimitiveStatus::ok;
  int cost = 0;
};

struct TaskEpisode {
  std::vector<coord::Decision> decisions;  // learned policies only
  std::vector<StepRecord> primitives;
  int total_cost = 0;
  std::size_t steps = 0;
  bool success = false;
  FailureKind failure_kind = FailureKind::none;
  sim::SceneState final_state;
};

/// Learned coordinator plus a code cache over its frozen encoder.
class Agent {
 public:
  explicit Agent(coord::CoordinatorBundle b)
      : bundle_(std::make_shared<coord::CoordinatorBundle>(std::move(b))),
        codes_(std::make_shared<perception::CodeCache>(bundle_->encoder)) {}

  const coord::CoordinatorModel& model() const { return bundle_->model; }
  const perception::CodeCache& codes() const { return *codes_; }

 private:
  std::shared_ptr<coord::CoordinatorBundle> bundle_;
  std::shared_ptr<perception::CodeCache> codes_;
};

/// Picks (target, primitive) from a perceived task; `eligible` marks the
/// current objects that may be chosen.
using Chooser = std::function<coord::Decision(const perception::TaskView&, const std::vector<char>& eligible)>;

struct Agents {
  const Agent* ours = nullptr;
  const Agent* gnn = nullptr;
};

struct RolloutOptions {
  std::size_t max_steps = 0;  // 0 means 2N
  std::uint64_t seed = 0;
  bool jitter = false;
  perception::PerceptionOptions perception;
  /// Fault injection: swap the goal correspondence of these two objects
  /// (by current index) in every observation.
  std::optional<std::pair<std::size_t, std::size_t>> swap_goals;
};

/// Exchanges the matched goals of two current objects in a perceived task.
inline void swap_goal_assignment(perception::TaskView& v, std::size_t a, std::size_t b) {
  auto& c = v.correspondence.goal_to_current;
  const std::size_t n = c.size();
  if (a >= n || b >= n || a == b) return;
  const auto ga = static_cast<std::size_t>(std::find(c.begin(), c.end(), static_cast<int>(a)) - c.begin());
  const auto gb = static_cast<std::size_t>(std::find(c.begin(), c.end(), static_cast<int>(b)) - c.begin());
  std::swap(c[ga], c[gb]);
  std::swap(v.perceived.goals[ga].id, v.perceived.goals[gb].id);
  std::swap(v.graph.handles[n + ga], v.graph.handles[n + gb]);
  for (auto& e : v.graph.edges) {
    if (e.type == graph::EdgeType::cur_goal && e.dst == static_cast<int>(n + ga)) e.src = c[ga];
    else if (e.type == graph::EdgeType::cur_goal && e.dst == static_cast<int>(n + gb)) e.src = c[gb];
    else if (e.type == graph::EdgeType::goal_cur && e.src == static_cast<int>(n + ga)) e.dst = c[ga];
    else if (e.type == graph::EdgeType::goal_cur && e.src == static_cast<int>(n + gb)) e.dst = c[gb];
  }
  graph::sort_edges(v.graph.edges);
}

namespace detail {

inline perception::TaskView observe_task(const sim::SceneState& s, const perception::CodeCache* codes,
                                         const RolloutOptions& opt, Rng& rng) {
  perception::TaskView v = perception::perceive_task(s, codes, opt.perception, &rng);
  if (opt.swap_goals) swap_goal_assignment(v, opt.swap_goals->first, opt.swap_goals->second);
  return v;
}

/// Search state over a perceived scene: objects at their goal are done.
inline expert::SearchState search_state(const sim::SceneState& perceived) {
  expert::SearchState st{perceived, std::vector<expert::ObjectStatus>(perceived.size(), expert::ObjectStatus::start)};
  for (std::size_t i = 0; i < perceived.size(); ++i)
    if (sim::at_goal(perceived.current[i], perceived.goal_of(i), perceived.tau)) st.status[i] = expert::ObjectStatus::goal;
  return st;
}

class Runner {
 public:
  Runner(const sim::SceneState& task, const RolloutOptions& opt)
      : opt_(opt), rng_(mix_seed(opt.seed, 0xe7a1)), jitter_rng_(mix_seed(opt.seed, 0x717)) {
    ep_.final_state = task;
    budget_ = opt.max_steps ? opt.max_steps : 2 * task.size();
  }

  const sim::SceneState& state() const { return ep_.final_state; }
  Rng& rng() { return rng_; }
  bool done() const { return sim::is_success(ep_.final_state); }
  bool out_of_steps() const { return ep_.steps >= budget_; }
  TaskEpisode& episode() { return ep_; }

  /// Runs one primitive on the true state; counts cost on success.
  sim::PrimitiveStatus execute(const std::string& id, sim::PrimitiveKind kind, const sim::Pose& target, bool buffer) {
    sim::Jitter jitter;
    if (opt_.jitter) jitter.rng = &jitter_rng_;
    auto out = sim::try_primitive(ep_.final_state, {kind, id, target}, jitter);
    ep_.primitives.push_back({ep_.steps, id, kind, buffer, target, out.status, out.ok() ? out.cost : 0});
    if (out.ok()) {
      ep_.total_cost += out.cost;
      ep_.final_state = std::move(out.state);
    }
    return out.status;
  }

  TaskEpisode finish(bool gave_up) {
    ep_.success = done();
    if (ep_.success) ep_.failure_kind = FailureKind::none;
    else ep_.failure_kind = gave_up && !out_of_steps() ? FailureKind::primitive_error : FailureKind::timeout;
    return std::move(ep_);
  }

 private:
  RolloutOptions opt_;
  Rng rng_, jitter_rng_;
  TaskEpisode ep_;
  std::size_t budget_ = 0;
};

/// Closed loop with a learned coordinator. The actor moves the target to
/// its matched goal with the chosen primitive. When the goal is occupied
/// and the target itself sits on a pending goal, the target goes to a
/// buffer spot instead. A (target, primitive) pair that failed is not
/// retried until the scene changes: the actor switches to the other
/// primitive, and a target with both failed is masked from selection.
inline TaskEpisode run_closed_loop(const sim::SceneState& task, const Chooser& choose,
                                   const perception::CodeCache* codes, const RolloutOptions& opt) {
  Runner run(task, opt);
  std::vector<std::pair<std::string, sim::PrimitiveKind>> failed;
  const auto has_failed = [&](const std::string& id, sim::PrimitiveKind k) {
    return std::find(failed.begin(), failed.end(), std::pair{id, k}) != failed.end();
  };
  bool gave_up = false;
  while (!run.done() && !run.out_of_steps()) {
    const perception::TaskView v = observe_task(run.state(), codes, opt, run.rng());
    const sim::SceneState& seen = v.perceived;
    std::vector<char> eligible = perception::pending_objects(seen);
    for (std::size_t i = 0; i < eligible.size(); ++i) {
      const std::string& id = seen.current[i].id;
      if (has_failed(id, sim::PrimitiveKind::push) && has_failed(id, sim::PrimitiveKind::pick_place)) eligible[i] = 0;
    }
    if (std::none_of(eligible.begin(), eligible.end(), [](char c) { return c != 0; })) {
      gave_up = true;
      break;
    }
    const coord::Decision d = choose(v, eligible);
    run.episode().decisions.push_back(d);
    const std::size_t i = d.target;
    const std::string id = seen.current[i].id;
    sim::PrimitiveKind kind = d.action;
    if (has_failed(id, kind))
      kind = kind == sim::PrimitiveKind::push ? sim::PrimitiveKind::pick_place : sim::PrimitiveKind::push;
    sim::Pose target = seen.goal_of(i).pose;
    bool buffer = false;
    if (sim::placement(seen, i, target) == sim::Placement::occupied) {
      std::optional<expert::Move> m;
      try {
        expert::ExpertSearch search(seen);
        const expert::SearchState st = search_state(seen);
        if (search.covers_other_goal(st, i, true)) m = search.buffer_move(st, i);
      } catch (const InvalidTask&) {
      }
      if (m) kind = m->primitive, target = m->target, buffer = true;
    }
    const auto status = run.execute(id, kind, target, buffer);
    ++run.episode().steps;
    if (status == sim::PrimitiveStatus::ok) {
      failed.clear();
    } else if (status == sim::PrimitiveStatus::target_occupied || buffer) {
      failed.push_back({id, sim::PrimitiveKind::push});
      failed.push_back({id, sim::PrimitiveKind::pick_place});
    } else {
      failed.push_back({id, kind});
    }
  }
  return run.finish(gave_up);
}

inline TaskEpisode run_agent(const sim::SceneState& task, const Agent& agent, const RolloutOptions& opt) {
  const auto choose = [&](const perception::TaskView& v, const std::vector<char>& eligible) {
    return agent.model().predict(v.graph, eligible);
  };
  return run_closed_loop(task, choose, &agent.codes(), opt);
}

/// Privileged random baseline: a random pending object; an occupier of its
/// goal is first pushed to a random free spot (a step of its own); the
/// object then moves with its expert action label.
inline TaskEpisode run_model_baseline(const sim::SceneState& task, const RolloutOptions& opt) {
  Runner run(task, opt);
  while (!run.done() && !run.out_of_steps()) {
    const sim::SceneState& s = run.state();
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!sim::at_goal(s.current[i], s.goal_of(i), s.tau)) pending.push_back(i);
    const std::size_t i = pending[run.rng().below(pending.size())];
    const std::string id = s.current[i].id;
    const sim::Pose goal = s.goal_of(i).pose;
    const auto occ = sim::occupants(s, i, goal);
    if (!occ.empty()) {
      const std::size_t j = occ.front();
      const auto& o = s.current[j];
      const sim::Workspace& ws = *s.workspace;
      std::vector<sim::Pose> free;
      const sim::Rect r0 = sim::footprint_cells(o, {o.width / 2, o.depth / 2, 0});
      for (int y0 = 0; y0 + r0.y1 <= ws.depth(); ++y0)
        for (int x0 = 0; x0 + r0.x1 <= ws.width(); ++x0) {
          const sim::Pose p{x0 + o.width / 2, y0 + o.depth / 2, o.pose.level};
          if (sim::placement(s, j, p) == sim::Placement::ok && sim::direct_push_path_exists(s, j, p)) free.push_back(p);
        }
      const std::string oid = o.id;
      const sim::Pose spot = free.empty() ? o.pose : free[run.rng().below(free.size())];
      run.execute(oid, sim::PrimitiveKind::push, spot, true);
      ++run.episode().steps;
      continue;
    }
    const auto label = expert::action_label(s, i);
    run.execute(id, label.primitive, goal, false);
    ++run.episode().steps;
  }
  return run.finish(false);
}

/// Open loop: one A* plan from the first observation, executed by handle
/// without replanning; failed steps are skipped.
inline TaskEpisode run_plan_baseline(const sim::SceneState& task, const RolloutOptions& opt) {
  Runner run(task, opt);
  if (run.done()) return run.finish(false);
  const perception::TaskView v = observe_task(run.state(), nullptr, opt, run.rng());
  expert::ExpertPlan plan;
  try {
    plan = expert::astar_plan(v.perceived);
  } catch (const Error&) {
    return run.finish(true);
  }
  for (const auto& st : plan.sequence) {
    if (run.done() || run.out_of_steps()) break;
    run.execute(st.object_id, st.primitive, st.target, st.action == expert::ExpertAction::buffer_move);
    ++run.episode().steps;
  }
  return run.finish(!run.done());
}

/// Full-state oracle: replans with A* every step and executes the first move.
inline TaskEpisode run_expert(const sim::SceneState& task, const RolloutOptions& opt) {
  Runner run(task, opt);
  while (!run.done() && !run.out_of_steps()) {
    expert::ExpertPlan plan;
    try {
      plan = expert::astar_plan(run.state());
    } catch (const Error&) {
      return run.finish(true);
    }
    const auto& st = plan.sequence.front();
    run.execute(st.object_id, st.primitive, st.target, st.action == expert::ExpertAction::buffer_move);
    ++run.episode().steps;
  }
  return run.finish(false);
}

}  // namespace detail

/// Runs one episode of `policy` on a task (current = start, goals = goal).
/// Terminates on success or after max_steps (default 2N) coordinator steps.
inline TaskEpisode rollout(const sim::SceneState& task, Policy policy, const Agents& agents = {},
                           const RolloutOptions& opt = {}) {
  sim::validate_scene(task);
  switch (policy) {
    case Policy::ours:
      if (!agents.ours) throw DomainError("policy 'ours' needs a trained coordinator");
      return detail::run_agent(task, *agents.ours, opt);
    case Policy::gnn:
      if (!agents.gnn) throw DomainError("policy 'gnn' needs a trained tied coordinator");
      return detail::run_agent(task, *agents.gnn, opt);
    case Policy::model: return detail::run_model_baseline(task, opt);
    case Policy::plan: return detail::run_plan_baseline(task, opt);
    case Policy::expert: return detail::run_expert(task, opt);
  }
  throw DomainError("unknown policy");
}

/// Closed loop driven by an arbitrary chooser (graphs carry no features
/// when `codes` is null).
inline TaskEpisode rollout_with(const sim::SceneState& task, const Chooser& choose,
                                const perception::CodeCache* codes = nullptr, const RolloutOptions& opt = {}) {
  sim::validate_scene(task);
  return detail::run_closed_loop(task, choose, codes, opt);
}

}  // namespace hetplan::eval
