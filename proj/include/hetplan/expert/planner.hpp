#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/sim/geometry.hpp"
#include "hetplan/sim/primitives.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::expert {

inline constexpr std::size_t kNodeBudget = 1'000'000;
/// Planned cost of an ungraspable object that needs a multi-segment push.
inline constexpr int kMultiPushCost = 3;
/// Route searches tried per buffer move of an ungraspable object.
inline constexpr int kBufferRouteAttempts = 8;
/// Buffer spots at least this many cells from other goals rank first.
inline constexpr int kBufferClearance = 2;

enum class ExpertAction { push, pick_place, buffer_move };

inline const char* to_string(ExpertAction a) {
  switch (a) {
    case ExpertAction::push: return "PUSH";
    case ExpertAction::pick_place: return "PICK_PLACE";
    case ExpertAction::buffer_move: return "BUFFER_MOVE";
  }
  return "?";
}

inline ExpertAction expert_action_from_string(const std::string& s) {
  for (auto a : {ExpertAction::push, ExpertAction::pick_place, ExpertAction::buffer_move})
    if (s == to_string(a)) return a;
  throw FormatError("unknown plan action '" + s + "'");
}

struct ActionLabel {
  int push = 0;  // S_a
  int cost = 0;
  sim::PrimitiveKind primitive = sim::PrimitiveKind::push;
};

/// Push (S_a = 1) when the object cannot be grasped or slides straight to
/// its goal; otherwise pick-and-place.
inline ActionLabel action_label(const sim::SceneState& s, std::size_t i) {
  const sim::ObjectInstance& o = s.current.at(i);
  const sim::ObjectInstance& g = s.goal_of(i);
  const bool graspable = sim::is_graspable(o, *s.workspace);
  if (!graspable && g.pose.level != o.pose.level)
    throw InvalidTask("'" + o.id + "' cannot be grasped and its goal is on another level");
  if (sim::direct_push_path_exists(s, i, g.pose)) return {1, sim::kPushCost, sim::PrimitiveKind::push};
  if (graspable) return {0, sim::kPickPlaceCost, sim::PrimitiveKind::pick_place};
  return {1, kMultiPushCost, sim::PrimitiveKind::push};
}

inline ActionLabel action_label(const sim::SceneState& s, const std::string& id) {
  return action_label(s, s.index_of(id));
}

struct PlanStep {
  std::string object_id;
  ExpertAction action = ExpertAction::push;
  sim::PrimitiveKind primitive = sim::PrimitiveKind::push;
  sim::Pose target;
  int planned_cost = 0;
};

struct ExpertPlan {
  std::vector<PlanStep> sequence;
  int total_cost = 0;
  std::vector<std::string> object_ids;  // scene order
  std::vector<int> action_labels;       // S_a at the start state
  std::vector<int> first_labels;
  bool solved = false;  // the scene already met its goals
  std::size_t expansions = 0;
};

/// 1 for the object moved first, 0 elsewhere; all zeros for a solved scene.
inline std::vector<int> first_object_label(const ExpertPlan& plan) {
  std::vector<int> out(plan.object_ids.size(), 0);
  if (plan.sequence.empty()) return out;
  for (std::size_t i = 0; i < plan.object_ids.size(); ++i)
    if (plan.object_ids[i] == plan.sequence.front().object_id) out[i] = 1;
  return out;
}

enum class ObjectStatus : std::uint8_t { start, goal, buffer };

struct SearchState {
  sim::SceneState scene;
  std::vector<ObjectStatus> status;

  bool done() const {
    return std::all_of(status.begin(), status.end(), [](ObjectStatus s) { return s == ObjectStatus::goal; });
  }

  std::string key() const {
    std::string k;
    for (std::size_t i = 0; i < status.size(); ++i) {
      k.push_back(static_cast<char>(status[i]));
      if (status[i] != ObjectStatus::buffer) continue;
      const auto& p = scene.current[i].pose;
      k += std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.level) + ";";
    }
    return k;
  }
};

struct Move {
  std::size_t object = 0;
  ExpertAction action = ExpertAction::push;
  sim::PrimitiveKind primitive = sim::PrimitiveKind::push;
  sim::Pose target;
  int cost = 0;
};

struct ExpertOptions {
  std::size_t node_budget = kNodeBudget;
};

/// Search over per-object status (start, goal, buffer). A goal move needs a
/// free goal footprint and costs the object's label cost. A buffer move
/// relocates a start-position object that covers another object's pending
/// goal, at the cost of its cheapest primitive.
class ExpertSearch {
 public:
  explicit ExpertSearch(sim::SceneState scene, ExpertOptions opt = {}) : base_(std::move(scene)), opt_(opt) {
    const sim::Workspace& ws = *base_.workspace;
    for (std::size_t i = 0; i < base_.size(); ++i) {
      const auto& o = base_.current[i];
      const auto& g = base_.goal_of(i);
      goal_rect_.push_back(sim::footprint_cells(o, g.pose));
      goal_pose_.push_back(g.pose);
      if (sim::is_graspable(o, ws)) continue;
      if (g.pose.level != o.pose.level)
        throw InvalidTask("'" + o.id + "' cannot be grasped and its goal is on another level");
      if (component_of(o.pose) != component_of(g.pose))
        throw InvalidTask("'" + o.id + "' cannot be grasped and its goal is behind a wall");
    }
    order_.resize(base_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(),
              [&](std::size_t a, std::size_t b) { return base_.current[a].id < base_.current[b].id; });
  }

  const sim::SceneState& scene() const { return base_; }

  SearchState start() const {
    SearchState s{base_, std::vector<ObjectStatus>(base_.size(), ObjectStatus::start)};
    for (std::size_t i = 0; i < base_.size(); ++i)
      if (sim::at_goal(base_.current[i], base_.goal_of(i), base_.tau) && !covers_other_goal(s, i, false))
        s.status[i] = ObjectStatus::goal;
    return s;
  }

  /// Lower bound per unfinished object: one push if it shares a surface
  /// region with its goal, else a pick-and-place.
  int heuristic(const SearchState& s) const {
    int h = 0;
    for (std::size_t i = 0; i < s.status.size(); ++i) {
      if (s.status[i] == ObjectStatus::goal) continue;
      const auto& p = s.scene.current[i].pose;
      h += p.level == goal_pose_[i].level && component_of(p) == component_of(goal_pose_[i]) ? sim::kPushCost
                                                                                          : sim::kPickPlaceCost;
    }
    return h;
  }

  /// Legal moves in id order, goal move before buffer move per object.
  const std::vector<Move>& moves(const SearchState& s) {
    const std::string k = s.key();
    auto it = moves_.find(k);
    if (it != moves_.end()) return it->second;
    std::vector<Move> out;
    for (std::size_t i : order_) {
      if (s.status[i] == ObjectStatus::goal) continue;
      if (auto m = goal_move(s, i)) out.push_back(*m);
      if (s.status[i] == ObjectStatus::start && covers_other_goal(s, i, true))
        if (auto m = buffer_move(s, i)) out.push_back(*m);
    }
    return moves_.emplace(k, std::move(out)).first->second;
  }

  SearchState apply(const SearchState& s, const Move& m) const {
    SearchState n = s;
    n.scene.current[m.object].pose = m.target;
    n.status[m.object] = m.action == ExpertAction::buffer_move ? ObjectStatus::buffer : ObjectStatus::goal;
    return n;
  }

  /// Optimal remaining cost by A*, memoized per state; nullopt when the
  /// goals cannot be reached. Throws PlannerExhausted past the node budget.
  std::optional<int> cost_to_go(const SearchState& from) {
    const std::string k0 = from.key();
    if (auto it = memo_.find(k0); it != memo_.end()) return it->second;
    struct Entry {
      int f, g;
      std::size_t id;
      bool operator>(const Entry& o) const { return f != o.f ? f > o.f : id > o.id; }
    };
    std::vector<SearchState> nodes{from};
    std::unordered_map<std::string, int> best{{k0, 0}};
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    open.push({heuristic(from), 0, 0});
    std::optional<int> result;
    std::size_t expanded = 0;
    while (!open.empty()) {
      const Entry e = open.top();
      open.pop();
      const SearchState cur = nodes[e.id];
      const std::string k = cur.key();
      if (best.at(k) < e.g) continue;
      if (cur.done()) {
        result = e.g;
        break;
      }
      if (++expanded > opt_.node_budget)
        throw PlannerExhausted("no plan within " + std::to_string(opt_.node_budget) + " expansions");
      ++expansions_;
      for (const Move& m : moves(cur)) {
        SearchState next = apply(cur, m);
        const int g = e.g + m.cost;
        const std::string nk = next.key();
        auto it = best.find(nk);
        if (it != best.end() && it->second <= g) continue;
        best[nk] = g;
        open.push({g + heuristic(next), g, nodes.size()});
        nodes.push_back(std::move(next));
      }
    }
    memo_.emplace(k0, result);
    return result;
  }

  std::size_t expansions() const { return expansions_; }

  /// Does object i's footprint overlap the goal of another object (pending
  /// ones only when `pending_only`)?
  bool covers_other_goal(const SearchState& s, std::size_t i, bool pending_only) const {
    const auto& o = s.scene.current[i];
    const sim::Rect r = sim::footprint_cells(o);
    for (std::size_t j = 0; j < s.status.size(); ++j) {
      if (j == i || (pending_only && s.status[j] == ObjectStatus::goal)) continue;
      if (goal_pose_[j].level == o.pose.level && sim::rects_overlap(r, goal_rect_[j])) return true;
    }
    return false;
  }

  std::optional<Move> goal_move(const SearchState& s, std::size_t i) const {
    if (sim::placement(s.scene, i, goal_pose_[i]) != sim::Placement::ok) return std::nullopt;
    const ActionLabel l = action_label(s.scene, i);
    if (l.cost == kMultiPushCost && l.primitive == sim::PrimitiveKind::push &&
        !sim::find_push_route(s.scene, i, goal_pose_[i]))
      return std::nullopt;
    const ExpertAction a = l.primitive == sim::PrimitiveKind::push ? ExpertAction::push : ExpertAction::pick_place;
    return Move{i, a, l.primitive, goal_pose_[i], l.cost};
  }

  /// Nearest free spot that covers no other object's goal, preferring spots
  /// clear of goals by kBufferClearance: a straight push if one exists, else
  /// pick-and-place (graspable) or a routed push.
  std::optional<Move> buffer_move(const SearchState& s, std::size_t i) const {
    const sim::Workspace& ws = *s.scene.workspace;
    const sim::ObjectInstance& o = s.scene.current[i];
    struct Candidate {
      bool near_goal;
      double dist;
      sim::Pose pose;
    };
    std::vector<Candidate> cands;
    const int w = sim::footprint_cells(o, {o.width / 2, o.depth / 2, 0}).x1;
    const int d = sim::footprint_cells(o, {o.width / 2, o.depth / 2, 0}).y1;
    for (int y0 = 0; y0 + d <= ws.depth(); ++y0)
      for (int x0 = 0; x0 + w <= ws.width(); ++x0) {
        const sim::Pose p{x0 + o.width / 2, y0 + o.depth / 2, ws.level_at(x0, y0)};
        if (sim::placement(s.scene, i, p) != sim::Placement::ok) continue;
        const sim::Rect r = sim::footprint_cells(o, p);
        const sim::Rect grown{r.x0 - kBufferClearance, r.y0 - kBufferClearance, r.x1 + kBufferClearance,
                              r.y1 + kBufferClearance};
        bool on_goal = false, near_goal = false;
        for (std::size_t j = 0; j < s.status.size() && !on_goal; ++j) {
          if (j == i || goal_pose_[j].level != p.level) continue;
          on_goal = sim::rects_overlap(r, goal_rect_[j]);
          near_goal = near_goal || (s.status[j] != ObjectStatus::goal && sim::rects_overlap(grown, goal_rect_[j]));
        }
        if (!on_goal) cands.push_back({near_goal, sim::distance(o.center(), {p.x, p.y}), p});
      }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.near_goal != b.near_goal ? b.near_goal : a.dist < b.dist;
    });
    const sim::BlockedGrid grid(s.scene, i, o.pose.level);
    for (const auto& c : cands)
      if (c.pose.level == o.pose.level && grid.sweep_clear(o.center(), {c.pose.x, c.pose.y}, o.width, o.depth))
        return Move{i, ExpertAction::buffer_move, sim::PrimitiveKind::push, c.pose, sim::kPushCost};
    if (sim::is_graspable(o, ws)) {
      if (cands.empty()) return std::nullopt;
      return Move{i, ExpertAction::buffer_move, sim::PrimitiveKind::pick_place, cands.front().pose,
                  sim::kPickPlaceCost};
    }
    int tries = 0;
    for (const auto& c : cands) {
      if (c.pose.level != o.pose.level) continue;
      if (sim::find_push_route(s.scene, i, c.pose))
        return Move{i, ExpertAction::buffer_move, sim::PrimitiveKind::push, c.pose, kMultiPushCost};
      if (++tries >= kBufferRouteAttempts) break;
    }
    return std::nullopt;
  }

 private:
  int component_of(const sim::Pose& p) const {
    return base_.workspace->component(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)));
  }

  sim::SceneState base_;
  ExpertOptions opt_;
  std::vector<sim::Rect> goal_rect_;
  std::vector<sim::Pose> goal_pose_;
  std::vector<std::size_t> order_;
  std::unordered_map<std::string, std::vector<Move>> moves_;
  std::unordered_map<std::string, std::optional<int>> memo_;
  std::size_t expansions_ = 0;
};

/// Minimum-cost sequence; among equal-cost plans the one whose (object id,
/// buffer flag) sequence is lexicographically smallest.
inline ExpertPlan astar_plan(const sim::SceneState& scene, const ExpertOptions& opt = {}) {
  ExpertSearch search(scene, opt);
  ExpertPlan plan;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    plan.object_ids.push_back(scene.current[i].id);
    plan.action_labels.push_back(action_label(scene, i).push);
  }
  SearchState s = search.start();
  auto total = search.cost_to_go(s);
  if (!total) throw PlannerExhausted("goals are unreachable with the available moves");
  plan.total_cost = *total;
  plan.solved = s.done();
  int remaining = *total;
  while (!s.done()) {
    bool advanced = false;
    for (const Move& m : search.moves(s)) {
      SearchState next = search.apply(s, m);
      auto rest = search.cost_to_go(next);
      if (!rest || m.cost + *rest != remaining) continue;
      plan.sequence.push_back({scene.current[m.object].id, m.action, m.primitive, m.target, m.cost});
      remaining = *rest;
      s = std::move(next);
      advanced = true;
      break;
    }
    if (!advanced) throw PlannerExhausted("optimal plan could not be reconstructed");
  }
  plan.first_labels = first_object_label(plan);
  plan.expansions = search.expansions();
  return plan;
}

struct Execution {
  sim::SceneState state;
  int cost = 0;
  bool success = false;
  std::vector<int> step_costs;
};

/// Replays a plan through the simulator primitives; stops at the first
/// failing primitive.
inline Execution execute_plan(const sim::SceneState& scene, const ExpertPlan& plan, const sim::Jitter& jitter = {}) {
  Execution ex{scene, 0, false, {}};
  for (const PlanStep& st : plan.sequence) {
    auto out = sim::try_primitive(ex.state, {st.primitive, st.object_id, st.target}, jitter);
    if (!out.ok()) return ex;
    ex.state = std::move(out.state);
    ex.cost += out.cost;
    ex.step_costs.push_back(out.cost);
  }
  ex.success = sim::is_success(ex.state);
  return ex;
}

inline nlohmann::json to_json(const ExpertPlan& p) {
  nlohmann::json seq = nlohmann::json::array();
  for (const auto& s : p.sequence)
    seq.push_back({{"object", s.object_id},
                   {"action", to_string(s.action)},
                   {"primitive", sim::to_string(s.primitive)},
                   {"target", {{"x", s.target.x}, {"y", s.target.y}, {"level", s.target.level}}},
                   {"planned_cost", s.planned_cost}});
  nlohmann::json labels = nlohmann::json::object(), first = nlohmann::json::object();
  for (std::size_t i = 0; i < p.object_ids.size(); ++i) {
    labels[p.object_ids[i]] = p.action_labels[i];
    first[p.object_ids[i]] = p.first_labels[i];
  }
  return {{"sequence", seq},      {"total_cost", p.total_cost}, {"action_labels", labels},
          {"first_labels", first}, {"solved", p.solved},         {"objects", p.object_ids}};
}

inline ExpertPlan plan_from_json(const nlohmann::json& j) {
  try {
    ExpertPlan p;
    p.object_ids = j.at("objects").get<std::vector<std::string>>();
    for (const auto& id : p.object_ids) {
      p.action_labels.push_back(j.at("action_labels").at(id).get<int>());
      p.first_labels.push_back(j.at("first_labels").at(id).get<int>());
    }
    for (const auto& s : j.at("sequence")) {
      const auto& t = s.at("target");
      p.sequence.push_back({s.at("object").get<std::string>(), expert_action_from_string(s.at("action")),
                            sim::primitive_kind_from_string(s.at("primitive").get<std::string>()),
                            {t.at("x").get<double>(), t.at("y").get<double>(), t.at("level").get<int>()},
                            s.at("planned_cost").get<int>()});
    }
    p.total_cost = j.at("total_cost").get<int>();
    p.solved = j.at("solved").get<bool>();
    int sum = 0;
    for (const auto& s : p.sequence) sum += s.planned_cost;
    if (sum != p.total_cost) throw FormatError("plan total_cost does not match its steps");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("plan: ") + e.what());
  }
}

}  // namespace hetplan::expert
