#include <gtest/gtest.h>

#include <cstdlib>
#include <numeric>

#include "hetplan/data/dataset.hpp"
#include "hetplan/eval/evaluate.hpp"

using namespace hetplan;
using eval::Policy;
using sim::ObjectInstance;
using sim::Pose;

namespace {

ObjectInstance box(std::string id, double w, double d, Pose p) {
  return {std::move(id), sim::ShapeKind::block, w, d, 5, p};
}

sim::SceneState task(const std::string& env, std::vector<std::pair<ObjectInstance, Pose>> objs) {
  sim::SceneState s{data::load_env(env), {}, {}, sim::kDefaultTau};
  for (auto& [o, g] : objs) {
    s.current.push_back(o);
    s.goals.push_back(o);
    s.goals.back().pose = g;
  }
  sim::validate_scene(s);
  return s;
}

/// Untrained coordinator flagged usable, with a tiny random encoder.
eval::Agent random_agent(bool tied) {
  coord::CoordinatorConfig cfg;
  cfg.tied = tied;
  coord::CoordinatorBundle b{coord::CoordinatorModel(cfg, 4), perception::ShapeEncoder({perception::kGridResolution, 2}, 4),
                             {}};
  b.model.allow_random_weights();
  b.encoder.allow_random_weights();
  return eval::Agent(std::move(b));
}

std::vector<eval::SuiteTask> suite(std::size_t count, std::uint64_t seed) {
  data::GenOptions g;
  g.count = count;
  g.seed = seed;
  return eval::suite_from_records(data::generate_tasks(g).records);
}

void check_episode(const eval::TaskEpisode& ep, const sim::SceneState& t) {
  EXPECT_LE(ep.steps, 2 * t.size());
  int sum = 0;
  for (const auto& p : ep.primitives) sum += p.cost;
  EXPECT_EQ(ep.total_cost, sum);
  EXPECT_EQ(ep.success, sim::is_success(ep.final_state));
  EXPECT_EQ(ep.success, ep.failure_kind == eval::FailureKind::none);
}

}  // namespace

TEST(Rollout, SolvedTaskTakesNoSteps) {
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {10, 10, 0}}});
  const auto ours = random_agent(false), gnn = random_agent(true);
  for (Policy p : {Policy::ours, Policy::gnn, Policy::model, Policy::plan, Policy::expert}) {
    const auto ep = eval::rollout(t, p, {&ours, &gnn});
    EXPECT_TRUE(ep.success) << to_string(p);
    EXPECT_EQ(ep.steps, 0u);
    EXPECT_EQ(ep.total_cost, 0);
  }
}

TEST(Rollout, SingleDirectPushCostsOne) {
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {30, 10, 0}}});
  const auto plan = expert::astar_plan(t);
  ASSERT_EQ(plan.total_cost, 1);
  for (Policy p : {Policy::expert, Policy::plan, Policy::model}) {
    const auto ep = eval::rollout(t, p);
    EXPECT_TRUE(ep.success);
    EXPECT_EQ(ep.steps, 1u);
    EXPECT_EQ(ep.total_cost, 1);
  }
  // A chooser that always pushes the only object.
  const auto push = [](const perception::TaskView&, const std::vector<char>&) {
    coord::Decision d;
    d.p_object = {1.0};
    d.p_action = {1.0};
    return d;
  };
  const auto ep = eval::rollout_with(t, push);
  EXPECT_TRUE(ep.success);
  EXPECT_EQ(ep.steps, 1u);
  EXPECT_EQ(ep.total_cost, 1);
}

TEST(Rollout, AdversarialChooserTimesOut) {
  // A swap. The chooser ignores the mask and always insists on a.
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {30, 10, 0}}, {box("b", 4, 4, {30, 10, 0}), {10, 10, 0}}});
  int calls = 0;
  const auto stubborn = [&](const perception::TaskView& v, const std::vector<char>&) {
    ++calls;
    coord::Decision d;
    d.p_object.assign(v.perceived.size(), 0.0);
    d.p_action.assign(v.perceived.size(), 1.0);
    d.target = v.perceived.find("a");
    return d;
  };
  const auto ep = eval::rollout_with(t, stubborn);
  EXPECT_FALSE(ep.success);
  EXPECT_EQ(ep.failure_kind, eval::FailureKind::timeout);
  EXPECT_EQ(ep.steps, 4u);
  EXPECT_EQ(calls, 4);
  ASSERT_EQ(ep.primitives.size(), 4u);
  EXPECT_TRUE(ep.primitives[0].buffer);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_EQ(ep.primitives[k].status, sim::PrimitiveStatus::target_occupied);
  check_episode(ep, t);
}

TEST(Rollout, FailedPrimitiveSwitchesThenMasks) {
  // Ungraspable object told to pick-place: the actor falls back to pushing.
  const auto t = task("tabletop", {{box("big", 12, 12, {10, 10, 0}), {40, 10, 0}}});
  const auto pick = [](const perception::TaskView& v, const std::vector<char>&) {
    coord::Decision d;
    d.p_object.assign(v.perceived.size(), 1.0);
    d.p_action.assign(v.perceived.size(), 0.0);
    d.action = sim::PrimitiveKind::pick_place;
    return d;
  };
  const auto ep = eval::rollout_with(t, pick);
  ASSERT_EQ(ep.primitives.size(), 2u);
  EXPECT_EQ(ep.primitives[0].status, sim::PrimitiveStatus::not_graspable);
  EXPECT_EQ(ep.primitives[1].primitive, sim::PrimitiveKind::push);
  EXPECT_TRUE(ep.success);
  EXPECT_EQ(ep.total_cost, 1);
}

TEST(Rollout, BlockerOnPendingGoalGoesToBuffer) {
  // a covers b's goal and a's own goal is under b: a swap.
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {30, 10, 0}}, {box("b", 4, 4, {30, 10, 0}), {10, 10, 0}}});
  const auto first_a = [](const perception::TaskView& v, const std::vector<char>& eligible) {
    coord::Decision d;
    d.p_object.assign(v.perceived.size(), 0.0);
    d.p_action.assign(v.perceived.size(), 1.0);
    d.target = eligible[v.perceived.find("a")] ? v.perceived.find("a") : v.perceived.find("b");
    return d;
  };
  const auto ep = eval::rollout_with(t, first_a);
  ASSERT_FALSE(ep.primitives.empty());
  EXPECT_TRUE(ep.primitives[0].buffer);
  EXPECT_EQ(ep.primitives[0].object, "a");
  EXPECT_TRUE(ep.success);
  check_episode(ep, t);
}

TEST(ModelBaseline, RelocatesOccupierFirst) {
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {30, 10, 0}}, {box("b", 4, 4, {30, 10, 0}), {30, 30, 0}}});
  bool saw_relocation = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    eval::RolloutOptions opt;
    opt.seed = seed;
    const auto ep = eval::rollout(t, Policy::model, {}, opt);
    check_episode(ep, t);
    const auto again = eval::rollout(t, Policy::model, {}, opt);
    EXPECT_EQ(again.total_cost, ep.total_cost);
    EXPECT_EQ(again.primitives.size(), ep.primitives.size());
    if (ep.primitives[0].object == "b" && ep.primitives[0].buffer) {
      saw_relocation = true;
      ASSERT_GE(ep.primitives.size(), 2u);
    }
    // Whenever a's goal was occupied when a came up, b moved first.
    for (std::size_t k = 0; k < ep.primitives.size(); ++k)
      if (ep.primitives[k].object == "a") {
        EXPECT_TRUE(k > 0 && ep.primitives[k - 1].object == "b");
        break;
      }
  }
  EXPECT_TRUE(saw_relocation);
}

TEST(PlanBaseline, CleanObservationMatchesExpertCost) {
  for (const auto& st : suite(20, 5)) {
    const auto ep = eval::rollout(st.scene, Policy::plan);
    const auto ex = eval::rollout(st.scene, Policy::expert);
    EXPECT_TRUE(ep.success);
    EXPECT_TRUE(ex.success);
    check_episode(ep, st.scene);
    check_episode(ex, st.scene);
    EXPECT_LE(ep.total_cost, st.expert_cost);
    EXPECT_EQ(ep.total_cost, ex.total_cost);
  }
}

TEST(PlanBaseline, SwappedMatchingMisplaces) {
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {30, 10, 0}}, {box("b", 5, 3, {10, 30, 0}), {40, 30, 0}}});
  eval::RolloutOptions opt;
  opt.swap_goals = std::pair<std::size_t, std::size_t>{0, 1};
  const auto clean = eval::rollout(t, Policy::plan);
  const auto ep = eval::rollout(t, Policy::plan, {}, opt);
  EXPECT_TRUE(clean.success);
  EXPECT_FALSE(ep.success);
  check_episode(ep, t);
}

TEST(Rollout, RejectsMissingAgentsAndUnknownPolicies) {
  const auto t = task("tabletop", {{box("a", 4, 4, {10, 10, 0}), {30, 10, 0}}});
  EXPECT_THROW(eval::rollout(t, Policy::ours), DomainError);
  EXPECT_THROW(eval::rollout(t, Policy::gnn), DomainError);
  EXPECT_THROW(eval::policy_from_string("nerp"), DomainError);
  EXPECT_EQ(eval::policy_from_string("gnn"), Policy::gnn);
}

TEST(Evaluate, ExpertSolvesEverythingAndRowsAreSane) {
  const auto s = suite(30, 6);
  const auto ours = random_agent(false), gnn = random_agent(true);
  const std::vector<Policy> policies = {Policy::expert, Policy::ours, Policy::gnn, Policy::model, Policy::plan};
  const auto rep = eval::evaluate(s, policies, {1, 2}, {&ours, &gnn});
  EXPECT_EQ(rep.episodes.size(), 5u * 2u * 30u);
  EXPECT_EQ(rep.overall(Policy::expert).success_rate, 1.0);
  for (const auto& r : rep.rows) {
    EXPECT_GE(r.success_rate, 0.0);
    EXPECT_LE(r.success_rate, 1.0);
    if (r.success_rate > 0) EXPECT_GE(r.mean_cost, 0.0);
    EXPECT_GT(r.episodes, 0u);
  }
  for (const auto& e : rep.episodes) EXPECT_LE(e.steps, 2 * e.n_objects);
  // The expert is a lower bound on mean cost over tasks both solved.
  double expert = 0, other = 0;
  for (Policy p : {Policy::ours, Policy::gnn, Policy::model, Policy::plan})
    for (const auto& e : rep.episodes) {
      if (e.policy != p || !e.success) continue;
      other += e.cost;
      for (const auto& x : rep.episodes)
        if (x.policy == Policy::expert && x.task == e.task && x.seed == e.seed) expert += x.cost;
    }
  EXPECT_LE(expert, other);
  const std::string csv = eval::metrics_csv(rep.rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "policy,env,n_objects,episodes,success_rate,mean_cost,mean_steps");
}

TEST(Evaluate, DeterministicAcrossThreadCounts) {
  const auto s = suite(12, 7);
  const auto ours = random_agent(false);
  eval::RolloutOptions noisy;
  noisy.jitter = true;
  noisy.perception.descriptor_noise = 0.05;
  setenv("HETPLAN_THREADS", "1", 1);
  const auto a = eval::evaluate(s, {Policy::ours, Policy::model}, {3}, {&ours, nullptr}, noisy);
  setenv("HETPLAN_THREADS", "4", 1);
  const auto b = eval::evaluate(s, {Policy::ours, Policy::model}, {3}, {&ours, nullptr}, noisy);
  unsetenv("HETPLAN_THREADS");
  EXPECT_EQ(eval::metrics_csv(a.rows), eval::metrics_csv(b.rows));
}

TEST(Evaluate, MeanCostCountsSuccessesOnly) {
  std::vector<eval::EpisodeResult> eps = {{Policy::model, 0, 1, "tabletop", 3, true, 4, 2, eval::FailureKind::none},
                                          {Policy::model, 1, 1, "tabletop", 3, false, 9, 6, eval::FailureKind::timeout},
                                          {Policy::model, 2, 1, "shelf", 4, true, 6, 3, eval::FailureKind::none}};
  const auto rows = eval::aggregate(eps, {Policy::model});
  ASSERT_EQ(rows.size(), 3u);
  const auto& all = rows.back();
  EXPECT_EQ(all.env, "all");
  EXPECT_EQ(all.episodes, 3u);
  EXPECT_DOUBLE_EQ(all.success_rate, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(all.mean_cost, 5.0);
  EXPECT_DOUBLE_EQ(all.mean_steps, 11.0 / 3.0);
  EXPECT_THROW(eval::evaluate({}, {Policy::model}, {1}), DomainError);
}
