#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hetplan/core/parallel.hpp"
#include "hetplan/data/dataset.hpp"
#include "hetplan/eval/rollout.hpp"

namespace hetplan::eval {

struct SuiteTask {
  sim::SceneState scene;  // current = start, goals = goal
  std::string env;
  int expert_cost = 0;
};

inline std::vector<SuiteTask> suite_from_records(const std::vector<data::TaskRecord>& records) {
  std::vector<SuiteTask> out;
  for (const auto& r : records) out.push_back({r.scene, r.meta.env, r.expert_cost});
  return out;
}

inline std::vector<SuiteTask> load_suite(const std::string& path) { return suite_from_records(data::read_dataset(path)); }

struct EpisodeResult {
  Policy policy = Policy::ours;
  std::size_t task = 0;
  std::uint64_t seed = 0;
  std::string env;
  std::size_t n_objects = 0;
  bool success = false;
  int cost = 0;
  std::size_t steps = 0;
  FailureKind failure = FailureKind::none;
};

struct MetricsRow {
  std::string policy, env, n_objects;
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double mean_cost = 0.0;  // over successful episodes; NaN when none succeeded
  double mean_steps = 0.0;
};

struct EvalReport {
  std::vector<EpisodeResult> episodes;
  std::vector<MetricsRow> rows;

  /// The row aggregating every env and object count for one policy.
  const MetricsRow& overall(Policy p) const {
    for (const auto& r : rows)
      if (r.policy == to_string(p) && r.env == "all" && r.n_objects == "all") return r;
    throw DomainError(std::string("no results for policy '") + to_string(p) + "'");
  }
};

/// Episode seed for (run seed, task, policy); policies share noise draws
/// only through the task index.
inline std::uint64_t episode_seed(std::uint64_t seed, std::size_t task) { return mix_seed(seed, task); }

inline std::vector<MetricsRow> aggregate(const std::vector<EpisodeResult>& eps, const std::vector<Policy>& policies) {
  struct Acc {
    std::size_t n = 0, ok = 0;
    double cost = 0, steps = 0;
  };
  std::vector<MetricsRow> rows;
  for (Policy p : policies) {
    std::map<std::tuple<std::string, std::size_t>, Acc> groups;
    Acc all;
    for (const auto& e : eps) {
      if (e.policy != p) continue;
      for (Acc* a : {&groups[{e.env, e.n_objects}], &all}) {
        ++a->n;
        a->steps += static_cast<double>(e.steps);
        if (e.success) ++a->ok, a->cost += e.cost;
      }
    }
    const auto row = [&](const std::string& env, const std::string& n, const Acc& a) {
      return MetricsRow{to_string(p),
                        env,
                        n,
                        a.n,
                        a.n ? static_cast<double>(a.ok) / static_cast<double>(a.n) : 0.0,
                        a.ok ? a.cost / static_cast<double>(a.ok) : std::nan(""),
                        a.n ? a.steps / static_cast<double>(a.n) : 0.0};
    };
    for (const auto& [key, a] : groups) rows.push_back(row(std::get<0>(key), std::to_string(std::get<1>(key)), a));
    rows.push_back(row("all", "all", all));
  }
  return rows;
}

/// Every policy on every task for every seed. Episodes run in parallel;
/// results land in fixed slots so the report does not depend on threads.
inline EvalReport evaluate(const std::vector<SuiteTask>& suite, const std::vector<Policy>& policies,
                           const std::vector<std::uint64_t>& seeds, const Agents& agents = {},
                           RolloutOptions base = {}) {
  if (suite.empty()) throw DomainError("evaluation suite is empty");
  if (policies.empty() || seeds.empty()) throw DomainError("evaluation needs at least one policy and one seed");
  for (Policy p : policies) {
    if (p == Policy::ours && !agents.ours) throw DomainError("policy 'ours' needs --model");
    if (p == Policy::gnn && !agents.gnn) throw DomainError("policy 'gnn' needs a tied model");
  }
  EvalReport rep;
  rep.episodes.resize(policies.size() * seeds.size() * suite.size());
  parallel_for(rep.episodes.size(), [&](std::size_t k) {
    const std::size_t t = k % suite.size();
    const std::size_t s = (k / suite.size()) % seeds.size();
    const Policy p = policies[k / (suite.size() * seeds.size())];
    RolloutOptions opt = base;
    opt.seed = episode_seed(seeds[s], t);
    const TaskEpisode ep = rollout(suite[t].scene, p, agents, opt);
    rep.episodes[k] = {p, t, seeds[s], suite[t].env, suite[t].scene.size(), ep.success, ep.total_cost, ep.steps,
                       ep.failure_kind};
  });
  rep.rows = aggregate(rep.episodes, policies);
  return rep;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "policy,env,n_objects,episodes,success_rate,mean_cost,mean_steps\n";
  for (const auto& r : rows)
    os << r.policy << ',' << r.env << ',' << r.n_objects << ',' << r.episodes << ',' << format_double(r.success_rate)
       << ',' << format_double(r.mean_cost) << ',' << format_double(r.mean_steps) << '\n';
  return os.str();
}

/// Mean expert cost over the tasks a policy solved, for cost ratios on a
/// matched subset.
inline double matched_expert_cost(const EvalReport& rep, const std::vector<SuiteTask>& suite, Policy p) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& e : rep.episodes)
    if (e.policy == p && e.success) sum += suite[e.task].expert_cost, ++n;
  return n ? sum / static_cast<double>(n) : std::nan("");
}

}  // namespace hetplan::eval
