#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "hetplan/core/rng.hpp"
#include "hetplan/graph/het_graph.hpp"

using namespace hetplan;
using namespace hetplan::graph;

namespace {

std::vector<std::vector<double>> feats(std::size_t n, double base) {
  std::vector<std::vector<double>> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = {base + static_cast<double>(i)};
  return f;
}

perception::Correspondence identity(std::size_t n) {
  perception::Correspondence c;
  for (std::size_t i = 0; i < n; ++i) c.goal_to_current.push_back(static_cast<int>(i));
  return c;
}

/// Counts by testing every ordered node pair against the connection rules.
std::map<EdgeType, std::size_t> enumerate(const HetTaskGraph& g, const perception::Correspondence& corr) {
  std::map<EdgeType, std::size_t> out;
  const int N = static_cast<int>(corr.size());
  for (std::size_t s = 0; s < g.num_nodes(); ++s)
    for (std::size_t d = 0; d < g.num_nodes(); ++d) {
      if (s == d) continue;
      const NodeType ts = g.types[s], td = g.types[d];
      if (ts == NodeType::current && td == NodeType::current) ++out[EdgeType::cur_cur];
      if (ts == NodeType::goal && td == NodeType::goal) ++out[EdgeType::goal_goal];
      if (ts == NodeType::current && td == NodeType::goal &&
          corr.goal_to_current[d - static_cast<std::size_t>(N)] == static_cast<int>(s))
        ++out[EdgeType::cur_goal];
      if (ts == NodeType::goal && td == NodeType::current &&
          corr.goal_to_current[s - static_cast<std::size_t>(N)] == static_cast<int>(d))
        ++out[EdgeType::goal_cur];
      if (ts == NodeType::constraint && td == NodeType::current) ++out[EdgeType::con_cur];
      if (ts == NodeType::constraint && td == NodeType::goal) ++out[EdgeType::con_goal];
    }
  return out;
}

}  // namespace

TEST(BuildGraph, TwoObjectsOneConstraint) {
  const auto g = build_graph(feats(2, 0), feats(2, 10), feats(1, 20), identity(2));
  EXPECT_EQ(g.num_nodes(), 5u);
  EXPECT_EQ(g.count(EdgeType::cur_cur), 2u);
  EXPECT_EQ(g.count(EdgeType::goal_goal), 2u);
  EXPECT_EQ(g.count(EdgeType::cur_goal) + g.count(EdgeType::goal_cur), 4u);
  EXPECT_EQ(g.count(EdgeType::con_cur) + g.count(EdgeType::con_goal), 4u);
}

TEST(BuildGraph, SingleObject) {
  const auto g = build_graph(feats(1, 0), feats(1, 10), {}, identity(1));
  EXPECT_EQ(g.num_nodes(), 2u);
  EXPECT_EQ(g.count(EdgeType::cur_cur), 0u);
  EXPECT_EQ(g.count(EdgeType::goal_goal), 0u);
  EXPECT_EQ(g.count(EdgeType::cur_goal), 1u);
  EXPECT_EQ(g.count(EdgeType::goal_cur), 1u);
  EXPECT_EQ(g.edges.size(), 2u);
}

TEST(BuildGraph, CountsMatchEnumeration) {
  Rng rng(3);
  for (std::size_t n = 1; n <= 7; ++n)
    for (std::size_t c = 0; c <= 3; ++c) {
      auto corr = identity(n);
      rng.shuffle(corr.goal_to_current);
      const auto g = build_graph(feats(n, 0), feats(n, 10), feats(c, 20), corr);
      EXPECT_EQ(g.num_nodes(), 2 * n + c);
      const auto oracle = enumerate(g, corr);
      for (EdgeType t : kEdgeTypes) {
        const auto it = oracle.find(t);
        EXPECT_EQ(g.count(t), it == oracle.end() ? 0u : it->second) << to_string(t) << " n=" << n << " c=" << c;
      }
      EXPECT_EQ(g.count(EdgeType::cur_cur), n * (n - 1));
      EXPECT_EQ(g.count(EdgeType::cur_goal), n);
      EXPECT_EQ(g.count(EdgeType::con_cur) + g.count(EdgeType::con_goal), c * 2 * n);
      EXPECT_NO_THROW(validate_graph(g));
    }
}

TEST(BuildGraph, PermutationGivesIsomorphicGraph) {
  const std::size_t n = 4;
  auto cur = feats(n, 0), goal = feats(n, 10);
  const auto g1 = build_graph(cur, goal, feats(2, 20), identity(n));
  // Reverse the current list and fix up the correspondence accordingly.
  std::reverse(cur.begin(), cur.end());
  perception::Correspondence corr;
  for (std::size_t i = 0; i < n; ++i) corr.goal_to_current.push_back(static_cast<int>(n - 1 - i));
  const auto g2 = build_graph(cur, goal, feats(2, 20), corr);
  auto typed = [](const HetTaskGraph& g) {
    std::multiset<std::tuple<int, double, double>> s;
    for (const auto& e : g.edges)
      s.insert({static_cast<int>(e.type), g.features[static_cast<std::size_t>(e.src)][0],
                g.features[static_cast<std::size_t>(e.dst)][0]});
    return s;
  };
  EXPECT_EQ(typed(g1), typed(g2));
}

TEST(BuildGraph, Rejects) {
  perception::Correspondence bad{{0, 0}};
  EXPECT_THROW(build_graph(feats(2, 0), feats(2, 10), {}, bad), DomainError);
  EXPECT_THROW(build_graph(feats(2, 0), feats(1, 10), {}, identity(2)), DomainError);
  EXPECT_THROW(build_graph({}, {}, {}, identity(0)), DomainError);
}

TEST(BuildGraph, EdgesCanonicalAndTyped) {
  const auto g = build_graph(feats(3, 0), feats(3, 10), feats(1, 20), identity(3));
  auto sorted = g.edges;
  sort_edges(sorted);
  EXPECT_EQ(sorted, g.edges);
  auto broken = g;
  broken.edges[0].type = EdgeType::con_goal;
  EXPECT_THROW(validate_graph(broken), DomainError);
}

TEST(GraphJson, RoundTrip) {
  auto g = build_graph(feats(3, 0), feats(3, 10), feats(2, 20), identity(3));
  g.handles[0] = "o0";
  const auto j = to_json(g);
  const auto back = graph_from_json(j);
  EXPECT_EQ(back.types, g.types);
  EXPECT_EQ(back.edges, g.edges);
  EXPECT_EQ(back.features, g.features);
  EXPECT_EQ(back.handles, g.handles);
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"nodes":[{"type":"X"}],"edges":[]})")), FormatError);
}
