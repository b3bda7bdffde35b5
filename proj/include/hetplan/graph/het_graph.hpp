#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/perception/matching.hpp"

namespace hetplan::graph {

enum class NodeType { current, goal, constraint };

/// Directed relation types. Self loops are not edges; the attention layer
/// adds them implicitly.
enum class EdgeType { cur_cur, goal_goal, cur_goal, goal_cur, con_cur, con_goal };
inline constexpr std::size_t kEdgeTypeCount = 6;

inline constexpr std::array<EdgeType, kEdgeTypeCount> kEdgeTypes = {
    EdgeType::cur_cur, EdgeType::goal_goal, EdgeType::cur_goal,
    EdgeType::goal_cur, EdgeType::con_cur, EdgeType::con_goal};

inline const char* to_string(NodeType t) {
  switch (t) {
    case NodeType::current: return "CURRENT";
    case NodeType::goal: return "GOAL";
    case NodeType::constraint: return "CONSTRAINT";
  }
  return "?";
}

inline const char* to_string(EdgeType t) {
  switch (t) {
    case EdgeType::cur_cur: return "CUR-CUR";
    case EdgeType::goal_goal: return "GOAL-GOAL";
    case EdgeType::cur_goal: return "CUR->GOAL";
    case EdgeType::goal_cur: return "GOAL->CUR";
    case EdgeType::con_cur: return "CON->CUR";
    case EdgeType::con_goal: return "CON->GOAL";
  }
  return "?";
}

inline NodeType node_type_from_string(const std::string& s) {
  for (NodeType t : {NodeType::current, NodeType::goal, NodeType::constraint})
    if (s == to_string(t)) return t;
  throw FormatError("unknown node type '" + s + "'");
}

inline EdgeType edge_type_from_string(const std::string& s) {
  for (EdgeType t : kEdgeTypes)
    if (s == to_string(t)) return t;
  throw FormatError("unknown edge type '" + s + "'");
}

/// Endpoint node types each relation expects (source, destination).
inline std::pair<NodeType, NodeType> endpoint_types(EdgeType t) {
  switch (t) {
    case EdgeType::cur_cur: return {NodeType::current, NodeType::current};
    case EdgeType::goal_goal: return {NodeType::goal, NodeType::goal};
    case EdgeType::cur_goal: return {NodeType::current, NodeType::goal};
    case EdgeType::goal_cur: return {NodeType::goal, NodeType::current};
    case EdgeType::con_cur: return {NodeType::constraint, NodeType::current};
    case EdgeType::con_goal: return {NodeType::constraint, NodeType::goal};
  }
  return {NodeType::current, NodeType::current};
}

struct Edge {
  int src = 0;
  int dst = 0;
  EdgeType type = EdgeType::cur_cur;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Nodes are laid out as [current 0..N-1 | goal N..2N-1 | constraints].
/// Edges are sorted by (type, dst, src).
struct HetTaskGraph {
  std::vector<NodeType> types;
  std::vector<std::vector<double>> features;
  std::vector<std::string> handles;
  std::vector<Edge> edges;

  std::size_t num_nodes() const { return types.size(); }
  std::size_t num_objects() const {
    return static_cast<std::size_t>(std::count(types.begin(), types.end(), NodeType::current));
  }
  std::size_t count(EdgeType t) const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [t](const Edge& e) { return e.type == t; }));
  }
  std::vector<int> nodes_of(NodeType t) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < types.size(); ++i)
      if (types[i] == t) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline void sort_edges(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tuple(static_cast<int>(a.type), a.dst, a.src) < std::tuple(static_cast<int>(b.type), b.dst, b.src);
  });
}

/// Complete current and goal subgraphs, CUR->GOAL plus GOAL->CUR per
/// correspondence pair, and every constraint feeding every object node.
inline HetTaskGraph build_graph(const std::vector<std::vector<double>>& current,
                                const std::vector<std::vector<double>>& goal,
                                const std::vector<std::vector<double>>& constraints,
                                const perception::Correspondence& corr) {
  const std::size_t n = current.size();
  if (n == 0) throw DomainError("task graph needs at least one object");
  if (goal.size() != n) throw DomainError("current and goal node counts differ");
  if (corr.size() != n || !corr.is_bijection()) throw DomainError("correspondence is not a bijection over the objects");
  HetTaskGraph g;
  const int N = static_cast<int>(n);
  const int C = static_cast<int>(constraints.size());
  for (const auto& f : current) g.types.push_back(NodeType::current), g.features.push_back(f);
  for (const auto& f : goal) g.types.push_back(NodeType::goal), g.features.push_back(f);
  for (const auto& f : constraints) g.types.push_back(NodeType::constraint), g.features.push_back(f);
  g.handles.assign(g.types.size(), "");
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      g.edges.push_back({j, i, EdgeType::cur_cur});
      g.edges.push_back({N + j, N + i, EdgeType::goal_goal});
    }
  for (int gi = 0; gi < N; ++gi) {
    const int c = corr.goal_to_current[static_cast<std::size_t>(gi)];
    g.edges.push_back({c, N + gi, EdgeType::cur_goal});
    g.edges.push_back({N + gi, c, EdgeType::goal_cur});
  }
  for (int k = 0; k < C; ++k)
    for (int i = 0; i < N; ++i) {
      g.edges.push_back({2 * N + k, i, EdgeType::con_cur});
      g.edges.push_back({2 * N + k, N + i, EdgeType::con_goal});
    }
  sort_edges(g.edges);
  return g;
}

/// Throws DomainError when an edge's endpoints disagree with its type.
inline void validate_graph(const HetTaskGraph& g) {
  if (g.features.size() != g.types.size()) throw DomainError("graph feature table does not match node count");
  for (const Edge& e : g.edges) {
    if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= g.num_nodes() ||
        static_cast<std::size_t>(e.dst) >= g.num_nodes())
      throw DomainError("edge endpoint out of range");
    const auto [s, d] = endpoint_types(e.type);
    if (g.types[static_cast<std::size_t>(e.src)] != s || g.types[static_cast<std::size_t>(e.dst)] != d)
      throw DomainError(std::string("edge of type ") + to_string(e.type) + " joins " +
                        to_string(g.types[static_cast<std::size_t>(e.src)]) + " to " +
                        to_string(g.types[static_cast<std::size_t>(e.dst)]));
  }
}

/// Node table plus typed edges; features are written only when present.
inline nlohmann::json to_json(const HetTaskGraph& g, bool with_features = true) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    nlohmann::json n = {{"type", to_string(g.types[i])}, {"handle", g.handles[i]}};
    if (with_features && !g.features[i].empty()) n["embedding"] = g.features[i];
    nodes.push_back(std::move(n));
  }
  for (const Edge& e : g.edges) edges.push_back({e.src, e.dst, to_string(e.type)});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline HetTaskGraph graph_from_json(const nlohmann::json& j) {
  try {
    HetTaskGraph g;
    for (const auto& n : j.at("nodes")) {
      g.types.push_back(node_type_from_string(n.at("type").get<std::string>()));
      g.handles.push_back(n.value("handle", std::string()));
      g.features.push_back(n.value("embedding", std::vector<double>{}));
    }
    for (const auto& e : j.at("edges"))
      g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), edge_type_from_string(e.at(2).get<std::string>())});
    validate_graph(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("graph: ") + e.what());
  }
}

}  // namespace hetplan::graph
