#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/graph/het_graph.hpp"
#include "hetplan/nn/checkpoint.hpp"
#include "hetplan/nn/tape.hpp"
#include "hetplan/perception/encoder.hpp"
#include "hetplan/perception/features.hpp"
#include "hetplan/sim/types.hpp"

namespace hetplan::coord {

/// Relation 0 is the implicit self loop, 1..6 follow graph::kEdgeTypes.
inline constexpr std::size_t kRelationCount = graph::kEdgeTypeCount + 1;

inline std::size_t relation_of(graph::EdgeType t) { return static_cast<std::size_t>(t) + 1; }

inline std::string relation_name(std::size_t r) {
  static const char* names[] = {"self", "cur_cur", "goal_goal", "cur_goal", "goal_cur", "con_cur", "con_goal"};
  return names[r];
}

struct CoordinatorConfig {
  std::size_t input_dim = perception::kEmbeddingDim;
  std::size_t hidden = 32;
  std::size_t layers = 3;
  bool tied = false;  // one parameter set per layer shared by all relations
  std::vector<double> input_mean;
  std::vector<double> input_scale;

  void fill_defaults() {
    if (input_mean.empty()) input_mean.assign(input_dim, 0.0);
    if (input_scale.empty()) input_scale.assign(input_dim, 1.0);
  }

  nlohmann::json to_json() const {
    return {{"input_dim", input_dim}, {"hidden", hidden},         {"layers", layers},
            {"tied", tied},           {"input_mean", input_mean}, {"input_scale", input_scale}};
  }

  static CoordinatorConfig from_json(const nlohmann::json& j) {
    CoordinatorConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.tied = j.at("tied").get<bool>();
    c.input_mean = j.at("input_mean").get<std::vector<double>>();
    c.input_scale = j.at("input_scale").get<std::vector<double>>();
    return c;
  }
};

/// Theta maps features into the message space; a_dst and a_src score the
/// receiving and sending node for attention.
struct RelationParams {
  nn::ParamTensor theta, a_dst, a_src;
};

struct HeadParams {
  nn::ParamTensor w1, b1, w2, b2;
};

/// Per-layer bound variables for one tape.
struct BoundRelation {
  nn::Var theta, a_dst, a_src;
};

/// Attention weights of one layer: alpha[k] belongs to the k-th entry of
/// (graph edges in order, then one self loop per node), normalized over
/// entries with equal dst.
struct LayerAttention {
  nn::Var alpha;
  std::vector<std::size_t> dst;
};

struct ForwardResult {
  nn::Var p_object;  // [N x 1]
  nn::Var p_action;  // [N x 1]
  std::vector<LayerAttention> attention;
};

struct Decision {
  std::vector<double> p_object;
  std::vector<double> p_action;
  std::size_t target = 0;
  sim::PrimitiveKind action = sim::PrimitiveKind::push;
};

inline constexpr double kPushThreshold = 0.5;

/// Heterogeneous graph attention layer on a tape. For node i:
///   x'_i = sum over r, j in N_r(i) of alpha_ij Theta_r x_j + alpha_ii Theta_self x_i
///   e_ij = LeakyReLU(a_dst_r . Theta_r x_i + a_src_r . Theta_r x_j)
/// with alpha the softmax of e over all incoming entries of i.
inline nn::Var het_layer(nn::Tape& t, nn::Var x, const graph::HetTaskGraph& g,
                         const std::vector<BoundRelation>& rel, LayerAttention* attention = nullptr) {
  const std::size_t n = t.shape(x)[0];
  if (n != g.num_nodes()) throw ShapeError("feature rows do not match graph nodes");
  for (const auto& e : g.edges)
    if (static_cast<std::size_t>(e.type) >= graph::kEdgeTypeCount) throw DomainError("unknown edge type in graph");
  const auto rel_at = [&](std::size_t r) -> const BoundRelation& { return rel[rel.size() == 1 ? 0 : r]; };
  std::vector<nn::Var> projected(kRelationCount), score_dst(kRelationCount), score_src(kRelationCount);
  std::vector<char> used(kRelationCount, 0);
  used[0] = 1;
  for (const auto& e : g.edges) used[relation_of(e.type)] = 1;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    if (!used[r]) continue;
    const auto& b = rel_at(r);
    if (rel.size() == 1 && r > 0) {
      projected[r] = projected[0], score_dst[r] = score_dst[0], score_src[r] = score_src[0];
      continue;
    }
    projected[r] = t.matmul_nt(x, b.theta);
    score_dst[r] = t.matmul_nt(projected[r], b.a_dst);
    score_src[r] = t.matmul_nt(projected[r], b.a_src);
  }
  // Group edges by relation; graph edges are already sorted by type.
  std::vector<nn::Var> logits, messages;
  std::vector<std::size_t> dst_all;
  std::size_t k = 0;
  while (k < g.edges.size()) {
    const graph::EdgeType type = g.edges[k].type;
    std::vector<std::size_t> src, dst;
    for (; k < g.edges.size() && g.edges[k].type == type; ++k) {
      src.push_back(static_cast<std::size_t>(g.edges[k].src));
      dst.push_back(static_cast<std::size_t>(g.edges[k].dst));
    }
    const std::size_t r = relation_of(type);
    logits.push_back(t.add(t.gather_rows(score_dst[r], dst), t.gather_rows(score_src[r], src)));
    messages.push_back(t.gather_rows(projected[r], src));
    dst_all.insert(dst_all.end(), dst.begin(), dst.end());
  }
  logits.push_back(t.add(score_dst[0], score_src[0]));
  messages.push_back(projected[0]);
  for (std::size_t i = 0; i < n; ++i) dst_all.push_back(i);

  nn::Var e = t.leaky_relu(t.concat_rows(logits));
  nn::Var alpha = t.segment_softmax(t.reshape(e, {dst_all.size()}), dst_all, n);
  if (attention) *attention = {alpha, dst_all};
  nn::Var weighted = t.scale_rows(t.concat_rows(messages), alpha);
  return t.scatter_add_rows(weighted, dst_all, n);
}

class CoordinatorModel {
 public:
  explicit CoordinatorModel(CoordinatorConfig cfg = {}, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.fill_defaults();
    if (cfg_.layers == 0 || cfg_.hidden == 0) throw DomainError("coordinator needs layers and hidden units");
    if (cfg_.input_mean.size() != cfg_.input_dim || cfg_.input_scale.size() != cfg_.input_dim)
      throw DomainError("input normalization length does not match input_dim");
    Rng rng(mix_seed(seed, 0xc0de));
    const std::size_t sets = cfg_.tied ? 1 : kRelationCount;
    layers_.resize(cfg_.layers);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::size_t in = l == 0 ? cfg_.input_dim : cfg_.hidden;
      for (std::size_t r = 0; r < sets; ++r) {
        const std::string base = "coord.l" + std::to_string(l) + "." + (cfg_.tied ? "shared" : relation_name(r));
        RelationParams p{{base + ".theta", {cfg_.hidden, in}}, {base + ".a_dst", {1, cfg_.hidden}},
                         {base + ".a_src", {1, cfg_.hidden}}};
        p.theta.init_glorot(rng, in, cfg_.hidden);
        p.a_dst.init_glorot(rng, cfg_.hidden, 1);
        p.a_src.init_glorot(rng, cfg_.hidden, 1);
        layers_[l].push_back(std::move(p));
      }
    }
    for (auto* h : {&head_object_, &head_action_}) {
      const std::string base = h == &head_object_ ? "head.object" : "head.action";
      *h = {{base + ".w1", {cfg_.hidden, cfg_.hidden}}, {base + ".b1", {cfg_.hidden}},
            {base + ".w2", {1, cfg_.hidden}}, {base + ".b2", {1}}};
      h->w1.init_glorot(rng, cfg_.hidden, cfg_.hidden);
      h->w2.init_glorot(rng, cfg_.hidden, 1);
    }
  }

  const CoordinatorConfig& config() const { return cfg_; }
  CoordinatorConfig& mutable_config() { return cfg_; }
  std::vector<RelationParams>& layer(std::size_t l) { return layers_.at(l); }
  const std::vector<RelationParams>& layer(std::size_t l) const { return layers_.at(l); }
  HeadParams& head_object() { return head_object_; }
  HeadParams& head_action() { return head_action_; }

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  void allow_random_weights() { random_ok_ = true; }

  std::vector<nn::ParamTensor*> params() {
    std::vector<nn::ParamTensor*> out;
    for (auto& l : layers_)
      for (auto& r : l) out.insert(out.end(), {&r.theta, &r.a_dst, &r.a_src});
    for (auto* h : {&head_object_, &head_action_}) out.insert(out.end(), {&h->w1, &h->b1, &h->w2, &h->b2});
    return out;
  }

  std::vector<nn::ParamTensor*> action_head_params() {
    return {&head_action_.w1, &head_action_.b1, &head_action_.w2, &head_action_.b2};
  }

  /// Normalized node features as a tape constant.
  nn::Var input(nn::Tape& t, const graph::HetTaskGraph& g) const {
    std::vector<double> x;
    x.reserve(g.num_nodes() * cfg_.input_dim);
    for (const auto& f : g.features) {
      if (f.size() != cfg_.input_dim)
        throw ShapeError("node feature has " + std::to_string(f.size()) + " entries, model expects " +
                         std::to_string(cfg_.input_dim));
      for (std::size_t d = 0; d < f.size(); ++d) x.push_back((f[d] - cfg_.input_mean[d]) * cfg_.input_scale[d]);
    }
    return t.constant({g.num_nodes(), cfg_.input_dim}, std::move(x));
  }

  /// Three attention layers (ELU between them), then both heads on the
  /// current nodes, with trainable parameters.
  ForwardResult forward(nn::Tape& t, const graph::HetTaskGraph& g) {
    return run_impl(*this, t, g, [&](nn::ParamTensor& p) { return t.param(p); });
  }

  /// Same network with the weights entered as constants.
  ForwardResult infer(nn::Tape& t, const graph::HetTaskGraph& g) const {
    return run_impl(*this, t, g, [&](const nn::ParamTensor& p) { return t.constant(p.shape, p.values); });
  }

  /// Scores without building gradients. `eligible` masks the argmax
  /// (empty = all objects eligible).
  Decision predict(const graph::HetTaskGraph& g, const std::vector<char>& eligible = {}) const {
    if (!trained_ && !random_ok_)
      throw DomainError("coordinator is untrained; train it or allow random weights explicitly");
    nn::Tape t;
    auto r = infer(t, g);
    Decision d;
    d.p_object = t.value(r.p_object);
    d.p_action = t.value(r.p_action);
    bool found = false;
    for (std::size_t i = 0; i < d.p_object.size(); ++i) {
      if (!eligible.empty() && !eligible[i]) continue;
      if (!found || d.p_object[i] > d.p_object[d.target]) d.target = i, found = true;
    }
    d.action = d.p_action[d.target] > kPushThreshold ? sim::PrimitiveKind::push : sim::PrimitiveKind::pick_place;
    return d;
  }

 private:
  template <class Self, class Bind>
  static ForwardResult run_impl(Self& self, nn::Tape& t, const graph::HetTaskGraph& g, Bind bind) {
    if (g.num_objects() == 0) throw DomainError("graph has no current nodes");
    ForwardResult out;
    nn::Var h = self.input(t, g);
    for (std::size_t l = 0; l < self.layers_.size(); ++l) {
      std::vector<BoundRelation> rel;
      for (auto& p : self.layers_[l]) rel.push_back({bind(p.theta), bind(p.a_dst), bind(p.a_src)});
      LayerAttention att;
      h = het_layer(t, h, g, rel, &att);
      out.attention.push_back(std::move(att));
      if (l + 1 < self.layers_.size()) h = t.elu(h);
    }
    std::vector<std::size_t> cur;
    for (int i : g.nodes_of(graph::NodeType::current)) cur.push_back(static_cast<std::size_t>(i));
    nn::Var hc = t.gather_rows(h, cur);
    const auto head = [&](auto& p) {
      nn::Var z = t.elu(t.dense(hc, bind(p.w1), bind(p.b1)));
      return t.sigmoid(t.dense(z, bind(p.w2), bind(p.b2)));
    };
    out.p_object = head(self.head_object_);
    out.p_action = head(self.head_action_);
    return out;
  }

  CoordinatorConfig cfg_;
  std::vector<std::vector<RelationParams>> layers_;
  HeadParams head_object_, head_action_;
  bool trained_ = false;
  bool random_ok_ = false;
};

/// The coordinator and the frozen shape encoder it was trained with.
struct CoordinatorBundle {
  CoordinatorModel model;
  perception::ShapeEncoder encoder;
  nlohmann::json training = nlohmann::json::object();
};

inline nn::Checkpoint make_checkpoint(CoordinatorBundle& b) {
  nn::Checkpoint ck;
  ck.header["kind"] = "coordinator";
  ck.header["coordinator"] = b.model.config().to_json();
  ck.header["coordinator"]["trained"] = b.model.trained();
  nlohmann::json types = nlohmann::json::array();
  for (auto t : graph::kEdgeTypes) types.push_back(graph::to_string(t));
  ck.header["edge_types"] = types;
  ck.header["training"] = b.training;
  for (auto* p : b.model.params()) ck.tensors.push_back(*p);
  b.encoder.store(ck);
  return ck;
}

inline CoordinatorBundle bundle_from_checkpoint(const nn::Checkpoint& ck) {
  if (ck.header.value("kind", std::string()) != "coordinator") throw FormatError("checkpoint is not a coordinator model");
  nlohmann::json types = nlohmann::json::array();
  for (auto t : graph::kEdgeTypes) types.push_back(graph::to_string(t));
  if (ck.header.at("edge_types") != types) throw FormatError("checkpoint edge types do not match this build");
  CoordinatorBundle b{CoordinatorModel(CoordinatorConfig::from_json(ck.header.at("coordinator"))),
                      perception::ShapeEncoder::restore(ck), ck.header.value("training", nlohmann::json::object())};
  nn::assign_params(ck, b.model.params());
  if (ck.header["coordinator"].value("trained", false)) b.model.mark_trained();
  return b;
}

inline void save_bundle(const std::string& path, CoordinatorBundle& b) { nn::save_checkpoint(path, make_checkpoint(b)); }

inline CoordinatorBundle load_bundle(const std::string& path) { return bundle_from_checkpoint(nn::load_checkpoint(path)); }

/// Attention over one neighborhood with plain arithmetic: softmax of
/// LeakyReLU(a_dst . Theta x_i + a_src . Theta x_j) over the given
/// neighbors followed by the self term. Theta is [h x d] row-major.
inline std::vector<double> gat_attention(const std::vector<double>& xi, const std::vector<std::vector<double>>& neighbors,
                                         const std::vector<double>& theta, const std::vector<double>& a_dst,
                                         const std::vector<double>& a_src) {
  const std::size_t h = a_dst.size(), d = xi.size();
  const auto project = [&](const std::vector<double>& x) {
    std::vector<double> y(h, 0.0);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < d; ++c) y[r] += theta[r * d + c] * x[c];
    return y;
  };
  const auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < h; ++k) s += a[k] * b[k];
    return s;
  };
  const std::vector<double> pi = project(xi);
  const double si = dot(a_dst, pi);
  std::vector<double> e;
  for (const auto& xj : neighbors) e.push_back(si + dot(a_src, project(xj)));
  e.push_back(si + dot(a_src, pi));
  for (double& v : e) v = v > 0 ? v : nn::kLeakySlope * v;
  const double m = *std::max_element(e.begin(), e.end());
  double z = 0;
  for (double& v : e) z += (v = std::exp(v - m));
  for (double& v : e) v /= z;
  return e;
}

}  // namespace hetplan::coord
