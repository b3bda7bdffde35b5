#pragma once

// Plain-loop reference for the coordinator forward pass, plus random
// graphs and models to feed it.

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "hetplan/coord/model.hpp"
#include "support/gradcheck.hpp"

namespace hetplan::testing {

using coord::CoordinatorConfig;
using coord::CoordinatorModel;
using coord::HeadParams;
using coord::RelationParams;
using coord::relation_of;
using graph::HetTaskGraph;
using graph::NodeType;


using Mat = std::vector<std::vector<double>>;

inline HetTaskGraph random_graph(std::size_t n, std::size_t c, std::uint64_t seed, std::size_t dim = 15) {
  Rng rng(seed);
  auto feats = [&](std::size_t k) {
    Mat f(k);
    for (auto& v : f) v = random_values(rng, dim, -2.0, 2.0);
    return f;
  };
  perception::Correspondence corr;
  corr.goal_to_current.resize(n);
  std::iota(corr.goal_to_current.begin(), corr.goal_to_current.end(), 0);
  rng.shuffle(corr.goal_to_current);
  return graph::build_graph(feats(n), feats(n), feats(c), corr);
}

inline CoordinatorModel random_model(bool tied, std::uint64_t seed, std::size_t hidden = 32, std::size_t layers = 3) {
  CoordinatorConfig cfg;
  cfg.hidden = hidden;
  cfg.layers = layers;
  cfg.tied = tied;
  Rng rng(seed ^ 0x77);
  cfg.input_mean = random_values(rng, cfg.input_dim, -0.5, 0.5);
  cfg.input_scale = random_values(rng, cfg.input_dim, 0.5, 1.5);
  CoordinatorModel m(cfg, seed);
  m.allow_random_weights();
  return m;
}

inline std::vector<double> matvec(const nn::ParamTensor& w, const std::vector<double>& x) {
  const std::size_t rows = w.shape[0], cols = w.shape[1];
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r] += w.values[r * cols + c] * x[c];
  return y;
}

inline double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double elu(double v) { return v > 0 ? v : std::expm1(v); }

/// Plain-loop attention network. With `homogeneous` every neighbor (of any
/// type) and the self loop use parameter set 0, i.e. an ordinary single-type
/// GAT on the same connectivity.
inline std::pair<std::vector<double>, std::vector<double>> reference_forward(CoordinatorModel& m, const HetTaskGraph& g,
                                                                      bool homogeneous) {
  const auto& cfg = m.config();
  Mat h(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    for (std::size_t d = 0; d < cfg.input_dim; ++d)
      h[i].push_back((g.features[i][d] - cfg.input_mean[d]) * cfg.input_scale[d]);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& sets = m.layer(l);
    const auto pick = [&](std::size_t r) -> const RelationParams& { return sets[homogeneous ? 0 : r]; };
    Mat next(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      std::vector<std::pair<std::size_t, std::size_t>> in;  // (src, relation)
      for (const auto& e : g.edges)
        if (static_cast<std::size_t>(e.dst) == i) in.push_back({static_cast<std::size_t>(e.src), relation_of(e.type)});
      in.push_back({i, 0});
      std::vector<double> logits;
      Mat msgs;
      for (auto [j, r] : in) {
        const auto& p = pick(r);
        const auto pj = matvec(p.theta, h[j]);
        const auto pi = matvec(p.theta, h[i]);
        double e = dotv(p.a_dst.values, pi) + dotv(p.a_src.values, pj);
        logits.push_back(e > 0 ? e : nn::kLeakySlope * e);
        msgs.push_back(pj);
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0;
      for (double& v : logits) z += (v = std::exp(v - mx));
      next[i].assign(cfg.hidden, 0.0);
      for (std::size_t k = 0; k < msgs.size(); ++k)
        for (std::size_t d = 0; d < cfg.hidden; ++d) next[i][d] += logits[k] / z * msgs[k][d];
      if (l + 1 < cfg.layers)
        for (double& v : next[i]) v = elu(v);
    }
    h = std::move(next);
  }
  auto head = [&](HeadParams& p, const std::vector<double>& x) {
    auto z = matvec(p.w1, x);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = elu(z[k] + p.b1.values[k]);
    const double o = dotv(p.w2.values, z) + p.b2.values[0];
    return 1.0 / (1.0 + std::exp(-o));
  };
  std::vector<double> po, pa;
  for (int i : g.nodes_of(NodeType::current)) {
    po.push_back(head(m.head_object(), h[static_cast<std::size_t>(i)]));
    pa.push_back(head(m.head_action(), h[static_cast<std::size_t>(i)]));
  }
  return {po, pa};
}

}  // namespace hetplan::testing
