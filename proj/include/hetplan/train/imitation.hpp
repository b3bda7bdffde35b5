#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetplan/coord/model.hpp"
#include "hetplan/core/error.hpp"
#include "hetplan/core/parallel.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/data/dataset.hpp"
#include "hetplan/nn/loss.hpp"
#include "hetplan/nn/optim.hpp"
#include "hetplan/perception/task_view.hpp"

namespace hetplan::train {

/// A task graph with encoder features and the expert's per-object labels.
struct Sample {
  graph::HetTaskGraph graph;
  std::vector<double> first;   // 1 for the expert's first object
  std::vector<double> action;  // 1 = push
};

/// Rebuilds each record's graph with shape codes and checks that the
/// structure matches the stored one.
inline std::vector<Sample> featurize(const std::vector<data::TaskRecord>& records, const perception::CodeCache& codes) {
  std::vector<Sample> out(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = records[i];
    Sample s;
    s.graph = perception::perceive_task(r.scene, codes).graph;
    if (s.graph.edges != r.graph.edges || s.graph.types != r.graph.types)
      throw FormatError("record " + std::to_string(r.meta.index) + ": rebuilt graph differs from the stored one");
    s.first.assign(r.first_labels.begin(), r.first_labels.end());
    s.action.assign(r.action_labels.begin(), r.action_labels.end());
    out[i] = std::move(s);
  });
  return out;
}

struct LossParts {
  nn::Var object, action, combined;
};

/// Huber on p_o against the first-object labels plus lambda times BCE on
/// p_a against the action labels, both averaged over current nodes.
inline LossParts task_loss(coord::CoordinatorModel& m, nn::Tape& t, const Sample& s,
                           double lambda = nn::kActionWeight) {
  const coord::ForwardResult f = m.forward(t, s.graph);
  LossParts l;
  l.object = t.huber(f.p_object, s.first, nn::kHuberDelta);
  l.action = t.bce(f.p_action, s.action);
  l.combined = t.add(l.object, t.scale(l.action, lambda));
  return l;
}

struct Metrics {
  double object_top1 = 0.0;
  double action_acc = 0.0;
  double loss = 0.0;
};

inline Metrics evaluate_samples(const coord::CoordinatorModel& m, const std::vector<Sample>& samples,
                                const std::vector<std::size_t>& idx, double lambda = nn::kActionWeight) {
  Metrics out;
  if (idx.empty()) return {std::nan(""), std::nan(""), std::nan("")};
  std::size_t hits = 0, actions = 0, right = 0;
  for (std::size_t i : idx) {
    const Sample& s = samples[i];
    nn::Tape t;
    const auto f = m.infer(t, s.graph);
    const auto po = t.value(f.p_object), pa = t.value(f.p_action);
    std::size_t best = 0;
    for (std::size_t k = 1; k < po.size(); ++k)
      if (po[k] > po[best]) best = k;
    hits += s.first[best] == 1.0;
    for (std::size_t k = 0; k < pa.size(); ++k) right += (pa[k] > coord::kPushThreshold) == (s.action[k] == 1.0);
    actions += pa.size();
    out.loss += t.scalar(t.huber(f.p_object, s.first, nn::kHuberDelta)) +
                lambda * t.scalar(t.bce(f.p_action, s.action));
  }
  out.object_top1 = static_cast<double>(hits) / static_cast<double>(idx.size());
  out.action_acc = static_cast<double>(right) / static_cast<double>(actions);
  out.loss /= static_cast<double>(idx.size());
  return out;
}

struct TrainOptions {
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch = 32;
  double lambda = nn::kActionWeight;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
  bool tied = false;
  std::size_t hidden = 32;
  std::string divergence_checkpoint;  // written with the last good model on divergence

  nlohmann::json to_json() const {
    return {{"epochs", epochs}, {"lr", lr},     {"batch", batch}, {"lambda", lambda},
            {"val_fraction", val_fraction}, {"seed", seed}, {"tied", tied}, {"hidden", hidden}};
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_object_top1 = 0.0;
  double val_action_acc = 0.0;
};

struct TrainResult {
  coord::CoordinatorModel model;
  std::vector<EpochLog> log;
  std::vector<std::size_t> train_idx, val_idx;
};

inline std::string log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,train_loss,val_object_top1,val_action_acc\n";
  for (const auto& e : log) os << e.epoch << ',' << e.train_loss << ',' << e.val_object_top1 << ',' << e.val_action_acc << '\n';
  return os.str();
}

/// Deterministic split: a seeded shuffle, the last val_fraction held out.
inline void split_indices(std::size_t n, double val_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                          std::vector<std::size_t>& val) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5b117));
  rng.shuffle(order);
  const auto nv = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(nv));
  val.assign(order.end() - static_cast<std::ptrdiff_t>(nv), order.end());
}

/// Per-dimension mean and inverse standard deviation over all nodes of the
/// given samples.
inline void feature_statistics(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx, std::size_t dim,
                               std::vector<double>& mean, std::vector<double>& scale) {
  std::vector<double> s(dim, 0.0), ss(dim, 0.0);
  double n = 0;
  for (std::size_t i : idx)
    for (const auto& f : samples[i].graph.features) {
      if (f.size() != dim) throw ShapeError("sample feature width does not match the model");
      for (std::size_t d = 0; d < dim; ++d) s[d] += f[d], ss[d] += f[d] * f[d];
      n += 1;
    }
  mean.assign(dim, 0.0);
  scale.assign(dim, 1.0);
  if (n == 0) return;
  for (std::size_t d = 0; d < dim; ++d) {
    mean[d] = s[d] / n;
    const double var = ss[d] / n - mean[d] * mean[d];
    scale[d] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

/// Imitation training with Adam on minibatches of tasks. Logs one row per
/// epoch. A non-finite loss or gradient rolls the model back to the last
/// finished epoch, optionally saves it, and throws TrainingDiverged.
inline TrainResult train_coordinator(const std::vector<Sample>& samples, const TrainOptions& opt) {
  if (samples.empty()) throw DomainError("training set is empty");
  if (opt.epochs == 0 || opt.batch == 0) throw DomainError("epochs and batch must be positive");
  if (!(opt.val_fraction >= 0.0 && opt.val_fraction < 1.0)) throw DomainError("val_fraction must be in [0, 1)");
  if (!(opt.lambda >= 0.0) || !std::isfinite(opt.lambda)) throw DomainError("lambda must be finite and non-negative");

  std::vector<std::size_t> train_idx, val_idx;
  split_indices(samples.size(), opt.val_fraction, opt.seed, train_idx, val_idx);
  coord::CoordinatorConfig cfg;
  cfg.tied = opt.tied;
  cfg.hidden = opt.hidden;
  feature_statistics(samples, train_idx, cfg.input_dim, cfg.input_mean, cfg.input_scale);
  TrainResult res{coord::CoordinatorModel(cfg, opt.seed), {}, train_idx, val_idx};
  coord::CoordinatorModel& m = res.model;
  const std::vector<nn::ParamTensor*> params = m.params();
  nn::Adam adam(opt.lr);
  Rng rng(mix_seed(opt.seed, 0x7a1));

  std::vector<std::vector<double>> good;
  const auto snapshot = [&] {
    good.clear();
    for (const auto* p : params) good.push_back(p->values);
  };
  const auto diverged = [&](const std::string& what) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->values = good[k];
    if (!opt.divergence_checkpoint.empty()) {
      coord::CoordinatorBundle b{m, perception::ShapeEncoder(), {{"diverged", true}}};
      nn::save_checkpoint(opt.divergence_checkpoint, coord::make_checkpoint(b));
    }
    throw TrainingDiverged("coordinator training diverged: " + what);
  };
  snapshot();

  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + opt.batch);
      nn::zero_grads(params);
      for (std::size_t k = start; k < end; ++k) {
        nn::Tape t;
        const LossParts l = task_loss(m, t, samples[order[k]], opt.lambda);
        nn::Var scaled = t.scale(l.combined, 1.0 / static_cast<double>(end - start));
        const double v = t.scalar(l.combined);
        if (!std::isfinite(v)) diverged("non-finite loss in epoch " + std::to_string(epoch));
        total += v;
        t.backward(scaled);
      }
      if (!adam.step(params)) diverged("non-finite gradient in epoch " + std::to_string(epoch));
    }
    snapshot();
    const Metrics val = evaluate_samples(m, samples, val_idx, opt.lambda);
    res.log.push_back({epoch, total / static_cast<double>(order.size()), val.object_top1, val.action_acc});
  }
  m.mark_trained();
  return res;
}

struct TrainedBundle {
  coord::CoordinatorBundle bundle;
  std::vector<EpochLog> log;
  Metrics val;
};

/// Featurizes records with a frozen encoder, trains, and packs the model
/// with that encoder. `info` lands in the checkpoint's training header.
inline TrainedBundle train_bundle(const std::vector<data::TaskRecord>& records, const perception::ShapeEncoder& encoder,
                                  const TrainOptions& opt, nlohmann::json info = nlohmann::json::object()) {
  perception::CodeCache codes(encoder);
  const std::vector<Sample> samples = featurize(records, codes);
  TrainResult r = train_coordinator(samples, opt);
  Metrics val = evaluate_samples(r.model, samples, r.val_idx, opt.lambda);
  info["options"] = opt.to_json();
  info["records"] = records.size();
  info["val_object_top1"] = val.object_top1;
  info["val_action_acc"] = val.action_acc;
  return {coord::CoordinatorBundle{std::move(r.model), encoder, std::move(info)}, std::move(r.log), val};
}

}  // namespace hetplan::train
