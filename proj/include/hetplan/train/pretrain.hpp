#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/data/envs.hpp"
#include "hetplan/data/scene_gen.hpp"
#include "hetplan/nn/optim.hpp"
#include "hetplan/perception/encoder.hpp"
#include "hetplan/perception/features.hpp"
#include "hetplan/perception/voxel.hpp"

namespace hetplan::train {

inline constexpr std::size_t kMinPretrainGrids = 100;
inline constexpr std::size_t kDefaultPretrainGrids = 150;

/// Distinct occupancy grids for autoencoder pretraining: the catalog
/// objects, the constraint regions of `envs`, then random blocks and
/// cylinders until `count` grids exist.
inline std::vector<perception::VoxelGrid> pretraining_grids(std::size_t count, std::uint64_t seed,
                                                            const std::vector<std::string>& envs = data::training_envs(),
                                                            int resolution = perception::kGridResolution) {
  std::vector<perception::VoxelGrid> out;
  std::set<std::vector<std::uint8_t>> seen;
  const auto add = [&](perception::VoxelGrid g) {
    if (out.size() < count && seen.insert(g.cells).second) out.push_back(std::move(g));
  };
  for (const auto* cat : {&data::graspable_catalog(), &data::ungraspable_catalog()})
    for (const auto& s : *cat) add(perception::voxelize(data::make_object(s), perception::VoxelMode::metric, resolution));
  for (const auto& name : envs) {
    const auto ws = data::load_env(name);
    for (const auto& r : ws->regions()) add(perception::voxelize_region(r, *ws, resolution));
  }
  Rng rng(mix_seed(seed, 0x9a1d5));
  for (int tries = 0; out.size() < count; ++tries) {
    if (tries > 100000) throw DomainError("could not draw " + std::to_string(count) + " distinct shapes");
    data::ShapeSpec s;
    s.shape = rng.below(2) == 0 ? sim::ShapeKind::block : sim::ShapeKind::cylinder;
    s.width = rng.range(2, 16);
    s.depth = s.shape == sim::ShapeKind::cylinder ? s.width : rng.range(2, 16);
    s.height = rng.range(2, 15);
    add(perception::voxelize(data::make_object(s), perception::VoxelMode::metric, resolution));
  }
  return out;
}

struct PretrainOptions {
  std::size_t epochs = 3;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
  perception::EncoderConfig encoder;
  std::size_t min_grids = kMinPretrainGrids;
  std::string divergence_checkpoint;  // written with the last good encoder on divergence
};

struct PretrainResult {
  perception::ShapeEncoder encoder;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;  // mean training loss while each epoch ran
};

/// Mean squared voxel error of encoder + decoder on one grid.
inline nn::Var reconstruction_loss(nn::Tape& t, perception::ShapeEncoder& enc, perception::ShapeDecoder& dec,
                                   const perception::VoxelGrid& g) {
  const std::size_t R = static_cast<std::size_t>(g.resolution);
  const std::vector<double> v = g.as_values();
  nn::Var x = t.constant({1, R, R, R}, v);
  return t.mse(dec.forward(t, enc.forward(t, x)), v);
}

namespace detail {

inline double mean_reconstruction(perception::ShapeEncoder& enc, perception::ShapeDecoder& dec,
                                  const std::vector<perception::VoxelGrid>& grids) {
  double acc = 0.0;
  for (const auto& g : grids) {
    nn::Tape t;
    acc += t.scalar(reconstruction_loss(t, enc, dec, g));
  }
  return acc / static_cast<double>(grids.size());
}

inline std::vector<std::vector<double>> snapshot(const std::vector<nn::ParamTensor*>& ps) {
  std::vector<std::vector<double>> out;
  for (const auto* p : ps) out.push_back(p->values);
  return out;
}

inline void restore(const std::vector<nn::ParamTensor*>& ps, const std::vector<std::vector<double>>& s) {
  for (std::size_t k = 0; k < ps.size(); ++k) ps[k]->values = s[k];
}

}  // namespace detail

/// Trains encoder and decoder to reconstruct the grids, then freezes the
/// encoder (marked trained; the decoder is discarded). On a non-finite loss
/// the encoder is rolled back to the last finished epoch, optionally saved,
/// and TrainingDiverged is thrown.
inline PretrainResult pretrain_encoder(const std::vector<perception::VoxelGrid>& grids, const PretrainOptions& opt) {
  std::set<std::vector<std::uint8_t>> distinct;
  for (const auto& g : grids) {
    if (static_cast<std::size_t>(g.resolution) != opt.encoder.resolution)
      throw ShapeError("grid resolution does not match the encoder");
    distinct.insert(g.cells);
  }
  if (distinct.size() < opt.min_grids)
    throw DomainError("pretraining needs at least " + std::to_string(opt.min_grids) + " distinct grids, got " +
                      std::to_string(distinct.size()));
  if (opt.epochs == 0 || opt.batch == 0) throw DomainError("epochs and batch must be positive");

  PretrainResult res{perception::ShapeEncoder(opt.encoder, opt.seed), 0.0, 0.0, {}};
  perception::ShapeDecoder dec(opt.encoder, opt.seed);
  std::vector<nn::ParamTensor*> params = res.encoder.params();
  for (auto* p : dec.params()) params.push_back(p);
  nn::Adam adam(opt.lr);
  Rng rng(mix_seed(opt.seed, 0x5a3e));
  res.initial_loss = detail::mean_reconstruction(res.encoder, dec, grids);

  std::vector<std::size_t> order(grids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto good = detail::snapshot(res.encoder.params());
  const auto diverged = [&](const std::string& what) {
    detail::restore(res.encoder.params(), good);
    res.encoder.mark_trained();
    if (!opt.divergence_checkpoint.empty()) {
      nn::Checkpoint ck;
      ck.header["kind"] = "encoder";
      ck.header["diverged"] = true;
      res.encoder.store(ck);
      nn::save_checkpoint(opt.divergence_checkpoint, ck);
    }
    throw TrainingDiverged("encoder pretraining diverged: " + what);
  };

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch) {
      const std::size_t end = std::min(order.size(), start + opt.batch);
      nn::zero_grads(params);
      for (std::size_t k = start; k < end; ++k) {
        nn::Tape t;
        nn::Var loss = t.scale(reconstruction_loss(t, res.encoder, dec, grids[order[k]]),
                               1.0 / static_cast<double>(end - start));
        const double v = t.scalar(loss);
        if (!std::isfinite(v)) diverged("non-finite loss in epoch " + std::to_string(epoch + 1));
        total += v * static_cast<double>(end - start);
        t.backward(loss);
      }
      if (!adam.step(params)) diverged("non-finite gradient in epoch " + std::to_string(epoch + 1));
    }
    res.epoch_loss.push_back(total / static_cast<double>(order.size()));
    good = detail::snapshot(res.encoder.params());
  }
  res.final_loss = detail::mean_reconstruction(res.encoder, dec, grids);
  res.encoder.mark_trained();
  return res;
}

/// Encoder-only checkpoint (header kind "encoder").
inline void save_encoder(const std::string& path, const perception::ShapeEncoder& enc, nlohmann::json info = {}) {
  nn::Checkpoint ck;
  ck.header["kind"] = "encoder";
  if (!info.is_null()) ck.header["pretraining"] = std::move(info);
  enc.store(ck);
  nn::save_checkpoint(path, ck);
}

inline perception::ShapeEncoder load_encoder(const std::string& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.header.value("kind", std::string()) != "encoder" && ck.header.value("kind", std::string()) != "coordinator")
    throw FormatError("'" + path + "' holds no shape encoder");
  return perception::ShapeEncoder::restore(ck);
}

/// The default frozen encoder: pretraining on kDefaultPretrainGrids shapes.
inline PretrainResult default_encoder(std::uint64_t seed, PretrainOptions opt = {}) {
  opt.seed = seed;
  return pretrain_encoder(pretraining_grids(kDefaultPretrainGrids, seed), opt);
}

inline nlohmann::json pretrain_info(const PretrainOptions& opt, const PretrainResult& r, std::size_t grids) {
  return {{"grids", grids},          {"epochs", opt.epochs},           {"lr", opt.lr},
          {"batch", opt.batch},      {"seed", opt.seed},               {"initial_loss", r.initial_loss},
          {"final_loss", r.final_loss}, {"encoder", opt.encoder.to_json()}};
}

}  // namespace hetplan::train
