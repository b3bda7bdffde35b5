#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetplan/core/error.hpp"
#include "hetplan/core/rng.hpp"
#include "hetplan/nn/checkpoint.hpp"
#include "hetplan/nn/tape.hpp"
#include "hetplan/perception/voxel.hpp"

namespace hetplan::perception {

inline constexpr std::size_t kCodeDim = 12;

/// Conv3D(1,C,5) -> ELU -> pool2 -> Conv3D(C,C,3) -> ELU -> pool2 -> FC(C*s^3, 12),
/// where s = ((R-4)/2 - 2)/2. R=32, C=32 gives s=6.
struct EncoderConfig {
  std::size_t resolution = kGridResolution;
  std::size_t channels = 32;

  std::size_t latent_side() const { return ((resolution - 4) / 2 - 2) / 2; }

  void validate() const {
    if (resolution < 12 || resolution % 4 != 0)
      throw DomainError("encoder resolution must be a multiple of 4 and at least 12");
    if (channels == 0) throw DomainError("encoder needs at least one channel");
  }

  nlohmann::json to_json() const { return {{"resolution", resolution}, {"channels", channels}}; }
  static EncoderConfig from_json(const nlohmann::json& j) {
    return {j.at("resolution").get<std::size_t>(), j.at("channels").get<std::size_t>()};
  }
};

class ShapeEncoder {
 public:
  explicit ShapeEncoder(EncoderConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t C = cfg_.channels, s = cfg_.latent_side();
    conv1_w_ = {"encoder.conv1.w", {C, 1, 5, 5, 5}};
    conv1_b_ = {"encoder.conv1.b", {C}};
    conv2_w_ = {"encoder.conv2.w", {C, C, 3, 3, 3}};
    conv2_b_ = {"encoder.conv2.b", {C}};
    fc_w_ = {"encoder.fc.w", {kCodeDim, C * s * s * s}};
    fc_b_ = {"encoder.fc.b", {kCodeDim}};
    Rng rng(mix_seed(seed, 0xe1c0de));
    conv1_w_.init_glorot(rng, 125, C * 125);
    conv2_w_.init_glorot(rng, C * 27, C * 27);
    fc_w_.init_glorot(rng, C * s * s * s, kCodeDim);
  }

  const EncoderConfig& config() const { return cfg_; }

  /// grid [1 x R x R x R] -> code [1 x 12] with trainable parameters.
  nn::Var forward(nn::Tape& t, nn::Var grid) {
    return run(t, grid, [&](nn::ParamTensor& p) { return t.param(p); });
  }

  /// Same stack with the weights entered as constants.
  nn::Var infer(nn::Tape& t, nn::Var grid) const {
    return run(t, grid, [&](const nn::ParamTensor& p) { return t.constant(p.shape, p.values); });
  }

  /// Deterministic 12-dim code. Refuses untrained weights unless
  /// allow_random_weights() was called.
  std::vector<double> encode(const VoxelGrid& g) const {
    if (!trained_ && !random_ok_)
      throw DomainError("shape encoder is untrained; pretrain it or allow random weights explicitly");
    if (static_cast<std::size_t>(g.resolution) != cfg_.resolution)
      throw ShapeError("voxel grid resolution " + std::to_string(g.resolution) + " does not match encoder " +
                       std::to_string(cfg_.resolution));
    nn::Tape t;
    const std::size_t R = cfg_.resolution;
    nn::Var x = t.constant({1, R, R, R}, g.as_values());
    return t.value(infer(t, x));
  }

  std::vector<nn::ParamTensor*> params() { return {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &fc_w_, &fc_b_}; }
  std::vector<const nn::ParamTensor*> params() const {
    return {&conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_, &fc_w_, &fc_b_};
  }

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  void allow_random_weights() { random_ok_ = true; }
  bool random_weights_allowed() const { return random_ok_; }

  /// Writes config and tensors into a checkpoint (header key "encoder").
  void store(nn::Checkpoint& ck) const {
    ck.header["encoder"] = cfg_.to_json();
    ck.header["encoder"]["trained"] = trained_;
    for (const auto* p : params()) ck.tensors.push_back(*p);
  }

  static ShapeEncoder restore(const nn::Checkpoint& ck) {
    if (!ck.header.contains("encoder")) throw FormatError("checkpoint carries no encoder");
    ShapeEncoder enc(EncoderConfig::from_json(ck.header["encoder"]));
    nn::assign_params(ck, enc.params());
    enc.trained_ = ck.header["encoder"].value("trained", false);
    return enc;
  }

 private:
  template <class Self, class Bind>
  static nn::Var run_impl(Self& self, nn::Tape& t, nn::Var grid, Bind bind) {
    nn::Var h = t.conv3d(grid, bind(self.conv1_w_), bind(self.conv1_b_));
    h = t.maxpool3d(t.elu(h));
    h = t.conv3d(h, bind(self.conv2_w_), bind(self.conv2_b_));
    h = t.maxpool3d(t.elu(h));
    h = t.reshape(h, {1, nn::numel(t.shape(h))});
    return t.dense(h, bind(self.fc_w_), bind(self.fc_b_));
  }
  template <class Bind>
  nn::Var run(nn::Tape& t, nn::Var grid, Bind bind) { return run_impl(*this, t, grid, bind); }
  template <class Bind>
  nn::Var run(nn::Tape& t, nn::Var grid, Bind bind) const { return run_impl(*this, t, grid, bind); }

  EncoderConfig cfg_;
  nn::ParamTensor conv1_w_, conv1_b_, conv2_w_, conv2_b_, fc_w_, fc_b_;
  bool trained_ = false;
  bool random_ok_ = false;
};

/// Mirror of the encoder used only for pretraining:
/// FC(12, C*s^3) -> ELU -> up2 -> Conv3D(C,C,3,pad 2) -> ELU -> up2 -> Conv3D(C,1,5,pad 4) -> sigmoid.
class ShapeDecoder {
 public:
  explicit ShapeDecoder(EncoderConfig cfg = {}, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t C = cfg_.channels, s = cfg_.latent_side();
    fc_w_ = {"decoder.fc.w", {C * s * s * s, kCodeDim}};
    fc_b_ = {"decoder.fc.b", {C * s * s * s}};
    conv1_w_ = {"decoder.conv1.w", {C, C, 3, 3, 3}};
    conv1_b_ = {"decoder.conv1.b", {C}};
    conv2_w_ = {"decoder.conv2.w", {1, C, 5, 5, 5}};
    conv2_b_ = {"decoder.conv2.b", {1}};
    Rng rng(mix_seed(seed, 0xdec0de));
    fc_w_.init_glorot(rng, kCodeDim, C * s * s * s);
    conv1_w_.init_glorot(rng, C * 27, C * 27);
    conv2_w_.init_glorot(rng, C * 125, 125);
  }

  /// code [1 x 12] -> occupancy probabilities [1 x R x R x R].
  nn::Var forward(nn::Tape& t, nn::Var code) {
    const std::size_t C = cfg_.channels, s = cfg_.latent_side();
    nn::Var h = t.elu(t.dense(code, t.param(fc_w_), t.param(fc_b_)));
    h = t.upsample3d(t.reshape(h, {C, s, s, s}));
    h = t.elu(t.conv3d(h, t.param(conv1_w_), t.param(conv1_b_), 2));
    h = t.upsample3d(h);
    return t.sigmoid(t.conv3d(h, t.param(conv2_w_), t.param(conv2_b_), 4));
  }

  std::vector<nn::ParamTensor*> params() { return {&fc_w_, &fc_b_, &conv1_w_, &conv1_b_, &conv2_w_, &conv2_b_}; }

 private:
  EncoderConfig cfg_;
  nn::ParamTensor fc_w_, fc_b_, conv1_w_, conv1_b_, conv2_w_, conv2_b_;
};

}  // namespace hetplan::perception
