#pragma once

#include <span>
#include <string>

#include "hetplan/nn/tape.hpp"

namespace hetplan::nn {

enum class LayerKind { dense, conv3d, maxpool3d, elu, leaky_relu, softmax_rows };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv3d: return "conv3d";
    case LayerKind::maxpool3d: return "maxpool3d";
    case LayerKind::elu: return "elu";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::softmax_rows: return "softmax_rows";
  }
  return "?";
}

/// Output shape of a valid (unpadded) stride-1 convolution followed by
/// nothing else; handy for sizing the encoder's flatten layer.
inline std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t pad = 0) {
  if (in + 2 * pad < kernel) {
    throw ShapeError("conv_out: kernel " + std::to_string(kernel) + " exceeds input " +
                     std::to_string(in));
  }
  return in + 2 * pad - kernel + 1;
}

inline std::size_t pool_out(std::size_t in) { return in / 2; }

/// Evaluates a single layer without recording gradients.
///
/// dense expects {W [out x in], b [out]} and a [rows x in] input; conv3d
/// expects {W [O x C x K x K x K], b [O]} and a [C x D x H x W] input. The
/// remaining kinds take no parameters.
inline Tensor forward_layer(const Tensor& input, std::span<const ParamTensor> params,
                            LayerKind kind) {
  const std::size_t want = (kind == LayerKind::dense || kind == LayerKind::conv3d) ? 2 : 0;
  if (params.size() != want) {
    throw ShapeError(std::string(to_string(kind)) + " takes " + std::to_string(want) +
                     " parameter tensors, got " + std::to_string(params.size()));
  }
  Tape tape;
  Var x = tape.constant(input);
  Var y;
  auto leaf = [&](const ParamTensor& p) { return tape.constant(p.shape, p.values); };
  switch (kind) {
    case LayerKind::dense: {
      if (input.shape.size() != 2) {
        throw ShapeError("dense: input must be [rows x d_in], got " + shape_str(input.shape));
      }
      if (params[0].shape.size() != 2 || params[0].shape[1] != input.shape[1] ||
          params[1].size() != params[0].shape[0]) {
        throw ShapeError("dense: input " + shape_str(input.shape) + ", weight " +
                         shape_str(params[0].shape) + ", bias " + shape_str(params[1].shape));
      }
      y = tape.dense(x, leaf(params[0]), leaf(params[1]));
      break;
    }
    case LayerKind::conv3d:
      y = tape.conv3d(x, leaf(params[0]), leaf(params[1]));
      break;
    case LayerKind::maxpool3d:
      y = tape.maxpool3d(x);
      break;
    case LayerKind::elu:
      y = tape.elu(x);
      break;
    case LayerKind::leaky_relu:
      y = tape.leaky_relu(x);
      break;
    case LayerKind::softmax_rows:
      y = tape.softmax_rows(x);
      break;
  }
  return tape.tensor(y);
}

}  // namespace hetplan::nn
