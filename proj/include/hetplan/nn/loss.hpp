#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "hetplan/core/error.hpp"
#include "hetplan/nn/tape.hpp"

namespace hetplan::nn {

inline constexpr double kHuberDelta = 1.15;
inline constexpr double kActionWeight = 0.65;

enum class LossKind { action, object, combined };

struct LossValue {
  double value = 0.0;
  LossKind kind = LossKind::combined;
};

/// Binary cross-entropy of one prediction; p is clamped to [1e-7, 1-1e-7].
inline LossValue loss_bce(double p, int y) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("loss_bce: probability " + std::to_string(p) + " outside [0, 1]");
  }
  if (y != 0 && y != 1) throw DomainError("loss_bce: label must be 0 or 1");
  const double q = std::clamp(p, kProbEps, 1.0 - kProbEps);
  const double v = -(y * std::log(q) + (1 - y) * std::log(1.0 - q));
  return {v, LossKind::action};
}

/// Huber loss on the residual y - y_hat with threshold delta.
inline LossValue loss_huber(double y_hat, double y, double delta = kHuberDelta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw DomainError("loss_huber: delta must be positive and finite");
  }
  if (!std::isfinite(y_hat) || !std::isfinite(y)) {
    throw DomainError("loss_huber: non-finite input");
  }
  const double a = std::abs(y - y_hat);
  const double v = a < delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
  return {v, LossKind::object};
}

/// L = L_object + lambda * L_action.
inline LossValue loss_combined(LossValue object_loss, LossValue action_loss,
                               double lambda = kActionWeight) {
  if (!std::isfinite(object_loss.value) || !std::isfinite(action_loss.value) ||
      !std::isfinite(lambda)) {
    throw DomainError("loss_combined: non-finite input");
  }
  return {object_loss.value + lambda * action_loss.value, LossKind::combined};
}

}  // namespace hetplan::nn
