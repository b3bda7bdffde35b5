#pragma once

// Central finite-difference oracle for tape gradients. Test-only: it only
// evaluates loss values, never the tape's backward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hetplan/nn/tape.hpp"

namespace hetplan::testing {

inline constexpr double kFdStep = 1e-3;
inline constexpr double kGradTolerance = 1e-4;

/// |a - n| relative to the larger magnitude, floored at 1e-2 so entries
/// whose true gradient is essentially zero are compared absolutely.
inline double grad_rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-2});
  return std::abs(analytic - numeric) / scale;
}

using LossBuilder = std::function<nn::Var(nn::Tape&, std::vector<nn::Var>&)>;

/// Builds the loss with every tensor in `params` bound to the tape, then
/// compares the backward pass against central differences. Returns the
/// maximum relative error over all entries.
inline double max_grad_error(std::vector<nn::ParamTensor*> params, const LossBuilder& build,
                             double step = kFdStep) {
  auto eval = [&](bool with_grad) {
    nn::Tape tape;
    std::vector<nn::Var> vars;
    for (auto* p : params) vars.push_back(tape.param(*p));
    nn::Var loss = build(tape, vars);
    if (with_grad) tape.backward(loss);
    return tape.scalar(loss);
  };
  for (auto* p : params) p->zero_grad();
  eval(true);
  double worst = 0.0;
  for (auto* p : params) {
    const std::vector<double> analytic = p->grad;
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double keep = p->values[i];
      p->values[i] = keep + step;
      const double up = eval(false);
      p->values[i] = keep - step;
      const double down = eval(false);
      p->values[i] = keep;
      worst = std::max(worst, grad_rel_error(analytic[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

/// Weighted sum with fixed random coefficients; turns any op output into a
/// scalar whose gradient exercises every output entry.
inline nn::Var probe_loss(nn::Tape& tape, nn::Var y, const std::vector<double>& coeff) {
  nn::Var c = tape.constant(tape.shape(y), coeff);
  return tape.sum(tape.mul(y, c));
}

inline std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Uniform values kept at least `margin` away from zero (activation kinks).
inline std::vector<double> away_from_zero(Rng& rng, std::size_t n, double margin = 0.05) {
  std::vector<double> v(n);
  for (double& x : v) {
    const double mag = rng.uniform(margin, 1.5);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return v;
}

}  // namespace hetplan::testing
