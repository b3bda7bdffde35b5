#pragma once

#include <cmath>
#include <vector>

#include "hetplan/nn/tensor.hpp"

namespace hetplan::nn {

inline bool grads_finite(const std::vector<ParamTensor*>& params) {
  for (const ParamTensor* p : params)
    for (double g : p->grad)
      if (!std::isfinite(g)) return false;
  return true;
}

/// Plain gradient descent. step() returns false and leaves every parameter
/// untouched when any gradient is non-finite.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  bool step(const std::vector<ParamTensor*>& params) const {
    if (!grads_finite(params)) return false;
    for (ParamTensor* p : params)
      for (std::size_t i = 0; i < p->size(); ++i) p->values[i] -= lr_ * p->grad[i];
    return true;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
};

/// Adam with bias correction; moment buffers are keyed by position in the
/// parameter list, which must stay stable between steps.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  bool step(const std::vector<ParamTensor*>& params) {
    if (!grads_finite(params)) return false;
    if (m_.empty()) {
      for (const ParamTensor* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      ParamTensor& p = *params[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g;
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g * g;
        p.values[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
      }
    }
    return true;
  }

  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

inline void zero_grads(const std::vector<ParamTensor*>& params) {
  for (ParamTensor* p : params) p->zero_grad();
}

}  // namespace hetplan::nn
