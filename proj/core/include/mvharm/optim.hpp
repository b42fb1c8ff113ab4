#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mvharm {

// Decoupled-weight-decay Adam. With weight_decay == 0 this is plain Adam.
// One instance per flat parameter vector; step() applies one update
// in place using the supplied gradient.
class AdamW {
 public:
  AdamW(size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(double* params, const double* grads, size_t size, double lr,
            double weight_decay = 0.0) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < size; ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * params[i]);
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace mvharm
