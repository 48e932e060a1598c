// adam.hpp — plain Adam with bias correction, shared by detector training
// and texture optimization. One step() call advances the shared timestep, so
// callers must pass the full parameter vector per step.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fca {

class Adam {
  public:
    Adam(size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(double* params, const double* grads, size_t n) {
        step_masked(params, grads, nullptr, n);
    }

    // mask[i] == 0 freezes element i entirely: no moment update, no write.
    void step_masked(double* params, const double* grads, const uint8_t* mask,
                     size_t n) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (size_t i = 0; i < n; ++i) {
            if (mask && !mask[i]) continue;
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i] * grads[i];
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }

    int64_t steps() const { return t_; }
    double learning_rate() const { return lr_; }

  private:
    double lr_, b1_, b2_, eps_;
    std::vector<double> m_, v_;
    int64_t t_ = 0;
};

}  // namespace fca
