#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace chorder::nn {

/// Adam with the default moment coefficients; the learning rate is supplied
/// per step so schedules stay outside the optimizer.
template <class T>
class Adam {
public:
    explicit Adam(size_t parameter_count, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

    void step(std::span<T> params, std::span<const T> grad, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i];
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] = static_cast<T>(params[i] - lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }

    long steps() const noexcept { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

} // namespace chorder::nn
