#include "rfsf/optim.hpp"

#include <cmath>

#include "rfsf/errors.hpp"

namespace rfsf {

void adam_step(Param& param, const Tensor& grad, AdamState& state, double lr) {
    if (!param.value.same_shape(grad) || !state.m.same_shape(grad)) {
        throw DimensionError("adam_step: shape mismatch for param '" + param.name + "'");
    }
    if (lr <= 0.0) throw ContractError("adam_step: learning rate must be positive");
    if (!grad.all_finite()) {
        throw NumericalError("adam_step: non-finite gradient for param '" + param.name +
                             "'; update rejected");
    }
    state.step_count += 1;
    double b1 = state.beta1, b2 = state.beta2;
    double bias_corr = std::sqrt(1.0 - std::pow(b2, static_cast<double>(state.step_count))) /
                       (1.0 - std::pow(b1, static_cast<double>(state.step_count)));
    double lr_t = lr * bias_corr;
    for (int64_t i = 0, n = grad.size(); i < n; ++i) {
        double g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        param.value[i] -= lr_t * state.m[i] / (std::sqrt(state.v[i]) + state.eps);
    }
}

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr) {
    states_.reserve(params_.size());
    for (Param* p : params_) states_.emplace_back(p->value.shape(), beta1, beta2, eps);
}

void AdamOptimizer::step() {
    for (size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i]->trainable) continue;
        adam_step(*params_[i], params_[i]->grad, states_[i], lr_);
    }
}

void AdamOptimizer::zero_grad() {
    for (Param* p : params_) p->zero_grad();
}

Tensor xavier_uniform(const std::vector<int>& shape, int fan_in, int fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t(shape);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

}  // namespace rfsf
