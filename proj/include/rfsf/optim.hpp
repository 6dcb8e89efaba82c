#pragma once

#include <cstdint>
#include <vector>

#include "rfsf/autodiff.hpp"
#include "rfsf/rng.hpp"
#include "rfsf/tensor.hpp"

namespace rfsf {

struct AdamState {
    Tensor m;
    Tensor v;
    int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(const std::vector<int>& shape, double b1, double b2, double e)
        : m(Tensor::zeros(shape)), v(Tensor::zeros(shape)), beta1(b1), beta2(b2), eps(e) {}
};

// One Adam update:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   p <- p - lr * sqrt(1-b2^t)/(1-b1^t) * m / (sqrt(v) + eps)
// Rejects non-finite gradients.
void adam_step(Param& param, const Tensor& grad, AdamState& state, double lr);

// Convenience wrapper over a fixed parameter list.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step();       // consumes Param::grad
    void zero_grad();  // clears Param::grad
    double lr() const { return lr_; }

private:
    std::vector<Param*> params_;
    std::vector<AdamState> states_;
    double lr_;
};

// Xavier/Glorot uniform init: U(-sqrt(6/(fan_in+fan_out)), +...)
Tensor xavier_uniform(const std::vector<int>& shape, int fan_in, int fan_out, Rng& rng);

}  // namespace rfsf
