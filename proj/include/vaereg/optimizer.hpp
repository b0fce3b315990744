#pragma once

#include <cstdint>
#include <vector>

#include "vaereg/tensor.hpp"

namespace vaereg::nn {

// Adam with the usual constants (beta1=0.9, beta2=0.999, eps=1e-8). Moments
// are kept per parameter tensor, in registration order.
struct OptimizerState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
    double learning_rate = 1e-3;

    static OptimizerState init(const std::vector<const Tensor*>& params, double learning_rate);
};

// One Adam update over a flat parameter list. Throws NumericError on
// non-finite gradients.
void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               OptimizerState& state);

}  // namespace vaereg::nn
