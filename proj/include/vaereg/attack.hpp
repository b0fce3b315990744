#pragma once

#include <cstddef>

#include "vaereg/model.hpp"
#include "vaereg/tensor.hpp"

namespace vaereg::attack {

struct AttackConfig {
    double fgsm_epsilon = 0.02;  // per-step L-inf perturbation bound
    double y_target = 110.0;     // meters
    std::size_t start_step = 20; // episode timestep at which the attack begins
    std::size_t iterations = 1;

    void validate() const;
};

struct FgsmResult {
    Tensor x_adv;
    bool zero_gradient = false;  // every iteration saw an all-zero input gradient
};

// Targeted FGSM on the regression output: repeated steps of
//   x <- clamp_[0,1](x - eps * sign(dJ/dx)),   J = (f(x) - y_target)^2
// with the gradient recomputed each iteration.
FgsmResult fgsm(const model::VaeRegressionModel& m, const Tensor& x, const AttackConfig& cfg);

}  // namespace vaereg::attack
