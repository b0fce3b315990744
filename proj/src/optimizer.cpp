#include "vaereg/optimizer.hpp"

#include <cmath>

#include "vaereg/errors.hpp"

namespace vaereg::nn {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
}  // namespace

OptimizerState OptimizerState::init(const std::vector<const Tensor*>& params,
                                    double learning_rate) {
    OptimizerState state;
    state.learning_rate = learning_rate;
    for (const Tensor* p : params) {
        state.first_moment.push_back(Tensor::zeros(p->shape));
        state.second_moment.push_back(Tensor::zeros(p->shape));
    }
    return state;
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               OptimizerState& state) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw ValidationError("adam_step: parameter/gradient/state count mismatch");

    for (std::size_t i = 0; i < grads.size(); ++i) {
        require_same_shape(*params[i], *grads[i], "adam_step");
        if (!grads[i]->all_finite())
            throw NumericError("adam_step: non-finite gradient in tensor " + std::to_string(i));
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(kBeta1, t);
    const double bc2 = 1.0 - std::pow(kBeta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        for (std::size_t k = 0; k < p.numel(); ++k) {
            m.data[k] = kBeta1 * m.data[k] + (1.0 - kBeta1) * g.data[k];
            v.data[k] = kBeta2 * v.data[k] + (1.0 - kBeta2) * g.data[k] * g.data[k];
            const double m_hat = m.data[k] / bc1;
            const double v_hat = v.data[k] / bc2;
            p.data[k] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
        }
    }
}

}  // namespace vaereg::nn
