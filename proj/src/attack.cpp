#include "vaereg/attack.hpp"

#include <algorithm>
#include <cmath>

#include "vaereg/errors.hpp"

namespace vaereg::attack {

void AttackConfig::validate() const {
    if (!(fgsm_epsilon > 0.0)) throw ValidationError("attack: fgsm_epsilon must be > 0");
    if (iterations < 1) throw ValidationError("attack: iterations must be >= 1");
}

FgsmResult fgsm(const model::VaeRegressionModel& m, const Tensor& x, const AttackConfig& cfg) {
    cfg.validate();
    if (x.shape.size() != 1 || x.shape[0] != m.config.input_dim)
        throw ValidationError("fgsm: input dimension mismatch");

    FgsmResult result{x, true};
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const model::DistanceGradient dg =
            model::predict_distance_with_gradient(m, result.x_adv);
        // dJ/dx = 2 (f(x) - y_target) * df/dx; only the sign matters.
        const double scale = 2.0 * (dg.prediction - cfg.y_target);
        bool any_nonzero = false;
        for (std::size_t d = 0; d < x.numel(); ++d) {
            const double g = scale * dg.input_grad.data[d];
            if (g == 0.0) continue;
            any_nonzero = true;
            const double step = g > 0.0 ? -cfg.fgsm_epsilon : cfg.fgsm_epsilon;
            result.x_adv.data[d] = std::clamp(result.x_adv.data[d] + step, 0.0, 1.0);
        }
        if (any_nonzero) result.zero_gradient = false;
    }
    return result;
}

}  // namespace vaereg::attack
