#include "vaereg/gaussian.hpp"

#include <cmath>

#include "vaereg/errors.hpp"

namespace vaereg {

void GaussianParams::validate(const char* what) const {
    if (!mean.same_shape(log_variance))
        throw ValidationError(std::string(what) + ": mean/log_variance shape mismatch");
    if (!mean.all_finite() || !log_variance.all_finite())
        throw NumericError(std::string(what) + ": non-finite Gaussian parameters");
}

double gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
    q.validate("gaussian_kl q");
    p.validate("gaussian_kl p");
    require_same_shape(q.mean, p.mean, "gaussian_kl");
    double kl = 0.0;
    for (std::size_t d = 0; d < q.mean.numel(); ++d) {
        const double lq = q.log_variance.data[d];
        const double lp = p.log_variance.data[d];
        const double dm = q.mean.data[d] - p.mean.data[d];
        kl += 0.5 * (std::exp(lq - lp) + dm * dm / std::exp(lp) - 1.0 + lp - lq);
    }
    return kl;
}

GaussianKlGrads gaussian_kl_grads(const GaussianParams& q, const GaussianParams& p) {
    q.validate("gaussian_kl q");
    p.validate("gaussian_kl p");
    require_same_shape(q.mean, p.mean, "gaussian_kl");
    GaussianKlGrads g;
    g.d_q_mean = Tensor::zeros(q.mean.shape);
    g.d_q_log_variance = Tensor::zeros(q.mean.shape);
    g.d_p_mean = Tensor::zeros(q.mean.shape);
    g.d_p_log_variance = Tensor::zeros(q.mean.shape);
    for (std::size_t d = 0; d < q.mean.numel(); ++d) {
        const double lq = q.log_variance.data[d];
        const double lp = p.log_variance.data[d];
        const double dm = q.mean.data[d] - p.mean.data[d];
        const double inv_vp = std::exp(-lp);
        const double ratio = std::exp(lq - lp);
        g.d_q_mean.data[d] = dm * inv_vp;
        g.d_p_mean.data[d] = -dm * inv_vp;
        g.d_q_log_variance.data[d] = 0.5 * (ratio - 1.0);
        g.d_p_log_variance.data[d] = 0.5 * (1.0 - ratio - dm * dm * inv_vp);
    }
    return g;
}

Tensor reparameterize(const GaussianParams& g, const Tensor& noise) {
    g.validate("reparameterize");
    require_same_shape(g.mean, noise, "reparameterize noise");
    Tensor out = g.mean;
    for (std::size_t d = 0; d < out.numel(); ++d)
        out.data[d] += std::exp(0.5 * g.log_variance.data[d]) * noise.data[d];
    return out;
}

}  // namespace vaereg
