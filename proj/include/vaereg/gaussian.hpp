#pragma once

#include "vaereg/tensor.hpp"

namespace vaereg {

// Diagonal Gaussian as (mean, log-variance). Variance is exp(log_variance),
// so it is strictly positive by construction.
struct GaussianParams {
    Tensor mean;
    Tensor log_variance;

    void validate(const char* what) const;
    std::size_t dim() const { return mean.numel(); }
};

// KL(q || p) for diagonal Gaussians, summed over dimensions:
//   sum_d 1/2 (exp(lq-lp) + (mq-mp)^2/exp(lp) - 1 + lp - lq)
double gaussian_kl(const GaussianParams& q, const GaussianParams& p);

// Partial derivatives of gaussian_kl with respect to both parameter sets.
struct GaussianKlGrads {
    Tensor d_q_mean;
    Tensor d_q_log_variance;
    Tensor d_p_mean;
    Tensor d_p_log_variance;
};
GaussianKlGrads gaussian_kl_grads(const GaussianParams& q, const GaussianParams& p);

// mean + exp(log_variance / 2) * noise, elementwise.
Tensor reparameterize(const GaussianParams& g, const Tensor& noise);

}  // namespace vaereg
