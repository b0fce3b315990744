#pragma once

#include <cstdint>
#include <vector>

#include "vaereg/rng.hpp"
#include "vaereg/tensor.hpp"

namespace vaereg::nn {

enum class Activation { kElu, kIdentity };

// y = act(W x + b), W is (out, in).
struct DenseLayer {
    Tensor weights;
    Tensor bias;
    Activation activation = Activation::kIdentity;

    std::size_t in_dim() const { return weights.shape[1]; }
    std::size_t out_dim() const { return weights.shape[0]; }
};

using Network = std::vector<DenseLayer>;

double elu(double u);
double elu_derivative(double u);

// Glorot-uniform initialized layer: weights ~ U(-a, a), a = sqrt(6/(in+out)),
// zero bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng);

// Per-layer inputs and pre-activations recorded during a forward pass;
// backward() consumes them.
struct ForwardTrace {
    std::vector<Tensor> inputs;
    std::vector<Tensor> pre_activations;
    Tensor output;
};

Tensor forward(const Network& net, const Tensor& x);
ForwardTrace forward_trace(const Network& net, const Tensor& x);

struct Gradients {
    std::vector<Tensor> weight_grads;
    std::vector<Tensor> bias_grads;
    Tensor input_grad;
};

// Reverse pass through the trace. upstream is dLoss/dOutput; returns gradients
// for every parameter and for the network input.
Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& upstream);

// Accumulating variant for training loops: parameter gradients are added into
// acc (which must match the network shapes); the input gradient is written to
// input_grad when non-null. Avoids per-example allocation.
void backward_accumulate(const Network& net, const ForwardTrace& trace, const Tensor& upstream,
                         Gradients& acc, Tensor* input_grad);

// Accumulate src gradients into dst (dst += src), shapes must match.
void accumulate(Gradients& dst, const Gradients& src);
Gradients zero_gradients(const Network& net);

std::size_t parameter_count(const Network& net);

}  // namespace vaereg::nn
