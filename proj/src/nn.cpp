#include "vaereg/nn.hpp"

#include <cmath>

#include "vaereg/errors.hpp"

namespace vaereg::nn {

double elu(double u) { return u >= 0.0 ? u : std::expm1(u); }

double elu_derivative(double u) { return u >= 0.0 ? 1.0 : std::exp(u); }

DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::zeros({out, in});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    return DenseLayer{std::move(w), Tensor::zeros({out}), act};
}

namespace {

void check_layer(const DenseLayer& layer, std::size_t index) {
    if (layer.weights.shape.size() != 2)
        throw ValidationError("layer " + std::to_string(index) + ": weights must be rank 2");
    if (layer.bias.shape.size() != 1 || layer.bias.shape[0] != layer.weights.shape[0])
        throw ValidationError("layer " + std::to_string(index) + ": bias/weight shape mismatch");
}

Tensor apply_layer(const DenseLayer& layer, const Tensor& x, Tensor* pre_out) {
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    Tensor pre = Tensor::zeros({out});
    for (std::size_t r = 0; r < out; ++r) {
        const double* wrow = layer.weights.data.data() + r * in;
        double acc = layer.bias.at(r);
        for (std::size_t c = 0; c < in; ++c) acc += wrow[c] * x.data[c];
        pre.data[r] = acc;
    }
    Tensor post = pre;
    if (layer.activation == Activation::kElu)
        for (double& v : post.data) v = elu(v);
    if (pre_out) *pre_out = std::move(pre);
    return post;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x) {
    if (net.empty()) throw ValidationError("forward: empty network");
    if (x.shape.size() != 1 || x.shape[0] != net.front().in_dim())
        throw ValidationError("forward: input shape does not match first layer");
    Tensor h = x;
    std::size_t i = 0;
    for (const DenseLayer& layer : net) {
        check_layer(layer, i);
        if (h.shape[0] != layer.in_dim())
            throw ValidationError("forward: layer " + std::to_string(i) + " input mismatch");
        h = apply_layer(layer, h, nullptr);
        ++i;
    }
    return h;
}

ForwardTrace forward_trace(const Network& net, const Tensor& x) {
    if (net.empty()) throw ValidationError("forward: empty network");
    if (x.shape.size() != 1 || x.shape[0] != net.front().in_dim())
        throw ValidationError("forward: input shape does not match first layer");
    ForwardTrace trace;
    trace.inputs.reserve(net.size());
    trace.pre_activations.reserve(net.size());
    Tensor h = x;
    std::size_t i = 0;
    for (const DenseLayer& layer : net) {
        check_layer(layer, i);
        if (h.shape[0] != layer.in_dim())
            throw ValidationError("forward: layer " + std::to_string(i) + " input mismatch");
        trace.inputs.push_back(h);
        Tensor pre;
        h = apply_layer(layer, h, &pre);
        trace.pre_activations.push_back(std::move(pre));
        ++i;
    }
    trace.output = std::move(h);
    return trace;
}

void backward_accumulate(const Network& net, const ForwardTrace& trace, const Tensor& upstream,
                         Gradients& acc, Tensor* input_grad) {
    if (trace.inputs.size() != net.size() || trace.pre_activations.size() != net.size())
        throw ValidationError("backward: trace does not match network (record a forward pass first)");
    if (upstream.shape.size() != 1 || upstream.shape[0] != net.back().out_dim())
        throw ValidationError("backward: upstream gradient shape mismatch");
    if (acc.weight_grads.size() != net.size())
        throw ValidationError("backward: gradient accumulator layer count mismatch");
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (trace.inputs[i].numel() != net[i].in_dim() ||
            trace.pre_activations[i].numel() != net[i].out_dim())
            throw ValidationError("backward: trace does not match network layer shapes");
        if (!acc.weight_grads[i].same_shape(net[i].weights) ||
            !acc.bias_grads[i].same_shape(net[i].bias))
            throw ValidationError("backward: gradient accumulator shape mismatch");
    }

    Tensor delta = upstream;  // dLoss/d(post-activation of current layer)
    Tensor dinput;
    for (std::size_t li = net.size(); li-- > 0;) {
        const DenseLayer& layer = net[li];
        const Tensor& pre = trace.pre_activations[li];
        const Tensor& input = trace.inputs[li];
        const std::size_t out = layer.out_dim();
        const std::size_t in = layer.in_dim();

        // dLoss/d(pre-activation), reusing delta in place
        if (layer.activation == Activation::kElu)
            for (std::size_t r = 0; r < out; ++r) delta.data[r] *= elu_derivative(pre.data[r]);

        double* wg = acc.weight_grads[li].data.data();
        double* bg = acc.bias_grads[li].data.data();
        for (std::size_t r = 0; r < out; ++r) {
            const double d = delta.data[r];
            bg[r] += d;
            double* wrow = wg + r * in;
            for (std::size_t c = 0; c < in; ++c) wrow[c] += d * input.data[c];
        }

        const bool need_dinput = li > 0 || input_grad != nullptr;
        if (!need_dinput) break;
        dinput = Tensor::zeros({in});
        for (std::size_t r = 0; r < out; ++r) {
            const double d = delta.data[r];
            const double* wrow = layer.weights.data.data() + r * in;
            for (std::size_t c = 0; c < in; ++c) dinput.data[c] += d * wrow[c];
        }
        delta = std::move(dinput);
    }
    if (input_grad) *input_grad = std::move(delta);
}

Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& upstream) {
    Gradients grads = zero_gradients(net);
    backward_accumulate(net, trace, upstream, grads, &grads.input_grad);
    return grads;
}

void accumulate(Gradients& dst, const Gradients& src) {
    if (dst.weight_grads.size() != src.weight_grads.size())
        throw ValidationError("accumulate: gradient layer count mismatch");
    for (std::size_t i = 0; i < dst.weight_grads.size(); ++i) {
        require_same_shape(dst.weight_grads[i], src.weight_grads[i], "accumulate weights");
        require_same_shape(dst.bias_grads[i], src.bias_grads[i], "accumulate bias");
        for (std::size_t k = 0; k < dst.weight_grads[i].numel(); ++k)
            dst.weight_grads[i].data[k] += src.weight_grads[i].data[k];
        for (std::size_t k = 0; k < dst.bias_grads[i].numel(); ++k)
            dst.bias_grads[i].data[k] += src.bias_grads[i].data[k];
    }
    if (dst.input_grad.numel() == src.input_grad.numel())
        for (std::size_t k = 0; k < dst.input_grad.numel(); ++k)
            dst.input_grad.data[k] += src.input_grad.data[k];
}

Gradients zero_gradients(const Network& net) {
    Gradients g;
    for (const DenseLayer& layer : net) {
        g.weight_grads.push_back(Tensor::zeros(layer.weights.shape));
        g.bias_grads.push_back(Tensor::zeros(layer.bias.shape));
    }
    g.input_grad = Tensor::zeros({net.front().in_dim()});
    return g;
}

std::size_t parameter_count(const Network& net) {
    std::size_t n = 0;
    for (const DenseLayer& layer : net) n += layer.weights.numel() + layer.bias.numel();
    return n;
}

}  // namespace vaereg::nn
