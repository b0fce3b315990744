#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vaereg/errors.hpp"

namespace vaereg {

// Dense row-major tensor of doubles. Rank is usually 1 (activations) or 2
// (weight matrices).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (numel_of(shape) != data.size())
            throw ValidationError("tensor: shape/data size mismatch");
    }

    static Tensor zeros(std::vector<std::size_t> shape_) {
        const std::size_t n = numel_of(shape_);
        return Tensor{std::move(shape_), std::vector<double>(n, 0.0)};
    }

    static Tensor scalar(double v) { return Tensor{{1}, {v}}; }

    std::size_t numel() const { return data.size(); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }

    // 2-D access, row-major.
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (const double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (const std::size_t d : shape) {
            if (d == 0) throw ValidationError("tensor: zero dimension");
            n *= d;
        }
        return n;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
    if (!a.same_shape(b)) throw ValidationError(what + ": shape mismatch");
}

}  // namespace vaereg
