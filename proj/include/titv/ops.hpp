// SPDX-License-Identifier: Apache-2.0
//
// Value-level kernels. The autodiff tape evaluates its forward pass through
// these same routines, so plain-tensor callers and the tape agree bit-for-bit.

#pragma once

#include <cmath>
#include <span>
#include <string>

#include "titv/tensor.hpp"

namespace titv {

enum class Elementwise { add, sub, hadamard, scale };
enum class Activation { sigmoid, tanh, identity };

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace kernel {

inline void check_matvec(const Tensor& w, const Tensor& x) {
    if (!w.is_matrix() || !x.is_vector() || w.cols() != x.size()) {
        throw DimensionError("matvec: cannot multiply " + w.shape().str() + " by " + x.shape().str());
    }
}

inline void matvec(const Tensor& w, const Tensor& x, Tensor& out) {
    const std::size_t rows = w.rows(), cols = w.cols();
    out.reset(Shape::vector(rows));
    const double* wp = w.values().data();
    const double* xp = x.values().data();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = wp + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xp[c];
        out[r] = acc;
    }
}

inline void elementwise(Elementwise op, const Tensor& a, const Tensor& b, Tensor& out) {
    out.reset(a.shape());
    const std::size_t n = a.size();
    switch (op) {
    case Elementwise::add:
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
        break;
    case Elementwise::sub:
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
        break;
    case Elementwise::hadamard:
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
        break;
    case Elementwise::scale: {
        const double s = b.item();
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
        break;
    }
    }
}

inline void activate(Activation kind, const Tensor& x, Tensor& out) {
    out.reset(x.shape());
    const std::size_t n = x.size();
    switch (kind) {
    case Activation::sigmoid:
        for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(x[i]);
        break;
    case Activation::tanh:
        for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(x[i]);
        break;
    case Activation::identity:
        for (std::size_t i = 0; i < n; ++i) out[i] = x[i];
        break;
    }
}

} // namespace kernel

inline void check_elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
    if (op == Elementwise::scale) {
        if (b.size() != 1) throw DimensionError("scale: factor must be a scalar, got " + b.shape().str());
        return;
    }
    require_same_shape(a, b, "elementwise");
}

inline Tensor matvec(const Tensor& w, const Tensor& x) {
    kernel::check_matvec(w, x);
    Tensor out;
    kernel::matvec(w, x, out);
    return out;
}

inline Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
    check_elementwise(op, a, b);
    Tensor out;
    kernel::elementwise(op, a, b, out);
    return out;
}

inline Tensor activate(Activation kind, const Tensor& x) {
    Tensor out;
    kernel::activate(kind, x, out);
    return out;
}

inline Tensor mean_pool(std::span<const Tensor> xs) {
    if (xs.empty()) throw ContractViolation("mean_pool: empty sequence");
    Tensor out(xs.front().shape());
    for (const auto& x : xs) {
        require_same_shape(out, x, "mean_pool");
        for (std::size_t i = 0; i < x.size(); ++i) out[i] += x[i];
    }
    const double count = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= count;
    return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace titv
